#include "schedforge/baselines.hpp"

#include <cmath>
#include <memory>

#include "schedforge/errors.hpp"

namespace schedforge {

std::optional<Rule> rule_from_name(std::string_view name) {
  if (name == "fcfs") return Rule::fcfs;
  if (name == "sjf") return Rule::sjf;
  if (name == "f1") return Rule::f1;
  if (name == "wfp3") return Rule::wfp3;
  if (name == "unicef") return Rule::unicef;
  if (name == "random") return Rule::random_pick;
  return std::nullopt;
}

std::string rule_name(Rule rule) {
  switch (rule) {
    case Rule::fcfs: return "fcfs";
    case Rule::sjf: return "sjf";
    case Rule::f1: return "f1";
    case Rule::wfp3: return "wfp3";
    case Rule::unicef: return "unicef";
    case Rule::random_pick: return "random";
  }
  return "?";
}

double rule_score(Rule rule, const JobRecord& job, std::int64_t clock) {
  const double s = static_cast<double>(job.submit_time);
  const double r = static_cast<double>(job.requested_time);
  const double n = static_cast<double>(job.requested_procs);
  const double w = static_cast<double>(clock - job.submit_time);

  switch (rule) {
    case Rule::fcfs:
      return s;
    case Rule::sjf:
      if (r <= 0) throw NonPositiveRuntimeError("SJF needs requested_time > 0");
      return r;
    case Rule::wfp3: {
      if (r <= 0) throw NonPositiveRuntimeError("WFP3 needs requested_time > 0");
      const double ratio = w / r;
      return -(ratio * ratio * ratio) * n;
    }
    case Rule::unicef:
      if (r <= 0) throw NonPositiveRuntimeError("UNICEF needs requested_time > 0");
      return -w / (std::log2(std::max(n, 2.0)) * r);
    case Rule::f1:
      return std::log10(std::max(r, 1.0)) * n + 870.0 * std::log10(std::max(s, 1.0));
    case Rule::random_pick:
      throw InvalidParamsError("random_pick has no score function");
  }
  throw InvalidParamsError("unknown rule");
}

std::size_t rule_pick(Rule rule, const DecisionPoint& decision, Rng* rng) {
  const auto& jobs = decision.observable_jobs;
  if (jobs.empty()) throw EmptyWindowError("no observable jobs to pick from");

  if (rule == Rule::random_pick) {
    if (rng == nullptr) throw InvalidParamsError("random_pick needs a generator");
    return rng->pick_index(jobs.size());
  }

  std::size_t best = 0;
  double best_score = rule_score(rule, jobs[0], decision.clock);
  for (std::size_t i = 1; i < jobs.size(); ++i) {
    const double score = rule_score(rule, jobs[i], decision.clock);
    if (score < best_score || (score == best_score && jobs[i].job_id < jobs[best].job_id)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

SchedulerFn make_rule_scheduler(Rule rule, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rule, rng](const DecisionPoint& dp) { return rule_pick(rule, dp, rng.get()); };
}

}  // namespace schedforge
