#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "schedforge/rng.hpp"
#include "schedforge/simulator.hpp"
#include "schedforge/workload.hpp"

namespace schedforge {

// Rule-based priority schedulers. Lower score = higher priority; ties break
// on lowest job_id. The F1/WFP3/UNICEF formulas follow the baseline
// scheduler literature, with guards so every score is finite.
enum class Rule { fcfs, sjf, f1, wfp3, unicef, random_pick };

std::optional<Rule> rule_from_name(std::string_view name);
std::string rule_name(Rule rule);

// Priority score of one waiting job at the given clock.
//   FCFS    s                         (submit time)
//   SJF     r                         (requested time)
//   WFP3    -(w/r)^3 * n
//   UNICEF  -w / (log2(max(n,2)) * r)
//   F1      log10(max(r,1))*n + 870*log10(max(s,1))
// with n = requested_procs, w = clock - s. Throws NonPositiveRuntimeError
// when a rule divides by r and r <= 0. random_pick has no score.
double rule_score(Rule rule, const JobRecord& job, std::int64_t clock);

// Argmin-score index into observable_jobs; random_pick draws uniformly from
// `rng` (required for it). Throws EmptyWindowError.
std::size_t rule_pick(Rule rule, const DecisionPoint& decision, Rng* rng = nullptr);

// Scheduler callback for run_episode. The seed only matters for random_pick.
SchedulerFn make_rule_scheduler(Rule rule, std::uint64_t seed = 0);

}  // namespace schedforge
