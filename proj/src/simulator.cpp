#include "schedforge/simulator.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "schedforge/errors.hpp"

namespace schedforge {

namespace {
constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();
}

Cluster::Cluster(JobSequence sequence, SimConfig config)
    : config_(std::move(config)), sequence_(std::move(sequence)) {
  if (config_.total_nodes < 1) throw InvalidParamsError("total_nodes must be >= 1");
  if (config_.procs_per_node < 1) throw InvalidParamsError("procs_per_node must be >= 1");
  if (config_.window < 1) throw InvalidParamsError("window must be >= 1");
  if (sequence_.empty()) throw EmptySequenceError("empty job sequence");

  // unreplayable jobs are dropped up front
  std::size_t dropped = 0;
  std::erase_if(sequence_, [&dropped](const JobRecord& j) {
    if (j.run_time < 0) {
      ++dropped;
      return true;
    }
    return false;
  });
  result_.dropped_jobs = dropped;
  if (sequence_.empty()) throw EmptySequenceError("no replayable jobs (all run_time unknown)");

  std::stable_sort(sequence_.begin(), sequence_.end(), [](const JobRecord& a, const JobRecord& b) {
    if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
    return a.job_id < b.job_id;
  });

  for (const auto& j : sequence_) {
    if (footprint(j) > config_.total_nodes) {
      throw JobTooLargeError("job " + std::to_string(j.job_id) + " needs " +
                             std::to_string(footprint(j)) + " nodes on a " +
                             std::to_string(config_.total_nodes) + "-node cluster");
    }
  }

  clock_ = sequence_.front().submit_time;
  free_nodes_ = config_.total_nodes;
  allocated_ = 0;

  int preload_id = -1;
  for (const auto& p : config_.preload) {
    if (p.nodes < 1 || p.remaining < 1) throw InvalidParamsError("preload jobs need nodes >= 1 and remaining >= 1");
    if (p.nodes > free_nodes_) throw InvalidParamsError("preload oversubscribes the cluster");
    running_.push_back({preload_id--, p.nodes, clock_, clock_ + p.remaining});
    free_nodes_ -= p.nodes;
    allocated_ += p.nodes;
  }

  result_.total_nodes = config_.total_nodes;
  result_.first_submit = clock_;
  result_.allocation_timeline.emplace_back(clock_, allocated_);
  check_conservation();
}

int Cluster::footprint(const JobRecord& job) const {
  return static_cast<int>((static_cast<std::int64_t>(job.requested_procs) + config_.procs_per_node - 1) /
                          config_.procs_per_node);
}

void Cluster::check_conservation() const {
  int held = 0;
  for (const auto& r : running_) held += r.nodes_held;
  if (held != allocated_ || free_nodes_ + held != config_.total_nodes || free_nodes_ < 0) {
    throw InvariantViolation("node conservation violated at t=" + std::to_string(clock_) +
                             ": free=" + std::to_string(free_nodes_) + " held=" + std::to_string(held) +
                             " total=" + std::to_string(config_.total_nodes));
  }
}

void Cluster::record_allocation() {
  auto& tl = result_.allocation_timeline;
  if (!tl.empty() && tl.back().first == clock_) {
    tl.back().second = allocated_;
  } else {
    tl.emplace_back(clock_, allocated_);
  }
}

void Cluster::start_job(const JobRecord& job) {
  const int need = footprint(job);
  running_.push_back({job.job_id, need, clock_, clock_ + job.run_time});
  free_nodes_ -= need;
  allocated_ += need;
  ++running_sequence_jobs_;

  FinishedJob f;
  f.job_id = job.job_id;
  f.submit_time = job.submit_time;
  f.start_time = clock_;
  f.end_time = clock_ + job.run_time;
  f.wait_time = clock_ - job.submit_time;
  f.run_time = job.run_time;
  f.nodes = need;
  result_.jobs.push_back(f);

  record_allocation();
  check_conservation();
}

void Cluster::complete_running(std::size_t index) {
  const RunningJob r = running_[index];
  running_.erase(running_.begin() + static_cast<std::ptrdiff_t>(index));
  free_nodes_ += r.nodes_held;
  allocated_ -= r.nodes_held;
  if (r.job_id >= 0) {
    --running_sequence_jobs_;
    result_.last_completion = std::max(result_.last_completion, r.end_time);
  }
  record_allocation();
  check_conservation();
}

void Cluster::try_start_reserved() {
  if (!reservation_) return;
  if (footprint(reservation_->job) > free_nodes_) return;
  if (clock_ > reservation_->start_at) ++reservation_delays_;
  JobRecord job = reservation_->job;
  reservation_.reset();
  start_job(job);
}

// One pass in queue order: anything that fits now and is estimated to end
// by the reservation start gets launched. Free nodes only shrink during the
// pass, so a single pass is exhaustive.
void Cluster::backfill_scan() {
  if (!config_.backfill || !reservation_) return;
  const std::int64_t fence = reservation_->start_at;
  for (std::size_t i = 0; i < wait_queue_.size();) {
    const JobRecord& job = wait_queue_[i];
    const std::int64_t walltime = job.requested_time > 0 ? job.requested_time : job.run_time;
    if (footprint(job) <= free_nodes_ && clock_ + walltime <= fence) {
      JobRecord chosen = job;
      wait_queue_.erase(wait_queue_.begin() + static_cast<std::ptrdiff_t>(i));
      start_job(chosen);
    } else {
      ++i;
    }
  }
}

std::int64_t Cluster::earliest_fit_time(int need) const {
  if (need <= free_nodes_) return clock_;
  std::vector<std::pair<std::int64_t, int>> ends;
  ends.reserve(running_.size());
  for (const auto& r : running_) ends.emplace_back(r.end_time, r.nodes_held);
  std::sort(ends.begin(), ends.end());
  int acc = free_nodes_;
  for (const auto& [t, n] : ends) {
    acc += n;
    if (acc >= need) return t;
  }
  throw InvariantViolation("no feasible start time for footprint " + std::to_string(need));
}

bool Cluster::done() const {
  return next_arrival_ >= sequence_.size() && wait_queue_.empty() && !reservation_ &&
         running_sequence_jobs_ == 0;
}

std::optional<DecisionPoint> Cluster::next_decision() {
  if (awaiting_action_) throw InvariantViolation("next_decision called with an action pending");

  while (true) {
    if (done()) return std::nullopt;

    std::int64_t t_completion = kNever;
    for (const auto& r : running_) t_completion = std::min(t_completion, r.end_time);
    std::int64_t t_arrival =
        next_arrival_ < sequence_.size() ? sequence_[next_arrival_].submit_time : kNever;

    // A waiting job with no future event cannot happen: every decision
    // consumes its job and reservations resolve at completions.
    if (t_completion == kNever && t_arrival == kNever) {
      throw InvariantViolation("simulation stalled with jobs outstanding");
    }

    const std::int64_t t = std::min(t_completion, t_arrival);
    clock_ = std::max(clock_, t);

    bool had_arrival = false;
    // completions first, lowest job_id first among simultaneous ones
    while (true) {
      std::size_t best = running_.size();
      for (std::size_t i = 0; i < running_.size(); ++i) {
        if (running_[i].end_time != t) continue;
        if (best == running_.size() || running_[i].job_id < running_[best].job_id) best = i;
      }
      if (best == running_.size()) break;
      complete_running(best);
      try_start_reserved();
    }
    while (next_arrival_ < sequence_.size() && sequence_[next_arrival_].submit_time == t) {
      wait_queue_.push_back(sequence_[next_arrival_++]);
      had_arrival = true;
    }
    if (reservation_) backfill_scan();

    if (!wait_queue_.empty() && !reservation_) {
      DecisionPoint dp;
      dp.clock = clock_;
      dp.free_nodes = free_nodes_;
      dp.total_nodes = config_.total_nodes;
      dp.cause = first_decision_ ? DecisionCause::initial
                                 : (had_arrival ? DecisionCause::arrival : DecisionCause::completion);
      dp.queue_length = wait_queue_.size();
      const std::size_t w = std::min<std::size_t>(wait_queue_.size(), static_cast<std::size_t>(config_.window));
      dp.observable_jobs.assign(wait_queue_.begin(), wait_queue_.begin() + static_cast<std::ptrdiff_t>(w));
      first_decision_ = false;
      awaiting_action_ = true;
      return dp;
    }
  }
}

void Cluster::apply_action(std::size_t chosen) {
  if (!awaiting_action_) throw InvariantViolation("apply_action without a pending decision");
  const std::size_t observable =
      std::min<std::size_t>(wait_queue_.size(), static_cast<std::size_t>(config_.window));
  if (chosen >= observable) {
    throw BadIndexError("chosen index " + std::to_string(chosen) + " with " +
                        std::to_string(observable) + " observable jobs");
  }
  awaiting_action_ = false;

  JobRecord job = wait_queue_[chosen];
  wait_queue_.erase(wait_queue_.begin() + static_cast<std::ptrdiff_t>(chosen));

  const int need = footprint(job);
  if (need <= free_nodes_) {
    start_job(job);
    return;
  }
  reservation_ = Reservation{job, need, earliest_fit_time(need)};
  backfill_scan();
}

EpisodeResult Cluster::result() const {
  if (!done()) throw InvariantViolation("result requested before episode completed");
  EpisodeResult r = result_;
  r.makespan = r.last_completion - r.first_submit;
  return r;
}

EpisodeResult run_episode(const JobSequence& sequence, const SchedulerFn& scheduler,
                          const SimConfig& config) {
  Cluster cluster(sequence, config);
  while (auto dp = cluster.next_decision()) {
    cluster.apply_action(scheduler(*dp));
  }
  return cluster.result();
}

std::vector<UtilizationSample> utilization_series(const EpisodeResult& result, std::int64_t horizon) {
  if (horizon <= 0) throw ZeroHorizonError("utilization horizon must be positive");
  const std::int64_t t0 = result.first_submit;
  const std::int64_t t1 = t0 + horizon;

  std::vector<UtilizationSample> samples;
  const auto& tl = result.allocation_timeline;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const std::int64_t seg_start = std::max(tl[i].first, t0);
    const std::int64_t seg_end = std::min(i + 1 < tl.size() ? tl[i + 1].first : t1, t1);
    if (seg_end <= seg_start) continue;
    samples.push_back({seg_start, seg_end,
                       static_cast<double>(tl[i].second) / static_cast<double>(result.total_nodes)});
  }
  if (samples.empty() || samples.back().t_end < t1) {
    const std::int64_t tail_start = samples.empty() ? t0 : samples.back().t_end;
    samples.push_back({tail_start, t1, 0.0});
  }
  return samples;
}

double utilization_fraction(const EpisodeResult& result, std::int64_t t0, std::int64_t t1) {
  if (t1 <= t0) throw ZeroHorizonError("utilization window must have positive length");
  const auto& tl = result.allocation_timeline;
  double node_seconds = 0.0;
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const std::int64_t seg_start = std::max(tl[i].first, t0);
    const std::int64_t seg_end = std::min(i + 1 < tl.size() ? tl[i + 1].first : t1, t1);
    if (seg_end > seg_start) {
      node_seconds += static_cast<double>(tl[i].second) * static_cast<double>(seg_end - seg_start);
    }
  }
  return node_seconds / (static_cast<double>(result.total_nodes) * static_cast<double>(t1 - t0));
}

}  // namespace schedforge
