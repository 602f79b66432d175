#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "schedforge/workload.hpp"

namespace schedforge {

// A job occupying nodes at episode start ("preloaded cluster").
struct PreloadJob {
  int nodes = 0;
  std::int64_t remaining = 0;  // seconds until it completes
};

struct SimConfig {
  int total_nodes = 0;
  int procs_per_node = 1;  // footprint = ceil(requested_procs / procs_per_node)
  int window = 128;        // W: observable wait-queue prefix
  bool backfill = true;
  std::vector<PreloadJob> preload;
};

enum class DecisionCause { arrival, completion, initial };

struct RunningJob {
  std::int64_t job_id = 0;  // preload jobs carry negative ids
  int nodes_held = 0;
  std::int64_t start_time = 0;
  std::int64_t end_time = 0;
};

// Snapshot handed to the scheduler. observable_jobs is the first W entries
// of the wait queue; the chosen index maps straight back into the queue.
struct DecisionPoint {
  std::int64_t clock = 0;
  int free_nodes = 0;
  int total_nodes = 0;
  DecisionCause cause = DecisionCause::initial;
  std::size_t queue_length = 0;
  std::vector<JobRecord> observable_jobs;
};

struct FinishedJob {
  std::int64_t job_id = 0;
  std::int64_t submit_time = 0;
  std::int64_t start_time = 0;
  std::int64_t end_time = 0;
  std::int64_t wait_time = 0;  // start - submit
  std::int64_t run_time = 0;   // end - start
  int nodes = 0;
};

struct EpisodeResult {
  std::vector<FinishedJob> jobs;  // sequence jobs only, completion order
  // step function of allocated nodes: (time, allocation after the change)
  std::vector<std::pair<std::int64_t, int>> allocation_timeline;
  std::int64_t first_submit = 0;
  std::int64_t last_completion = 0;
  std::int64_t makespan = 0;
  int total_nodes = 0;
  std::size_t dropped_jobs = 0;  // run_time = -1, unreplayable
};

// Pending reservation for a chosen job that did not fit (EASY-for-one).
struct Reservation {
  JobRecord job;
  int nodes = 0;
  std::int64_t start_at = 0;  // promised start computed when it was chosen
};

// Discrete-event cluster simulator. One instance owns one episode; the
// caller alternates next_decision()/apply_action() until next_decision()
// returns nullopt, then takes the result.
//
// Event rules: completions at time t are processed before arrivals at t; a
// pending reservation starts as soon as its nodes are free; while a
// reservation is outstanding the scheduler is not queried and eligible
// queue jobs are backfilled automatically at each event. Ties everywhere
// break on lowest job_id. All times are integer seconds.
class Cluster {
 public:
  Cluster(JobSequence sequence, SimConfig config);

  std::optional<DecisionPoint> next_decision();
  void apply_action(std::size_t chosen);

  EpisodeResult result() const;
  bool done() const;

  std::int64_t clock() const { return clock_; }
  int free_nodes() const { return free_nodes_; }
  int total_nodes() const { return config_.total_nodes; }
  const std::vector<RunningJob>& running() const { return running_; }
  const std::vector<JobRecord>& wait_queue() const { return wait_queue_; }
  const std::optional<Reservation>& reservation() const { return reservation_; }
  // times a reserved job started later than promised (0 on conforming traces)
  std::size_t reservation_delays() const { return reservation_delays_; }

  int footprint(const JobRecord& job) const;

 private:
  void check_conservation() const;
  void start_job(const JobRecord& job);
  void complete_running(std::size_t index);
  void try_start_reserved();
  void backfill_scan();
  std::int64_t earliest_fit_time(int need) const;
  void record_allocation();

  SimConfig config_;
  JobSequence sequence_;
  std::size_t next_arrival_ = 0;

  std::int64_t clock_ = 0;
  int free_nodes_ = 0;
  int allocated_ = 0;
  std::vector<RunningJob> running_;
  std::vector<JobRecord> wait_queue_;
  std::optional<Reservation> reservation_;
  std::size_t running_sequence_jobs_ = 0;

  bool awaiting_action_ = false;
  bool first_decision_ = true;

  EpisodeResult result_;
  std::size_t reservation_delays_ = 0;
};

using SchedulerFn = std::function<std::size_t(const DecisionPoint&)>;

// Full replay: loops next_decision/apply_action until done. Deterministic
// given a deterministic scheduler.
EpisodeResult run_episode(const JobSequence& sequence, const SchedulerFn& scheduler,
                          const SimConfig& config);

struct UtilizationSample {
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  double fraction = 0.0;  // allocated / total over [t_start, t_end)
};

// Step-function samples over [first_submit, first_submit + horizon).
// Throws ZeroHorizonError when horizon <= 0.
std::vector<UtilizationSample> utilization_series(const EpisodeResult& result,
                                                  std::int64_t horizon);

// Time-weighted allocated fraction over [t0, t1). Throws ZeroHorizonError.
double utilization_fraction(const EpisodeResult& result, std::int64_t t0, std::int64_t t1);

}  // namespace schedforge
