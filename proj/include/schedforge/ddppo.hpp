#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "schedforge/rl.hpp"
#include "schedforge/rng.hpp"
#include "schedforge/workload.hpp"

namespace schedforge {

// Decentralized distributed PPO: N workers collect experience and compute
// gradients independently; a synchronization barrier aggregates the
// gradients in fixed worker-id order and applies one shared update, so runs
// are reproducible for a fixed N.

struct SyncConfig {
  int num_workers = 4;
  // optimizer steps each worker takes locally between barriers; 1 means
  // every step is a barrier (gradient aggregation), >1 switches to local
  // steps with a parameter average at the barrier
  int sync_interval = 1;
  enum class Aggregation { sum, mean };
  Aggregation aggregation = Aggregation::mean;

  void validate() const;
};

struct NetGradients {
  GradientBuffer policy;
  GradientBuffer value;
};

// theta' = theta + alpha * aggregate, aggregate summed in worker-id order
// (divided by the contributor count in mean mode). Failed workers pass
// nullopt and are skipped. Throws NoGradientsError when nothing
// contributed, ShapeMismatchError on incongruent buffers.
void sync_update(MlpParams& policy, MlpParams& value,
                 std::span<const std::optional<NetGradients>> gradients, const SyncConfig& config,
                 Optimizer& optimizer);

struct WorkerState {
  int worker_id = 0;
  MlpParams policy;  // bitwise equal across workers after every barrier
  MlpParams value;
  Rng rng;           // private stream: sequence draws, action sampling, shuffles
  std::vector<JobSequence> shard;
  RolloutBatch batch;

  WorkerState() : rng(0) {}
};

// Stream seed for worker `worker_id` under a master seed; training and any
// reference reimplementation must derive streams identically.
std::uint64_t worker_stream_seed(std::uint64_t master_seed, int worker_id);

// Per-iteration training sequences: `episodes` slices of `length` jobs at
// starts drawn from `rng`, or the leading slice repeated when fixed.
std::vector<JobSequence> draw_training_sequences(const WorkloadTrace& trace, std::size_t episodes,
                                                 std::size_t length, bool fixed, Rng& rng);

// Collect the worker's rollout on its shard and return the full-batch
// objective gradients at the worker's current parameters.
NetGradients local_gradient(WorkerState& worker, const EnvConfig& env, const PpoConfig& ppo);

// ---- population-based training ----

struct PbtMember {
  int member_id = 0;
  PpoConfig hyper;
  double score = std::numeric_limits<double>::quiet_NaN();  // episode_reward_mean
  bool scored = false;
  MlpParams policy;
  MlpParams value;
};

struct PbtConfig {
  int population = 8;
  double quantile = 0.25;
  std::vector<double> perturb_factors = {0.8, 1.2};
  int exploit_cadence = 5;  // iterations between pbt steps

  void validate() const;
};

// Exploit/explore step: members strictly below the q-quantile score copy a
// top-(1-q) member's checkpoint and hyperparameters, then each tunable
// hyperparameter (learning rate, clip, entropy coefficient) is multiplied
// by a factor drawn from the perturb set. Ties replace nobody, so the best
// member is never overwritten. Throws UnscoredMemberError.
void pbt_step(std::vector<PbtMember>& population, const PbtConfig& config, Rng& rng);

// ---- training loop ----

struct IterationStats {
  int iteration = 0;
  double episode_reward_mean = 0;
  UpdateStats update;
  double wall_time_s = 0;
};

struct TrainConfig {
  WorkloadTrace trace;
  EnvConfig env;
  PpoConfig ppo;
  SyncConfig sync;
  int iterations = 100;
  int episodes_per_worker = 2;
  std::size_t sequence_length = 64;
  bool fixed_sequence = false;
  std::uint64_t seed = 1;
  int checkpoint_interval = 0;  // extra checkpoints every k iterations
  std::string out_dir;          // empty: no files written
  bool use_pbt = false;
  PbtConfig pbt;
  int threads = 0;  // 0 = hardware concurrency
};

struct TrainResult {
  MlpParams policy;
  MlpParams value;
  std::vector<IterationStats> curve;
  PpoConfig resolved_ppo;
  std::string manifest_json;
};

// iterations x (parallel local gradients -> barrier). Emits
// episode_reward_mean per iteration; checkpoints + JSON-lines log under
// out_dir when set. Deterministic for fixed (seed, N, reduction order).
// Aborts with Error when every worker fails an iteration.
TrainResult train(const TrainConfig& config);

// ---- random-search tuning ----

struct TuneSpec {
  int trials = 4;
  std::uint64_t seed = 0;
  int trial_iterations = 10;
  // search space: range or choice set per hyperparameter
  std::pair<double, double> lr_range = {1e-3, 3e-2};  // log-uniform
  std::pair<double, double> clip_range = {0.1, 0.3};  // uniform
  std::vector<double> entropy_choices = {0.0, 0.005, 0.02};
  std::vector<int> epochs_choices = {1, 2, 4};

  void validate() const;
};

struct TuneTrial {
  int index = 0;
  PpoConfig config;
  double score = 0;  // episode_reward_mean, tail-averaged
  bool failed = false;
};

struct TuneResult {
  PpoConfig best;
  double best_score = 0;
  std::vector<TuneTrial> trials;
  std::string ledger_json;
};

// Samples `trials` configurations from the space (deterministic per seed),
// trains each at trial_iterations budget, returns the argmax of
// episode_reward_mean. Throws AllTrialsFailedError.
TuneResult tune(const TuneSpec& spec, const TrainConfig& base);

}  // namespace schedforge
