#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "schedforge/metrics.hpp"
#include "schedforge/neural.hpp"
#include "schedforge/rng.hpp"
#include "schedforge/simulator.hpp"

namespace schedforge {

enum class Goal { bounded_slowdown, waiting, turnaround, utilization };

std::optional<Goal> goal_from_name(std::string_view name);  // bsld|wait|turnaround|util
std::string goal_name(Goal goal);

using RewardFn = std::function<double(const EpisodeResult&)>;

// Terminal-only reward: 0 at every decision, then -(episode average metric)
// for the minimization goals and +utilization for the maximization goal.
RewardFn make_reward(Goal goal);

// G_t = R_t + gamma * G_{t+1}, zero after the terminal step.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// A_t = delta_t + gamma*lambda*A_{t+1} with delta_t = R_t + gamma*V_{t+1} - V_t.
// values carries the bootstrap: |values| = |rewards| + 1.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda);

struct Transition {
  JobSlots observation;
  std::size_t action = 0;
  double logp_old = 0;
  double reward = 0;
  double value = 0;
  bool done = false;
};

struct RolloutBatch {
  std::vector<Transition> transitions;  // episodes back to back, done marks ends
  std::vector<double> returns;
  std::vector<double> advantages;
  std::vector<double> episode_rewards;  // summed reward per episode
  bool advantages_normalized = false;

  std::size_t size() const { return transitions.size(); }
  void append(RolloutBatch&& other);
  void compute_returns_and_advantages(double gamma, double lambda);
  void normalize_advantages();  // batch mean 0, variance 1
};

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 0.01;
  int epochs = 4;
  std::size_t minibatch_size = 0;  // 0 = full batch
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool normalize_advantages = true;
  bool adam = false;  // plain gradient step by default

  void validate() const;  // throws InvalidParamsError on bad ranges
};

// min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct LossStats {
  double policy_loss = 0;  // negated mean surrogate (minimized)
  double value_loss = 0;   // mean (V - G)^2
  double entropy = 0;      // mean policy entropy
  double total_loss = 0;   // policy + c_v*value - c_e*entropy
  double mean_ratio = 0;
  double clip_fraction = 0;  // fraction of samples with |ratio - 1| > eps
  std::vector<double> per_sample_surrogate;
};

struct LossResult {
  LossStats stats;
  // gradients of the maximized objective J = surrogate - c_v*mse + c_e*H,
  // so an ascent step is theta += alpha * grad
  GradientBuffer policy_grad;
  GradientBuffer value_grad;
};

// Loss and gradients over the selected samples. Throws EmptyBatchError and
// NonFiniteLossError.
LossResult ppo_loss(const RolloutBatch& batch, std::span<const std::size_t> indices,
                    const MlpParams& policy, const MlpParams& value, const PpoConfig& config);
LossResult ppo_loss(const RolloutBatch& batch, const MlpParams& policy, const MlpParams& value,
                    const PpoConfig& config);

// Gradient-ascent stepper; keeps adaptive-moment state per network when
// config.adam is set.
class Optimizer {
 public:
  explicit Optimizer(const PpoConfig& config);
  void step_policy(MlpParams& params, const GradientBuffer& ascent_grad);
  void step_value(MlpParams& params, const GradientBuffer& ascent_grad);

 private:
  struct Slot {
    GradientBuffer m, v;
    long t = 0;
    bool initialized = false;
  };
  void step(MlpParams& params, const GradientBuffer& grad, Slot& slot);

  double lr_;
  bool adam_;
  Slot policy_slot_, value_slot_;
};

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double mean_ratio = 0;
  double clip_fraction = 0;
};

// One PPO update: epochs x shuffled minibatches of ascent steps. Normalizes
// batch advantages first when configured. On NonFiniteLossError the prior
// parameters are restored before rethrowing.
UpdateStats ppo_update(MlpParams& policy, MlpParams& value, RolloutBatch& batch,
                       const PpoConfig& config, Rng& rng, Optimizer& optimizer);

// ---- environment glue ----

struct EnvConfig {
  SimConfig sim;
  FeatureConfig features;
  Goal goal = Goal::bounded_slowdown;
};

EnvConfig make_env_config(int total_nodes, int window, bool backfill, Goal goal,
                          int procs_per_node = 1);

// Runs the policy over each sequence, sampling actions from the softmax,
// and appends the transitions (terminal reward on each episode's last step).
void collect_rollout(const MlpParams& policy, const MlpParams& value,
                     std::span<const JobSequence> sequences, const EnvConfig& env, Rng& rng,
                     RolloutBatch& out);

// Greedy (argmax probability) scheduler for evaluation; first max wins ties.
SchedulerFn make_policy_scheduler(MlpParams policy, FeatureConfig features);

}  // namespace schedforge
