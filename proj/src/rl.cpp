#include "schedforge/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "schedforge/errors.hpp"

namespace schedforge {

std::optional<Goal> goal_from_name(std::string_view name) {
  if (name == "bsld") return Goal::bounded_slowdown;
  if (name == "wait") return Goal::waiting;
  if (name == "turnaround") return Goal::turnaround;
  if (name == "util") return Goal::utilization;
  return std::nullopt;
}

std::string goal_name(Goal goal) {
  switch (goal) {
    case Goal::bounded_slowdown: return "bsld";
    case Goal::waiting: return "wait";
    case Goal::turnaround: return "turnaround";
    case Goal::utilization: return "util";
  }
  return "?";
}

RewardFn make_reward(Goal goal) {
  switch (goal) {
    case Goal::bounded_slowdown:
      return [](const EpisodeResult& r) { return -episode_avg_bounded_slowdown(r); };
    case Goal::waiting:
      return [](const EpisodeResult& r) { return -episode_avg_waiting(r); };
    case Goal::turnaround:
      return [](const EpisodeResult& r) { return -episode_avg_turnaround(r); };
    case Goal::utilization:
      return [](const EpisodeResult& r) { return utilization(r); };
  }
  throw InvalidParamsError("unknown goal");
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> returns(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda) {
  if (values.size() != rewards.size() + 1) {
    throw LengthMismatchError("gae needs |values| = |rewards| + 1 (bootstrap appended)");
  }
  std::vector<double> advantages(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    const double delta = rewards[i] + gamma * values[i + 1] - values[i];
    acc = delta + gamma * lambda * acc;
    advantages[i] = acc;
  }
  return advantages;
}

void RolloutBatch::append(RolloutBatch&& other) {
  transitions.insert(transitions.end(), std::make_move_iterator(other.transitions.begin()),
                     std::make_move_iterator(other.transitions.end()));
  returns.insert(returns.end(), other.returns.begin(), other.returns.end());
  advantages.insert(advantages.end(), other.advantages.begin(), other.advantages.end());
  episode_rewards.insert(episode_rewards.end(), other.episode_rewards.begin(),
                         other.episode_rewards.end());
}

void RolloutBatch::compute_returns_and_advantages(double gamma, double lambda) {
  returns.clear();
  advantages.clear();
  returns.reserve(transitions.size());
  advantages.reserve(transitions.size());

  std::size_t start = 0;
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (!transitions[i].done) continue;

    const std::size_t len = i - start + 1;
    std::vector<double> rewards(len), values(len + 1, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      rewards[k] = transitions[start + k].reward;
      values[k] = transitions[start + k].value;
    }
    // terminal episode: bootstrap value 0
    auto g = discounted_returns(rewards, gamma);
    auto a = gae(rewards, values, gamma, lambda);
    returns.insert(returns.end(), g.begin(), g.end());
    advantages.insert(advantages.end(), a.begin(), a.end());
    start = i + 1;
  }
  if (start != transitions.size()) {
    throw LengthMismatchError("rollout ends mid-episode (missing done flag)");
  }
  advantages_normalized = false;
}

void RolloutBatch::normalize_advantages() {
  if (advantages.empty()) throw EmptyBatchError("no advantages to normalize");
  double mean = 0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  const double scale = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : advantages) a = (a - mean) * scale;
  advantages_normalized = true;
}

void PpoConfig::validate() const {
  if (gamma < 0 || gamma > 1) throw InvalidParamsError("gamma must be in [0,1]");
  if (lambda < 0 || lambda > 1) throw InvalidParamsError("lambda must be in [0,1]");
  if (clip_epsilon <= 0) throw InvalidParamsError("clip epsilon must be > 0");
  if (learning_rate <= 0) throw InvalidParamsError("learning rate must be > 0");
  if (epochs < 1) throw InvalidParamsError("epochs must be >= 1");
  if (value_coef < 0 || entropy_coef < 0) throw InvalidParamsError("loss coefficients must be >= 0");
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

LossResult ppo_loss(const RolloutBatch& batch, std::span<const std::size_t> indices,
                    const MlpParams& policy, const MlpParams& value, const PpoConfig& config) {
  if (indices.empty()) throw EmptyBatchError("ppo_loss over an empty sample set");
  if (batch.returns.size() != batch.size() || batch.advantages.size() != batch.size()) {
    throw LengthMismatchError("batch returns/advantages not computed");
  }

  LossResult out;
  out.policy_grad = GradientBuffer::zeros_like(policy);
  out.value_grad = GradientBuffer::zeros_like(value);
  out.stats.per_sample_surrogate.reserve(indices.size());

  const double inv_n = 1.0 / static_cast<double>(indices.size());
  double surrogate_sum = 0, mse_sum = 0, entropy_sum = 0, ratio_sum = 0;
  std::size_t clipped_count = 0;

  std::vector<double> d_scores;
  for (std::size_t idx : indices) {
    const Transition& t = batch.transitions[idx];
    const double adv = batch.advantages[idx];
    const double ret = batch.returns[idx];

    auto fwd = policy_forward(policy, t.observation, true);
    const double logp_new = std::log(fwd.probs[t.action]);
    const double ratio = std::exp(logp_new - t.logp_old);

    const double unclipped = ratio * adv;
    const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
    const double clipped = clipped_ratio * adv;
    const double surrogate = std::min(unclipped, clipped);

    // d surrogate / d ratio: the unclipped branch when it is the min (ties
    // included); otherwise zero because the clamp is flat outside the band
    double dsurr_dratio = 0.0;
    if (unclipped <= clipped) {
      dsurr_dratio = adv;
    } else if (ratio > 1.0 - config.clip_epsilon && ratio < 1.0 + config.clip_epsilon) {
      dsurr_dratio = adv;  // clamp is identity inside the band
    }
    const double dsurr_dlogp = dsurr_dratio * ratio;

    const double ent = entropy(fwd);

    auto dlogp = grad_log_prob_scores(fwd, t.action);
    d_scores.assign(fwd.probs.size(), 0.0);
    const double logp_coeff = dsurr_dlogp * inv_n;
    for (std::size_t j = 0; j < d_scores.size(); ++j) d_scores[j] = logp_coeff * dlogp[j];
    if (config.entropy_coef != 0.0) {
      auto dent = grad_entropy_scores(fwd);
      const double ent_coeff = config.entropy_coef * inv_n;
      for (std::size_t j = 0; j < d_scores.size(); ++j) d_scores[j] += ent_coeff * dent[j];
    }
    policy_backward(policy, t.observation, fwd, d_scores, out.policy_grad);

    auto vf = value_forward(value, t.observation, true);
    const double verr = vf.value - ret;
    // objective term is -c_v * (V-G)^2, so dJ/dV = -2 c_v (V-G)
    value_backward(value, t.observation, vf, -2.0 * config.value_coef * verr * inv_n,
                   out.value_grad);

    surrogate_sum += surrogate;
    mse_sum += verr * verr;
    entropy_sum += ent;
    ratio_sum += ratio;
    if (std::fabs(ratio - 1.0) > config.clip_epsilon) ++clipped_count;
    out.stats.per_sample_surrogate.push_back(surrogate);
  }

  auto& s = out.stats;
  s.policy_loss = -surrogate_sum * inv_n;
  s.value_loss = mse_sum * inv_n;
  s.entropy = entropy_sum * inv_n;
  s.total_loss = s.policy_loss + config.value_coef * s.value_loss - config.entropy_coef * s.entropy;
  s.mean_ratio = ratio_sum * inv_n;
  s.clip_fraction = static_cast<double>(clipped_count) * inv_n;

  if (!std::isfinite(s.total_loss) || !out.policy_grad.finite() || !out.value_grad.finite()) {
    throw NonFiniteLossError("non-finite PPO loss or gradient (divergence)");
  }
  return out;
}

LossResult ppo_loss(const RolloutBatch& batch, const MlpParams& policy, const MlpParams& value,
                    const PpoConfig& config) {
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return ppo_loss(batch, all, policy, value, config);
}

Optimizer::Optimizer(const PpoConfig& config) : lr_(config.learning_rate), adam_(config.adam) {}

void Optimizer::step(MlpParams& params, const GradientBuffer& grad, Slot& slot) {
  if (!adam_) {
    axpy_params(params, lr_, grad);
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (!slot.initialized) {
    slot.m = GradientBuffer::zeros_like(params);
    slot.v = GradientBuffer::zeros_like(params);
    slot.initialized = true;
  }
  ++slot.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(slot.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(slot.t));
  for (std::size_t l = 0; l < slot.m.dw.size(); ++l) {
    auto ascend = [&](double& m, double& v, double g, double& theta) {
      m = beta1 * m + (1 - beta1) * g;
      v = beta2 * v + (1 - beta2) * g * g;
      theta += lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps);
    };
    auto& layer = params.layers[l];
    for (std::size_t i = 0; i < layer.w.a.size(); ++i) {
      ascend(slot.m.dw[l].a[i], slot.v.dw[l].a[i], grad.dw[l].a[i], layer.w.a[i]);
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      ascend(slot.m.db[l][i], slot.v.db[l][i], grad.db[l][i], layer.b[i]);
    }
  }
}

void Optimizer::step_policy(MlpParams& params, const GradientBuffer& grad) {
  step(params, grad, policy_slot_);
}

void Optimizer::step_value(MlpParams& params, const GradientBuffer& grad) {
  step(params, grad, value_slot_);
}

UpdateStats ppo_update(MlpParams& policy, MlpParams& value, RolloutBatch& batch,
                       const PpoConfig& config, Rng& rng, Optimizer& optimizer) {
  config.validate();
  if (batch.size() == 0) throw EmptyBatchError("ppo_update on an empty batch");
  if (config.normalize_advantages && !batch.advantages_normalized) batch.normalize_advantages();

  const MlpParams policy_backup = policy;
  const MlpParams value_backup = value;

  UpdateStats agg;
  std::size_t steps = 0;
  try {
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t mb =
        config.minibatch_size == 0 ? batch.size() : std::min(config.minibatch_size, batch.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      shuffle(order, rng);
      for (std::size_t start = 0; start < order.size(); start += mb) {
        const std::size_t end = std::min(start + mb, order.size());
        std::span<const std::size_t> chunk(order.data() + start, end - start);
        auto loss = ppo_loss(batch, chunk, policy, value, config);
        optimizer.step_policy(policy, loss.policy_grad);
        optimizer.step_value(value, loss.value_grad);

        agg.policy_loss += loss.stats.policy_loss;
        agg.value_loss += loss.stats.value_loss;
        agg.entropy += loss.stats.entropy;
        agg.mean_ratio += loss.stats.mean_ratio;
        agg.clip_fraction += loss.stats.clip_fraction;
        ++steps;
      }
    }
  } catch (const NonFiniteLossError&) {
    policy = policy_backup;
    value = value_backup;
    throw;
  }

  const double inv = 1.0 / static_cast<double>(steps);
  agg.policy_loss *= inv;
  agg.value_loss *= inv;
  agg.entropy *= inv;
  agg.mean_ratio *= inv;
  agg.clip_fraction *= inv;
  return agg;
}

EnvConfig make_env_config(int total_nodes, int window, bool backfill, Goal goal,
                          int procs_per_node) {
  EnvConfig env;
  env.sim.total_nodes = total_nodes;
  env.sim.procs_per_node = procs_per_node;
  env.sim.window = window;
  env.sim.backfill = backfill;
  env.features.window = window;
  env.features.max_procs = static_cast<double>(total_nodes) * procs_per_node;
  env.goal = goal;
  return env;
}

namespace {

std::size_t sample_action(const PolicyForward& fwd, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_valid = 0;
  for (std::size_t i = 0; i < fwd.probs.size(); ++i) {
    if (fwd.probs[i] <= 0.0) continue;
    last_valid = i;
    cum += fwd.probs[i];
    if (u < cum) return i;
  }
  return last_valid;  // numerical tail
}

}  // namespace

void collect_rollout(const MlpParams& policy, const MlpParams& value,
                     std::span<const JobSequence> sequences, const EnvConfig& env, Rng& rng,
                     RolloutBatch& out) {
  if (sequences.empty()) throw EmptyBatchError("collect_rollout with no sequences");
  const RewardFn reward = make_reward(env.goal);

  for (const auto& seq : sequences) {
    Cluster cluster(seq, env.sim);
    const std::size_t episode_start = out.transitions.size();

    while (auto dp = cluster.next_decision()) {
      Transition t;
      t.observation = featurize(*dp, env.features);
      auto fwd = policy_forward(policy, t.observation);
      t.action = sample_action(fwd, rng);
      t.logp_old = std::log(fwd.probs[t.action]);
      t.value = value_forward(value, t.observation).value;
      t.reward = 0.0;
      t.done = false;
      cluster.apply_action(t.action);
      out.transitions.push_back(std::move(t));
    }

    if (out.transitions.size() == episode_start) {
      throw EmptyBatchError("episode produced no decisions");
    }
    const double terminal = reward(cluster.result());
    out.transitions.back().reward = terminal;
    out.transitions.back().done = true;
    out.episode_rewards.push_back(terminal);
  }
}

SchedulerFn make_policy_scheduler(MlpParams policy, FeatureConfig features) {
  return [policy = std::move(policy), features](const DecisionPoint& dp) -> std::size_t {
    auto slots = featurize(dp, features);
    auto fwd = policy_forward(policy, slots);
    std::size_t best = 0;
    double best_p = -1.0;
    for (std::size_t i = 0; i < fwd.probs.size(); ++i) {
      if (fwd.probs[i] > best_p) {
        best_p = fwd.probs[i];
        best = i;
      }
    }
    return best;
  };
}

}  // namespace schedforge
