#include "schedforge/ddppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>

#include <json.hpp>

#include "schedforge/errors.hpp"

namespace schedforge {

void SyncConfig::validate() const {
  if (num_workers < 1) throw InvalidParamsError("num_workers must be >= 1");
  if (sync_interval < 1) throw InvalidParamsError("sync_interval must be >= 1");
}

void PbtConfig::validate() const {
  if (population < 2) throw InvalidParamsError("pbt population must be >= 2");
  if (quantile <= 0 || quantile >= 1) throw InvalidParamsError("pbt quantile must be in (0,1)");
  if (perturb_factors.empty()) throw InvalidParamsError("pbt perturb factor set is empty");
  if (exploit_cadence < 1) throw InvalidParamsError("pbt exploit cadence must be >= 1");
}

void TuneSpec::validate() const {
  if (trials < 1) throw InvalidParamsError("tune needs trials >= 1");
  if (trial_iterations < 1) throw InvalidParamsError("tune trial_iterations must be >= 1");
  if (lr_range.first <= 0 || lr_range.second < lr_range.first) {
    throw InvalidParamsError("tune lr range must be positive and ordered");
  }
  if (clip_range.first <= 0 || clip_range.second < clip_range.first) {
    throw InvalidParamsError("tune clip range must be positive and ordered");
  }
  if (entropy_choices.empty() || epochs_choices.empty()) {
    throw InvalidParamsError("tune choice sets must be nonempty");
  }
}

void sync_update(MlpParams& policy, MlpParams& value,
                 std::span<const std::optional<NetGradients>> gradients, const SyncConfig& config,
                 Optimizer& optimizer) {
  std::optional<NetGradients> total;
  int contributors = 0;
  for (const auto& g : gradients) {  // fixed worker-id order
    if (!g) continue;
    ++contributors;
    if (!total) {
      total = *g;
    } else {
      total->policy.add(g->policy);
      total->value.add(g->value);
    }
  }
  if (!total) throw NoGradientsError("sync_update with no successful gradients");

  if (config.aggregation == SyncConfig::Aggregation::mean && contributors > 1) {
    total->policy.scale(1.0 / contributors);
    total->value.scale(1.0 / contributors);
  }
  optimizer.step_policy(policy, total->policy);
  optimizer.step_value(value, total->value);
}

std::uint64_t worker_stream_seed(std::uint64_t master_seed, int worker_id) {
  Rng base(master_seed);
  return base.split(static_cast<std::uint64_t>(worker_id) + 1).next_u64();
}

std::vector<JobSequence> draw_training_sequences(const WorkloadTrace& trace, std::size_t episodes,
                                                 std::size_t length, bool fixed, Rng& rng) {
  if (length == 0 || length > trace.jobs.size()) {
    throw OutOfRangeError("training sequence length " + std::to_string(length) +
                          " exceeds trace of " + std::to_string(trace.jobs.size()) + " jobs");
  }
  std::vector<JobSequence> out;
  out.reserve(episodes);
  const std::size_t max_start = trace.jobs.size() - length;
  for (std::size_t i = 0; i < episodes; ++i) {
    const std::size_t start = fixed ? 0 : rng.pick_index(max_start + 1);
    out.push_back(slice_sequence(trace, start, length));
  }
  return out;
}

NetGradients local_gradient(WorkerState& worker, const EnvConfig& env, const PpoConfig& ppo) {
  worker.batch = RolloutBatch{};
  collect_rollout(worker.policy, worker.value, worker.shard, env, worker.rng, worker.batch);
  worker.batch.compute_returns_and_advantages(ppo.gamma, ppo.lambda);
  if (ppo.normalize_advantages) worker.batch.normalize_advantages();
  auto loss = ppo_loss(worker.batch, worker.policy, worker.value, ppo);
  return {std::move(loss.policy_grad), std::move(loss.value_grad)};
}

namespace {

struct ChunkPlan {
  std::vector<std::size_t> order;
  std::size_t minibatch = 0;
  std::size_t chunks = 0;
};

struct StepOutcome {
  std::optional<NetGradients> grads;
  LossStats stats;
  bool computed = false;
};

// Core synchronized loop shared by plain training and every PBT member.
class DistributedLoop {
 public:
  DistributedLoop(const TrainConfig& cfg, MlpParams policy, MlpParams value,
                  std::vector<WorkerState>* workers)
      : cfg_(cfg), policy_(std::move(policy)), value_(std::move(value)), workers_(workers) {}

  // one training iteration; returns stats or throws when all workers fail
  IterationStats iterate(int iteration_index, Optimizer& optimizer) {
    const auto t0 = std::chrono::steady_clock::now();
    auto& workers = *workers_;
    const int n = static_cast<int>(workers.size());

    std::vector<char> failed(static_cast<std::size_t>(n), 0);

    // -- parallel experience collection --
    run_parallel([&](int i) {
      auto& w = workers[static_cast<std::size_t>(i)];
      try {
        w.shard = draw_training_sequences(cfg_.trace, static_cast<std::size_t>(cfg_.episodes_per_worker),
                                          cfg_.sequence_length, cfg_.fixed_sequence, w.rng);
        w.batch = RolloutBatch{};
        collect_rollout(w.policy, w.value, w.shard, cfg_.env, w.rng, w.batch);
        w.batch.compute_returns_and_advantages(cfg_.ppo.gamma, cfg_.ppo.lambda);
        if (cfg_.ppo.normalize_advantages) w.batch.normalize_advantages();
      } catch (const Error&) {
        failed[static_cast<std::size_t>(i)] = 1;
      }
    });
    if (std::all_of(failed.begin(), failed.end(), [](char f) { return f != 0; })) {
      throw Error("iteration " + std::to_string(iteration_index) + ": all workers failed");
    }

    // -- synchronized optimization --
    UpdateStats agg;
    std::size_t stat_steps = 0;
    std::vector<ChunkPlan> plans(static_cast<std::size_t>(n));
    std::vector<Optimizer*> local_opts;  // only used when sync_interval > 1
    std::vector<Optimizer> local_storage;
    if (cfg_.sync.sync_interval > 1) {
      local_storage.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) local_storage.emplace_back(cfg_.ppo);
      for (auto& o : local_storage) local_opts.push_back(&o);
    }

    int pending_local = 0;
    for (int epoch = 0; epoch < cfg_.ppo.epochs; ++epoch) {
      std::size_t max_chunks = 0;
      for (int i = 0; i < n; ++i) {
        auto& plan = plans[static_cast<std::size_t>(i)];
        auto& w = workers[static_cast<std::size_t>(i)];
        if (failed[static_cast<std::size_t>(i)] || w.batch.size() == 0) {
          plan.chunks = 0;
          continue;
        }
        plan.order.resize(w.batch.size());
        std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
        shuffle(plan.order, w.rng);
        plan.minibatch = cfg_.ppo.minibatch_size == 0
                             ? w.batch.size()
                             : std::min(cfg_.ppo.minibatch_size, w.batch.size());
        plan.chunks = (w.batch.size() + plan.minibatch - 1) / plan.minibatch;
        max_chunks = std::max(max_chunks, plan.chunks);
      }

      for (std::size_t step = 0; step < max_chunks; ++step) {
        std::vector<StepOutcome> outcomes(static_cast<std::size_t>(n));
        run_parallel([&](int i) {
          auto& plan = plans[static_cast<std::size_t>(i)];
          if (failed[static_cast<std::size_t>(i)] || step >= plan.chunks) return;
          auto& w = workers[static_cast<std::size_t>(i)];
          const std::size_t lo = step * plan.minibatch;
          const std::size_t hi = std::min(lo + plan.minibatch, plan.order.size());
          std::span<const std::size_t> chunk(plan.order.data() + lo, hi - lo);
          try {
            auto loss = ppo_loss(w.batch, chunk, w.policy, w.value, cfg_.ppo);
            outcomes[static_cast<std::size_t>(i)].grads =
                NetGradients{std::move(loss.policy_grad), std::move(loss.value_grad)};
            outcomes[static_cast<std::size_t>(i)].stats = loss.stats;
            outcomes[static_cast<std::size_t>(i)].computed = true;
          } catch (const Error&) {
            failed[static_cast<std::size_t>(i)] = 1;  // skip-and-log policy
          }
        });

        std::vector<std::optional<NetGradients>> grads(static_cast<std::size_t>(n));
        bool any = false;
        for (int i = 0; i < n; ++i) {
          auto& o = outcomes[static_cast<std::size_t>(i)];
          if (!o.computed) continue;
          any = true;
          grads[static_cast<std::size_t>(i)] = std::move(o.grads);
          agg.policy_loss += o.stats.policy_loss;
          agg.value_loss += o.stats.value_loss;
          agg.entropy += o.stats.entropy;
          agg.mean_ratio += o.stats.mean_ratio;
          agg.clip_fraction += o.stats.clip_fraction;
          ++stat_steps;
        }
        if (!any) {
          if (std::all_of(failed.begin(), failed.end(), [](char f) { return f != 0; })) {
            throw Error("iteration " + std::to_string(iteration_index) + ": all workers failed");
          }
          continue;
        }

        if (cfg_.sync.sync_interval == 1) {
          sync_update(policy_, value_, grads, cfg_.sync, optimizer);
          broadcast();
        } else {
          // local steps, parameter average at the barrier
          for (int i = 0; i < n; ++i) {
            if (!grads[static_cast<std::size_t>(i)]) continue;
            auto& w = workers[static_cast<std::size_t>(i)];
            local_opts[static_cast<std::size_t>(i)]->step_policy(w.policy,
                                                                 grads[static_cast<std::size_t>(i)]->policy);
            local_opts[static_cast<std::size_t>(i)]->step_value(w.value,
                                                                grads[static_cast<std::size_t>(i)]->value);
          }
          ++pending_local;
          const bool last_step = epoch + 1 == cfg_.ppo.epochs && step + 1 == max_chunks;
          if (pending_local >= cfg_.sync.sync_interval || last_step) {
            average_worker_params(failed);
            broadcast();
            pending_local = 0;
          }
        }
      }
    }

    if (stat_steps > 0) {
      const double inv = 1.0 / static_cast<double>(stat_steps);
      agg.policy_loss *= inv;
      agg.value_loss *= inv;
      agg.entropy *= inv;
      agg.mean_ratio *= inv;
      agg.clip_fraction *= inv;
    }

    IterationStats stats;
    stats.iteration = iteration_index;
    stats.update = agg;
    double reward_sum = 0;
    std::size_t reward_count = 0;
    for (int i = 0; i < n; ++i) {
      if (failed[static_cast<std::size_t>(i)]) continue;
      for (double r : workers[static_cast<std::size_t>(i)].batch.episode_rewards) {
        reward_sum += r;
        ++reward_count;
      }
    }
    stats.episode_reward_mean = reward_count > 0 ? reward_sum / static_cast<double>(reward_count) : 0.0;
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  const MlpParams& policy() const { return policy_; }
  const MlpParams& value() const { return value_; }
  void set_params(const MlpParams& p, const MlpParams& v) {
    policy_ = p;
    value_ = v;
    broadcast();
  }

 private:
  void broadcast() {
    for (auto& w : *workers_) {
      w.policy = policy_;
      w.value = value_;
    }
    // post-barrier consistency: all workers bitwise identical
    for (auto& w : *workers_) {
      if (!params_equal(w.policy, policy_) || !params_equal(w.value, value_)) {
        throw InvariantViolation("worker parameters diverged after barrier");
      }
    }
  }

  void average_worker_params(const std::vector<char>& failed) {
    auto& workers = *workers_;
    int contributors = 0;
    for (std::size_t i = 0; i < workers.size(); ++i) {
      if (failed[i]) continue;
      ++contributors;
    }
    if (contributors == 0) throw NoGradientsError("parameter average with no live workers");

    auto average_into = [&](auto member) {
      MlpParams avg = policy_;  // shape template, overwritten below
      bool first = true;
      for (std::size_t i = 0; i < workers.size(); ++i) {
        if (failed[i]) continue;
        const MlpParams& p = workers[i].*member;
        if (first) {
          avg = p;
          first = false;
        } else {
          for (std::size_t l = 0; l < avg.layers.size(); ++l) {
            for (std::size_t k = 0; k < avg.layers[l].w.a.size(); ++k) {
              avg.layers[l].w.a[k] += p.layers[l].w.a[k];
            }
            for (std::size_t k = 0; k < avg.layers[l].b.size(); ++k) {
              avg.layers[l].b[k] += p.layers[l].b[k];
            }
          }
        }
      }
      const double inv = 1.0 / contributors;
      for (auto& l : avg.layers) {
        for (double& v : l.w.a) v *= inv;
        for (double& v : l.b) v *= inv;
      }
      return avg;
    };
    policy_ = average_into(&WorkerState::policy);
    value_ = average_into(&WorkerState::value);
  }

  template <typename F>
  void run_parallel(F&& task) {
    const int n = static_cast<int>(workers_->size());
    if (n == 1) {
      task(0);
      return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      futures.push_back(std::async(std::launch::async, [&task, i]() { task(i); }));
    }
    for (auto& f : futures) f.get();
  }

  const TrainConfig& cfg_;
  MlpParams policy_;
  MlpParams value_;
  std::vector<WorkerState>* workers_;
};

std::vector<WorkerState> make_workers(const TrainConfig& cfg, const MlpParams& policy,
                                      const MlpParams& value, std::uint64_t stream_salt) {
  std::vector<WorkerState> workers(static_cast<std::size_t>(cfg.sync.num_workers));
  for (int i = 0; i < cfg.sync.num_workers; ++i) {
    auto& w = workers[static_cast<std::size_t>(i)];
    w.worker_id = i;
    w.policy = policy;
    w.value = value;
    w.rng = Rng(worker_stream_seed(cfg.seed + stream_salt, i));
  }
  return workers;
}

nlohmann::json manifest_json(const TrainConfig& cfg, double final_reward, int iterations_run) {
  nlohmann::json m;
  m["kind"] = "train";
  m["seed"] = cfg.seed;
  m["iterations"] = iterations_run;
  m["workers"] = cfg.sync.num_workers;
  m["sync_interval"] = cfg.sync.sync_interval;
  m["aggregation"] = cfg.sync.aggregation == SyncConfig::Aggregation::mean ? "mean" : "sum";
  m["episodes_per_worker"] = cfg.episodes_per_worker;
  m["sequence_length"] = cfg.sequence_length;
  m["fixed_sequence"] = cfg.fixed_sequence;
  m["goal"] = goal_name(cfg.env.goal);
  m["nodes"] = cfg.env.sim.total_nodes;
  m["window"] = cfg.env.sim.window;
  m["backfill"] = cfg.env.sim.backfill;
  m["pbt"] = cfg.use_pbt;
  m["ppo"] = {{"gamma", cfg.ppo.gamma},
              {"lambda", cfg.ppo.lambda},
              {"clip_epsilon", cfg.ppo.clip_epsilon},
              {"learning_rate", cfg.ppo.learning_rate},
              {"epochs", cfg.ppo.epochs},
              {"minibatch_size", cfg.ppo.minibatch_size},
              {"value_coef", cfg.ppo.value_coef},
              {"entropy_coef", cfg.ppo.entropy_coef},
              {"normalize_advantages", cfg.ppo.normalize_advantages},
              {"adam", cfg.ppo.adam}};
  m["final_reward_mean"] = final_reward;
  return m;
}

void write_checkpoint_files(const TrainConfig& cfg, const MlpParams& policy, const MlpParams& value,
                            const std::vector<IterationStats>& curve, const std::string& manifest) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  {
    std::ofstream log(fs::path(cfg.out_dir) / "training_log.jsonl");
    for (const auto& it : curve) {
      nlohmann::json line;
      line["iteration"] = it.iteration;
      line["episode_reward_mean"] = it.episode_reward_mean;
      line["policy_loss"] = it.update.policy_loss;
      line["value_loss"] = it.update.value_loss;
      line["entropy"] = it.update.entropy;
      line["clip_fraction"] = it.update.clip_fraction;
      line["wall_time_s"] = it.wall_time_s;
      log << line.dump() << '\n';
    }
  }
  {
    std::ofstream mf(fs::path(cfg.out_dir) / "manifest.json");
    mf << manifest << '\n';
  }
  Checkpoint ckpt;
  ckpt.policy = policy;
  ckpt.value = value;
  nlohmann::json meta;
  meta["iteration"] = curve.empty() ? 0 : curve.back().iteration;
  meta["episode_reward_mean"] = curve.empty() ? 0.0 : curve.back().episode_reward_mean;
  meta["seed"] = cfg.seed;
  meta["goal"] = goal_name(cfg.env.goal);
  meta["window"] = cfg.env.sim.window;
  ckpt.meta_json = meta.dump();
  save_checkpoint((fs::path(cfg.out_dir) / "checkpoint_final.json").string(), ckpt);
}

TrainResult train_plain(const TrainConfig& cfg, const MlpParams& policy0, const MlpParams& value0) {
  auto workers = make_workers(cfg, policy0, value0, 0);
  DistributedLoop loop(cfg, policy0, value0, &workers);
  Optimizer optimizer(cfg.ppo);

  TrainResult result;
  result.resolved_ppo = cfg.ppo;
  namespace fs = std::filesystem;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    result.curve.push_back(loop.iterate(iter, optimizer));
    if (!cfg.out_dir.empty() && cfg.checkpoint_interval > 0 && iter % cfg.checkpoint_interval == 0) {
      fs::create_directories(cfg.out_dir);
      Checkpoint ckpt;
      ckpt.policy = loop.policy();
      ckpt.value = loop.value();
      nlohmann::json meta;
      meta["iteration"] = iter;
      meta["episode_reward_mean"] = result.curve.back().episode_reward_mean;
      ckpt.meta_json = meta.dump();
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt_%06d.json", iter);
      save_checkpoint((fs::path(cfg.out_dir) / name).string(), ckpt);
    }
  }
  result.policy = loop.policy();
  result.value = loop.value();
  return result;
}

TrainResult train_pbt(const TrainConfig& cfg, const MlpParams& policy0, const MlpParams& value0) {
  cfg.pbt.validate();
  const int population = cfg.pbt.population;

  std::vector<PbtMember> members(static_cast<std::size_t>(population));
  std::vector<std::vector<WorkerState>> member_workers(static_cast<std::size_t>(population));
  Rng pbt_rng(Rng(cfg.seed).split(0x9bd).next_u64());

  for (int m = 0; m < population; ++m) {
    auto& member = members[static_cast<std::size_t>(m)];
    member.member_id = m;
    member.hyper = cfg.ppo;
    if (m > 0) {
      // spread the initial population across the explore factors
      const double f = cfg.pbt.perturb_factors[static_cast<std::size_t>(m) %
                                               cfg.pbt.perturb_factors.size()];
      member.hyper.learning_rate *= f;
    }
    member.policy = policy0;
    member.value = value0;
    member_workers[static_cast<std::size_t>(m)] =
        make_workers(cfg, member.policy, member.value, 0x1000 + static_cast<std::uint64_t>(m));
  }

  TrainResult result;
  int iter = 0;
  while (iter < cfg.iterations) {
    const int round_len = std::min(cfg.pbt.exploit_cadence, cfg.iterations - iter);

    int best_m = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<IterationStats>> round_stats(static_cast<std::size_t>(population));
    for (int m = 0; m < population; ++m) {
      auto& member = members[static_cast<std::size_t>(m)];
      TrainConfig member_cfg = cfg;
      member_cfg.ppo = member.hyper;
      DistributedLoop loop(member_cfg, member.policy, member.value,
                           &member_workers[static_cast<std::size_t>(m)]);
      loop.set_params(member.policy, member.value);
      Optimizer optimizer(member.hyper);
      double score_sum = 0;
      for (int k = 0; k < round_len; ++k) {
        auto stats = loop.iterate(iter + k + 1, optimizer);
        score_sum += stats.episode_reward_mean;
        round_stats[static_cast<std::size_t>(m)].push_back(stats);
      }
      member.policy = loop.policy();
      member.value = loop.value();
      member.score = score_sum / round_len;
      member.scored = true;
      if (member.score > best_score) {
        best_score = member.score;
        best_m = m;
      }
    }
    result.curve.insert(result.curve.end(), round_stats[static_cast<std::size_t>(best_m)].begin(),
                        round_stats[static_cast<std::size_t>(best_m)].end());

    iter += round_len;
    if (iter < cfg.iterations) {
      pbt_step(members, cfg.pbt, pbt_rng);
      // exploited members restart from the donor checkpoint
      for (int m = 0; m < population; ++m) {
        auto& w = member_workers[static_cast<std::size_t>(m)];
        for (auto& ws : w) {
          ws.policy = members[static_cast<std::size_t>(m)].policy;
          ws.value = members[static_cast<std::size_t>(m)].value;
        }
      }
    }
  }

  const auto best = std::max_element(members.begin(), members.end(),
                                     [](const PbtMember& a, const PbtMember& b) {
                                       return a.score < b.score;
                                     });
  result.policy = best->policy;
  result.value = best->value;
  result.resolved_ppo = best->hyper;
  return result;
}

}  // namespace

void pbt_step(std::vector<PbtMember>& population, const PbtConfig& config, Rng& rng) {
  if (population.size() < 2) throw InvalidParamsError("pbt_step needs a population of >= 2");
  for (const auto& m : population) {
    if (!m.scored || !std::isfinite(m.score)) {
      throw UnscoredMemberError("pbt_step on member " + std::to_string(m.member_id) +
                                " without a finite score");
    }
  }

  std::vector<double> scores;
  scores.reserve(population.size());
  for (const auto& m : population) scores.push_back(m.score);
  const double q_low = quantile(scores, config.quantile);
  const double q_high = quantile(scores, 1.0 - config.quantile);

  std::vector<std::size_t> donors;
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (population[i].score >= q_high) donors.push_back(i);
  }

  for (std::size_t i = 0; i < population.size(); ++i) {
    auto& m = population[i];
    if (!(m.score < q_low)) continue;  // strict: equal scores replace nobody
    const auto& donor = population[donors[rng.pick_index(donors.size())]];
    m.policy = donor.policy;
    m.value = donor.value;
    m.hyper = donor.hyper;
    // explore: each copied hyperparameter gets an independent factor
    auto factor = [&rng, &config]() {
      return config.perturb_factors[rng.pick_index(config.perturb_factors.size())];
    };
    m.hyper.learning_rate *= factor();
    m.hyper.clip_epsilon *= factor();
    m.hyper.entropy_coef *= factor();
  }
}

TrainResult train(const TrainConfig& cfg) {
  cfg.ppo.validate();
  cfg.sync.validate();
  if (cfg.iterations < 0) throw InvalidParamsError("iterations must be >= 0");
  if (cfg.episodes_per_worker < 1) throw InvalidParamsError("episodes_per_worker must be >= 1");
  if (cfg.trace.jobs.empty()) throw EmptyTraceError("training trace is empty");

  const auto policy0 = init_params(NetTag::policy, kFeatureDim, cfg.seed);
  const auto value0 =
      init_params(NetTag::value, cfg.env.features.window * kFeatureDim, cfg.seed + 1);

  TrainResult result;
  if (cfg.iterations == 0) {
    result.policy = policy0;
    result.value = value0;
    result.resolved_ppo = cfg.ppo;
  } else if (cfg.use_pbt) {
    result = train_pbt(cfg, policy0, value0);
  } else {
    result = train_plain(cfg, policy0, value0);
  }

  const double final_reward = result.curve.empty() ? 0.0 : result.curve.back().episode_reward_mean;
  result.manifest_json = manifest_json(cfg, final_reward, cfg.iterations).dump(2);
  if (!cfg.out_dir.empty()) {
    write_checkpoint_files(cfg, result.policy, result.value, result.curve, result.manifest_json);
  }
  return result;
}

TuneResult tune(const TuneSpec& spec, const TrainConfig& base) {
  spec.validate();
  Rng rng(spec.seed);

  TuneResult result;
  bool have_best = false;
  for (int t = 0; t < spec.trials; ++t) {
    TuneTrial trial;
    trial.index = t;
    trial.config = base.ppo;
    // log-uniform learning rate, uniform clip, choice sets for the rest
    const double lg =
        rng.uniform(std::log(spec.lr_range.first), std::log(spec.lr_range.second));
    trial.config.learning_rate = std::exp(lg);
    trial.config.clip_epsilon = rng.uniform(spec.clip_range.first, spec.clip_range.second);
    trial.config.entropy_coef = spec.entropy_choices[rng.pick_index(spec.entropy_choices.size())];
    trial.config.epochs = spec.epochs_choices[rng.pick_index(spec.epochs_choices.size())];

    TrainConfig trial_cfg = base;
    trial_cfg.ppo = trial.config;
    trial_cfg.iterations = spec.trial_iterations;
    trial_cfg.out_dir.clear();
    trial_cfg.use_pbt = false;
    trial_cfg.seed = base.seed + 0x7000 + static_cast<std::uint64_t>(t);

    try {
      auto train_result = train(trial_cfg);
      const auto& curve = train_result.curve;
      const std::size_t tail = std::min<std::size_t>(5, curve.size());
      double sum = 0;
      for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) {
        sum += curve[i].episode_reward_mean;
      }
      trial.score = tail > 0 ? sum / static_cast<double>(tail) : 0.0;
      if (!std::isfinite(trial.score)) throw NonFiniteLossError("non-finite trial score");
    } catch (const Error&) {
      trial.failed = true;
      trial.score = -std::numeric_limits<double>::infinity();
    }

    if (!trial.failed && (!have_best || trial.score > result.best_score)) {
      result.best = trial.config;
      result.best_score = trial.score;
      have_best = true;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!have_best) throw AllTrialsFailedError("every tuning trial failed");

  nlohmann::json ledger = nlohmann::json::array();
  for (const auto& t : result.trials) {
    ledger.push_back({{"trial", t.index},
                      {"learning_rate", t.config.learning_rate},
                      {"clip_epsilon", t.config.clip_epsilon},
                      {"entropy_coef", t.config.entropy_coef},
                      {"epochs", t.config.epochs},
                      {"score", t.failed ? nlohmann::json() : nlohmann::json(t.score)},
                      {"failed", t.failed}});
  }
  result.ledger_json = ledger.dump(2);
  return result;
}

}  // namespace schedforge
