#include "schedforge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "schedforge/baselines.hpp"
#include "schedforge/ddppo.hpp"
#include "schedforge/errors.hpp"
#include "schedforge/metrics.hpp"
#include "schedforge/neural.hpp"
#include "schedforge/rl.hpp"
#include "schedforge/simulator.hpp"
#include "schedforge/workload.hpp"

namespace schedforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

SynthesisParams synth_from_json(const json& j, std::uint64_t* seed) {
  SynthesisParams p;
  p.jobs = j.value("jobs", std::size_t{1000});
  p.nodes = j.value("nodes", 256);
  p.mean_interarrival = j.value("mean_interarrival", 300.0);
  p.runtime_min = j.value("runtime_min", std::int64_t{60});
  p.runtime_max = j.value("runtime_max", std::int64_t{3600});
  p.walltime_factor = j.value("walltime_factor", 2.0);
  const std::string dist = j.value("size_distribution", "power_of_two");
  if (dist == "constant_one") {
    p.size_distribution = SizeDistribution::constant_one;
  } else if (dist == "uniform") {
    p.size_distribution = SizeDistribution::uniform;
  } else if (dist == "power_of_two") {
    p.size_distribution = SizeDistribution::power_of_two;
  } else {
    throw ConfigError("unknown size_distribution '" + dist + "'");
  }
  *seed = j.value("seed", std::uint64_t{1});
  return p;
}

WorkloadTrace load_dataset(const std::string& path, std::string* dataset_id) {
  if (dataset_id) *dataset_id = fs::path(path).stem().string();
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    auto j = read_json_file(path);
    if (!j.contains("synthetic")) {
      throw ConfigError("dataset JSON '" + path + "' lacks a \"synthetic\" block");
    }
    std::uint64_t seed = 1;
    auto p = synth_from_json(j.at("synthetic"), &seed);
    return synthesize_trace(p, seed);
  }
  return load_swf(path);
}

// A scheduler argument is a rule name or a checkpoint path.
struct ResolvedScheduler {
  std::string name;
  bool is_checkpoint = false;
  Checkpoint ckpt;
  Rule rule = Rule::fcfs;
};

ResolvedScheduler resolve_scheduler(const std::string& arg) {
  ResolvedScheduler r;
  if (auto rule = rule_from_name(arg)) {
    r.name = arg;
    r.rule = *rule;
    return r;
  }
  if (!fs::exists(arg)) {
    throw ConfigError("unknown scheduler '" + arg + "' (not a rule name or checkpoint file)");
  }
  r.is_checkpoint = true;
  r.ckpt = load_checkpoint(arg);
  r.name = fs::path(arg).stem().string();
  return r;
}

SchedulerFn scheduler_fn(const ResolvedScheduler& r, const FeatureConfig& features,
                         std::uint64_t seed) {
  if (r.is_checkpoint) return make_policy_scheduler(r.ckpt.policy, features);
  return make_rule_scheduler(r.rule, seed);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e)) {
    return kExitConfigError;
  }
  return kExitDomainError;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDomainError;
  }
}

}  // namespace

int cmd_parse(const ParseArgs& args) {
  return guarded([&]() {
    auto trace = load_swf(args.path, args.strict ? ParseMode::strict : ParseMode::lenient);
    auto stats = trace_statistics(trace);

    std::printf("parsed %zu jobs from %s\n", trace.jobs.size(), args.path.c_str());
    std::printf("  skipped lines:    %zu\n", trace.skipped_lines);
    std::printf("  remapped procs:   %zu\n", trace.remapped_procs);
    std::printf("  node count:       %d\n", stats.node_count);
    std::printf("  runtime median:   %s s\n", format_double(stats.runtime_quantiles[2]).c_str());

    if (args.json_to_stdout) std::printf("%s\n", stats_to_json(stats).c_str());
    if (!args.json_out.empty()) write_text(args.json_out, stats_to_json(stats) + "\n");
    if (!args.csv_out.empty()) write_text(args.csv_out, stats_to_csv(stats));
    if (!args.emit_path.empty()) write_text(args.emit_path, serialize_swf(trace));
    return kExitOk;
  });
}

int cmd_simulate(const SimulateArgs& args) {
  return guarded([&]() {
    std::string dataset_id;
    auto trace = load_dataset(args.dataset, &dataset_id);

    SimConfig sim;
    sim.total_nodes = args.nodes > 0 ? args.nodes : trace.node_count();
    sim.procs_per_node = trace.procs_per_node();
    sim.window = args.window;
    sim.backfill = args.backfill;
    if (!args.config_path.empty()) {
      auto j = read_json_file(args.config_path);
      sim.total_nodes = j.value("nodes", sim.total_nodes);
      sim.window = j.value("window", sim.window);
      sim.backfill = j.value("backfill", sim.backfill);
      for (const auto& pj : j.value("preload", json::array())) {
        sim.preload.push_back({pj.value("nodes", 0), pj.value("remaining", std::int64_t{0})});
      }
    }

    const std::size_t len = args.sequence_length == 0
                                ? trace.jobs.size() - args.start
                                : args.sequence_length;
    auto sequence = slice_sequence(trace, args.start, len);

    FeatureConfig features;
    features.window = sim.window;
    features.max_procs = static_cast<double>(sim.total_nodes) * sim.procs_per_node;
    auto resolved = resolve_scheduler(args.scheduler);
    auto result = run_episode(sequence, scheduler_fn(resolved, features, args.seed), sim);
    auto summary = summarize({result});

    std::printf("episode on %s (%zu jobs, %d nodes, scheduler %s)\n", dataset_id.c_str(),
                result.jobs.size(), sim.total_nodes, resolved.name.c_str());
    std::printf("  avg bounded slowdown: %s\n", format_double(summary.avg_bounded_slowdown).c_str());
    std::printf("  avg waiting time:     %s s\n", format_double(summary.avg_waiting_time).c_str());
    std::printf("  avg turnaround:       %s s\n", format_double(summary.avg_turnaround_time).c_str());
    std::printf("  utilization:          %s\n", format_double(summary.utilization).c_str());
    std::printf("  makespan:             %lld s\n", static_cast<long long>(result.makespan));

    if (!args.out_dir.empty()) {
      fs::create_directories(args.out_dir);
      json ep;
      ep["dataset"] = dataset_id;
      ep["scheduler"] = resolved.name;
      ep["total_nodes"] = result.total_nodes;
      ep["makespan"] = result.makespan;
      ep["dropped_jobs"] = result.dropped_jobs;
      ep["jobs"] = json::array();
      for (const auto& jb : result.jobs) {
        ep["jobs"].push_back({{"job_id", jb.job_id},
                              {"submit", jb.submit_time},
                              {"start", jb.start_time},
                              {"end", jb.end_time},
                              {"wait", jb.wait_time},
                              {"run", jb.run_time},
                              {"nodes", jb.nodes}});
      }
      write_text(fs::path(args.out_dir) / "episode.json", ep.dump(2) + "\n");

      std::string csv = "job_id,submit,start,end,wait,run,nodes\n";
      for (const auto& jb : result.jobs) {
        char row[160];
        std::snprintf(row, sizeof(row), "%lld,%lld,%lld,%lld,%lld,%lld,%d\n",
                      static_cast<long long>(jb.job_id), static_cast<long long>(jb.submit_time),
                      static_cast<long long>(jb.start_time), static_cast<long long>(jb.end_time),
                      static_cast<long long>(jb.wait_time), static_cast<long long>(jb.run_time),
                      jb.nodes);
        csv += row;
      }
      write_text(fs::path(args.out_dir) / "episode.csv", csv);
      write_text(fs::path(args.out_dir) / "metrics.json",
                 summary_to_json(summary, dataset_id, resolved.name, args.scheduler) + "\n");
    }
    return kExitOk;
  });
}

int cmd_evaluate(const EvaluateArgs& args) {
  return guarded([&]() {
    if (args.schedulers.empty()) throw ConfigError("evaluate needs at least one scheduler");
    if (args.iterations < 1) throw ConfigError("iterations must be >= 1");
    if (!goal_from_name(args.goal)) throw ConfigError("unknown goal '" + args.goal + "'");

    // resolve every scheduler before any run
    std::vector<ResolvedScheduler> resolved;
    for (const auto& s : args.schedulers) resolved.push_back(resolve_scheduler(s));

    std::string dataset_id;
    auto trace = load_dataset(args.dataset, &dataset_id);

    SimConfig sim;
    sim.total_nodes = args.nodes > 0 ? args.nodes : trace.node_count();
    sim.procs_per_node = trace.procs_per_node();
    sim.window = args.window;
    sim.backfill = args.backfill;
    FeatureConfig features;
    features.window = sim.window;
    features.max_procs = static_cast<double>(sim.total_nodes) * sim.procs_per_node;

    const auto n = static_cast<std::size_t>(args.iterations);
    std::vector<JobSequence> sequences =
        args.fixed_sequence
            ? std::vector<JobSequence>(n, slice_sequence(trace, 0, args.sequence_length))
            : sample_sequences(trace, n, args.sequence_length, args.seed);

    std::vector<std::uint64_t> hashes;
    for (const auto& s : sequences) hashes.push_back(sequence_hash(s));

    // every scheduler replays the identical sequences
    std::string raw_csv = "dataset,scheduler,metric,iteration,value\n";
    std::string summary_csv = "dataset,scheduler,goal,mean,std,median,q25,q75,min,max\n";
    json summaries = json::array();

    for (const auto& sched : resolved) {
      std::vector<EpisodeResult> results;
      auto fn = scheduler_fn(sched, features, args.seed);
      for (std::size_t i = 0; i < sequences.size(); ++i) {
        results.push_back(run_episode(sequences[i], fn, sim));
      }
      auto summary = summarize(results);
      summary_csv += summary_to_csv_rows(summary, dataset_id, sched.name);
      summaries.push_back(json::parse(summary_to_json(summary, dataset_id, sched.name, args.goal)));

      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        auto add = [&](const char* metric, double v) {
          raw_csv += dataset_id + "," + sched.name + "," + metric + "," + std::to_string(i) + "," +
                     format_double(v) + "\n";
        };
        add("bsld", episode_avg_bounded_slowdown(r));
        add("wait", episode_avg_waiting(r));
        add("turnaround", episode_avg_turnaround(r));
        add("util", utilization(r));
      }

      std::printf("%-12s bsld %10.3f +- %-10.3f wait %10.1f turnaround %10.1f util %.3f\n",
                  sched.name.c_str(), summary.avg_bounded_slowdown,
                  summary.bounded_slowdown_stats.std_dev, summary.avg_waiting_time,
                  summary.avg_turnaround_time, summary.utilization);
    }

    fs::create_directories(args.out_dir);
    json manifest;
    manifest["kind"] = "evaluate";
    manifest["dataset"] = dataset_id;
    manifest["goal"] = args.goal;
    manifest["iterations"] = args.iterations;
    manifest["sequence_length"] = args.sequence_length;
    manifest["seed"] = args.seed;
    manifest["fixed_sequence"] = args.fixed_sequence;
    manifest["nodes"] = sim.total_nodes;
    manifest["window"] = sim.window;
    manifest["backfill"] = sim.backfill;
    manifest["schedulers"] = json::array();
    for (const auto& s : resolved) manifest["schedulers"].push_back(s.name);
    manifest["sequence_hashes"] = json::array();
    for (auto h : hashes) {
      char hex[24];
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
      manifest["sequence_hashes"].push_back(hex);
    }
    write_text(fs::path(args.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    write_text(fs::path(args.out_dir) / "raw.csv", raw_csv);
    write_text(fs::path(args.out_dir) / "summary.csv", summary_csv);
    write_text(fs::path(args.out_dir) / "summary.json", summaries.dump(2) + "\n");
    return kExitOk;
  });
}

namespace {

struct TrainFileConfig {
  TrainConfig train;
  bool pbt_enabled = false;
  bool tune_enabled = false;
  TuneSpec tune_spec;
  std::string dataset_id;
};

TrainFileConfig load_train_config(const std::string& path) {
  auto j = read_json_file(path);
  TrainFileConfig out;

  WorkloadTrace trace;
  if (j.contains("synthetic")) {
    std::uint64_t seed = 1;
    auto p = synth_from_json(j.at("synthetic"), &seed);
    trace = synthesize_trace(p, seed);
    out.dataset_id = "synthetic";
  } else if (j.contains("dataset")) {
    trace = load_dataset(j.at("dataset").get<std::string>(), &out.dataset_id);
  } else {
    throw ConfigError("training config needs \"dataset\" or \"synthetic\"");
  }

  auto& cfg = out.train;
  cfg.trace = std::move(trace);
  const int nodes = j.value("nodes", cfg.trace.node_count());
  const int window = j.value("window", 32);
  const bool backfill = j.value("backfill", true);
  const std::string goal_str = j.value("goal", "bsld");
  auto goal = goal_from_name(goal_str);
  if (!goal) throw ConfigError("unknown goal '" + goal_str + "'");
  cfg.env = make_env_config(nodes, window, backfill, *goal, cfg.trace.procs_per_node());

  cfg.iterations = j.value("iterations", 100);
  cfg.episodes_per_worker = j.value("episodes_per_worker", 2);
  cfg.sequence_length = j.value("sequence_length", std::size_t{64});
  cfg.fixed_sequence = j.value("fixed_sequence", false);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.checkpoint_interval = j.value("checkpoint_interval", 0);
  cfg.out_dir = j.value("out", "train_out");
  cfg.sync.num_workers = j.value("workers", 4);

  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    cfg.ppo.gamma = p.value("gamma", cfg.ppo.gamma);
    cfg.ppo.lambda = p.value("lambda", cfg.ppo.lambda);
    cfg.ppo.clip_epsilon = p.value("clip_epsilon", cfg.ppo.clip_epsilon);
    cfg.ppo.learning_rate = p.value("learning_rate", cfg.ppo.learning_rate);
    cfg.ppo.epochs = p.value("epochs", cfg.ppo.epochs);
    cfg.ppo.minibatch_size = p.value("minibatch_size", cfg.ppo.minibatch_size);
    cfg.ppo.value_coef = p.value("value_coef", cfg.ppo.value_coef);
    cfg.ppo.entropy_coef = p.value("entropy_coef", cfg.ppo.entropy_coef);
    cfg.ppo.normalize_advantages = p.value("normalize_advantages", cfg.ppo.normalize_advantages);
    cfg.ppo.adam = p.value("adam", cfg.ppo.adam);
  }
  if (j.contains("sync")) {
    const auto& s = j.at("sync");
    cfg.sync.sync_interval = s.value("sync_interval", 1);
    const std::string agg = s.value("aggregation", "mean");
    if (agg == "sum") {
      cfg.sync.aggregation = SyncConfig::Aggregation::sum;
    } else if (agg == "mean") {
      cfg.sync.aggregation = SyncConfig::Aggregation::mean;
    } else {
      throw ConfigError("unknown aggregation '" + agg + "'");
    }
  }
  if (j.contains("pbt")) {
    const auto& p = j.at("pbt");
    out.pbt_enabled = p.value("enabled", false);
    cfg.pbt.population = p.value("population", cfg.pbt.population);
    cfg.pbt.quantile = p.value("quantile", cfg.pbt.quantile);
    cfg.pbt.exploit_cadence = p.value("exploit_cadence", cfg.pbt.exploit_cadence);
    if (p.contains("perturb_factors")) {
      cfg.pbt.perturb_factors = p.at("perturb_factors").get<std::vector<double>>();
    }
  }
  if (j.contains("tune")) {
    const auto& t = j.at("tune");
    out.tune_enabled = t.value("enabled", false);
    out.tune_spec.trials = t.value("trials", out.tune_spec.trials);
    out.tune_spec.trial_iterations = t.value("trial_iterations", out.tune_spec.trial_iterations);
    out.tune_spec.seed = t.value("seed", out.tune_spec.seed);
    if (t.contains("lr_range")) {
      auto r = t.at("lr_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("lr_range needs [lo, hi]");
      out.tune_spec.lr_range = {r[0], r[1]};
    }
    if (t.contains("clip_range")) {
      auto r = t.at("clip_range").get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("clip_range needs [lo, hi]");
      out.tune_spec.clip_range = {r[0], r[1]};
    }
    if (t.contains("entropy_choices")) {
      out.tune_spec.entropy_choices = t.at("entropy_choices").get<std::vector<double>>();
    }
    if (t.contains("epochs_choices")) {
      out.tune_spec.epochs_choices = t.at("epochs_choices").get<std::vector<int>>();
    }
  }
  return out;
}

// one training run with the resolved feature flags; extends the manifest
// with the flags and any tune ledger
void run_train_variant(TrainFileConfig cfg, bool use_pbt, bool use_tune, const std::string& out_dir,
                       const std::string& variant) {
  cfg.train.out_dir = out_dir;
  cfg.train.use_pbt = use_pbt;

  std::string tune_ledger;
  if (use_tune) {
    TrainConfig tune_base = cfg.train;
    tune_base.out_dir.clear();
    auto tuned = tune(cfg.tune_spec, tune_base);
    cfg.train.ppo = tuned.best;
    tune_ledger = tuned.ledger_json;
  }

  auto result = train(cfg.train);

  // extend the manifest with the feature flags of this variant
  auto manifest = json::parse(result.manifest_json);
  manifest["tune"] = use_tune;
  manifest["variant"] = variant;
  manifest["dataset"] = cfg.dataset_id;
  write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  if (!tune_ledger.empty()) {
    write_text(fs::path(out_dir) / "tune_ledger.json", tune_ledger + "\n");
  }

  const double final_reward =
      result.curve.empty() ? 0.0 : result.curve.back().episode_reward_mean;
  std::printf("[%s] %d iterations, final episode_reward_mean %s -> %s\n", variant.c_str(),
              cfg.train.iterations, format_double(final_reward).c_str(), out_dir.c_str());
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  return guarded([&]() {
    auto cfg = load_train_config(args.config_path);
    if (args.iterations >= 0) cfg.train.iterations = args.iterations;
    if (args.workers > 0) cfg.train.sync.num_workers = args.workers;
    if (args.seed_set) cfg.train.seed = args.seed;
    if (!args.out_dir.empty()) cfg.train.out_dir = args.out_dir;
    if (args.pbt == 0) cfg.pbt_enabled = false;
    if (args.pbt == 1) cfg.pbt_enabled = true;
    if (args.tune == 0) cfg.tune_enabled = false;
    if (args.tune == 1) cfg.tune_enabled = true;

    if (args.ablation_trio) {
      const std::string base = cfg.train.out_dir;
      run_train_variant(cfg, true, true, (fs::path(base) / "full").string(), "full");
      run_train_variant(cfg, false, true, (fs::path(base) / "no_pbt").string(), "no_pbt");
      run_train_variant(cfg, true, false, (fs::path(base) / "no_tune").string(), "no_tune");
      return kExitOk;
    }
    run_train_variant(cfg, cfg.pbt_enabled, cfg.tune_enabled, cfg.train.out_dir,
                      cfg.pbt_enabled || cfg.tune_enabled ? "full" : "plain");
    return kExitOk;
  });
}

int cmd_compare(const CompareArgs& args) {
  return guarded([&]() {
    if (args.result_dirs.size() < 2) throw ConfigError("compare needs at least two result dirs");

    struct ResultSet {
      std::string dir;
      json manifest;
      json summaries;
    };
    std::vector<ResultSet> sets;
    for (const auto& dir : args.result_dirs) {
      ResultSet rs;
      rs.dir = dir;
      rs.manifest = read_json_file((fs::path(dir) / "manifest.json").string());
      rs.summaries = read_json_file((fs::path(dir) / "summary.json").string());
      sets.push_back(std::move(rs));
    }

    const auto& ref = sets.front().manifest;
    for (const auto& rs : sets) {
      const auto& m = rs.manifest;
      for (const char* key : {"dataset", "sequence_length", "iterations"}) {
        if (m.value(key, json{}) != ref.value(key, json{})) {
          throw ProtocolMismatchError(std::string("result sets disagree on ") + key + " ('" +
                                      rs.dir + "' vs '" + sets.front().dir + "')");
        }
      }
      if (m.value("sequence_hashes", json::array()) != ref.value("sequence_hashes", json::array())) {
        throw ProtocolMismatchError("result sets were produced on different job sequences ('" +
                                    rs.dir + "' vs '" + sets.front().dir + "')");
      }
    }

    const char* metrics[] = {"bsld", "wait", "turnaround", "util"};
    std::string merged = "metric,scheduler,source,mean,std,delta_vs_first\n";
    json best_per_metric;

    for (const char* metric : metrics) {
      double best_value = 0;
      std::string best_label;
      bool first_value = true;
      const bool maximize = std::string(metric) == "util";

      // per (scheduler, source) rows, delta against the first source that
      // has the same scheduler
      for (const auto& rs : sets) {
        for (const auto& s : rs.summaries) {
          const std::string sched = s.value("scheduler", "?");
          const double mean = s.at(metric).value("mean", 0.0);
          const double stdd = s.at(metric).value("std", 0.0);

          double delta = 0.0;
          for (const auto& s0 : sets.front().summaries) {
            if (s0.value("scheduler", "") == sched) {
              delta = mean - s0.at(metric).value("mean", 0.0);
              break;
            }
          }
          merged += std::string(metric) + "," + sched + "," + rs.dir + "," + format_double(mean) +
                    "," + format_double(stdd) + "," + format_double(delta) + "\n";

          const std::string label = sched + " (" + rs.dir + ")";
          if (first_value || (maximize ? mean > best_value : mean < best_value)) {
            best_value = mean;
            best_label = label;
            first_value = false;
          }
        }
      }
      best_per_metric[metric] = {{"best", best_label}, {"value", best_value}};
      std::printf("%-10s best: %s = %s\n", metric, best_label.c_str(),
                  format_double(best_value).c_str());
    }

    if (!args.out_path.empty()) {
      write_text(args.out_path, merged);
      write_text(fs::path(args.out_path).replace_extension(".best.json"),
                 best_per_metric.dump(2) + "\n");
    } else {
      std::printf("%s", merged.c_str());
    }
    return kExitOk;
  });
}

}  // namespace schedforge::cli
