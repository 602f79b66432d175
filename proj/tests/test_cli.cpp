#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "schedforge/cli.hpp"
#include "schedforge/errors.hpp"
#include "schedforge/neural.hpp"
#include "schedforge/workload.hpp"

using namespace schedforge;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const { return (path / sub).string(); }
};

std::string synth_spec(const TempDir& dir, const std::string& name, std::size_t jobs, int nodes,
                       double interarrival, std::uint64_t seed) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "{\"synthetic\": {\"jobs\": %zu, \"nodes\": %d, \"mean_interarrival\": %g, "
                "\"runtime_min\": 20, \"runtime_max\": 600, \"size_distribution\": "
                "\"power_of_two\", \"seed\": %llu}}\n",
                jobs, nodes, interarrival, static_cast<unsigned long long>(seed));
  spit(dir.path / name, buf);
  return dir.str(name);
}

}  // namespace

TEST_CASE("cmd_parse") {
  TempDir dir("sf_cli_parse");
  SUBCASE("valid trace writes stats") {
    spit(dir.path / "ok.swf",
         "; MaxNodes: 8\n"
         "1 0 -1 100 2 -1 -1 2 200 -1 1 1 1 1 1 1 -1 -1\n"
         "2 50 -1 80 1 -1 -1 1 100 -1 1 1 1 1 1 1 -1 -1\n");
    cli::ParseArgs args;
    args.path = dir.str("ok.swf");
    args.json_out = dir.str("stats.json");
    args.csv_out = dir.str("stats.csv");
    args.emit_path = dir.str("reemit.swf");
    CHECK(cli::cmd_parse(args) == cli::kExitOk);
    CHECK(fs::exists(dir.path / "stats.json"));
    CHECK(slurp(dir.path / "stats.csv").find("job_count,0,2") != std::string::npos);

    // re-emitted trace reparses to the same records
    auto original = load_swf(dir.str("ok.swf"));
    auto reemitted = load_swf(dir.str("reemit.swf"));
    REQUIRE(original.jobs.size() == reemitted.jobs.size());
    for (std::size_t i = 0; i < original.jobs.size(); ++i) {
      CHECK(original.jobs[i] == reemitted.jobs[i]);
    }
  }
  SUBCASE("garbage fails strict mode with a domain error") {
    spit(dir.path / "bad.swf", "1 2 3\nnot numbers at all\n");
    cli::ParseArgs args;
    args.path = dir.str("bad.swf");
    args.strict = true;
    CHECK(cli::cmd_parse(args) == cli::kExitDomainError);
  }
  SUBCASE("missing file is a config error") {
    cli::ParseArgs args;
    args.path = dir.str("nope.swf");
    CHECK(cli::cmd_parse(args) == cli::kExitConfigError);
  }
}

TEST_CASE("cmd_simulate writes episode artifacts") {
  TempDir dir("sf_cli_sim");
  auto dataset = synth_spec(dir, "synth.json", 60, 16, 60, 3);
  cli::SimulateArgs args;
  args.dataset = dataset;
  args.scheduler = "sjf";
  args.out_dir = dir.str("episode_out");
  CHECK(cli::cmd_simulate(args) == cli::kExitOk);
  CHECK(fs::exists(dir.path / "episode_out" / "episode.json"));
  CHECK(fs::exists(dir.path / "episode_out" / "episode.csv"));
  CHECK(fs::exists(dir.path / "episode_out" / "metrics.json"));
  auto csv = slurp(dir.path / "episode_out" / "episode.csv");
  CHECK(csv.find("job_id,submit,start,end,wait,run,nodes") == 0);
}

TEST_CASE("cmd_evaluate") {
  TempDir dir("sf_cli_eval");
  auto dataset = synth_spec(dir, "synth.json", 200, 32, 120, 5);

  SUBCASE("unknown scheduler rejected before any run") {
    cli::EvaluateArgs args;
    args.dataset = dataset;
    args.schedulers = {"fcfs", "mystery"};
    args.iterations = 2;
    args.sequence_length = 50;
    args.out_dir = dir.str("out_bad");
    CHECK(cli::cmd_evaluate(args) == cli::kExitConfigError);
    CHECK_FALSE(fs::exists(dir.path / "out_bad"));
  }

  SUBCASE("contention-free trace gives identical zero waits") {
    // arrivals far apart: nothing ever queues
    std::string swf = "; MaxNodes: 32\n; MaxProcs: 32\n";
    for (int i = 0; i < 40; ++i) {
      swf += std::to_string(i + 1) + " " + std::to_string(i * 10000) +
             " -1 600 2 -1 -1 2 1200 -1 1 1 1 1 1 1 -1 -1\n";
    }
    spit(dir.path / "calm.swf", swf);
    cli::EvaluateArgs args;
    args.dataset = dir.str("calm.swf");
    args.schedulers = {"fcfs", "sjf"};
    args.iterations = 3;
    args.sequence_length = 30;
    args.out_dir = dir.str("out_calm");
    REQUIRE(cli::cmd_evaluate(args) == cli::kExitOk);
    auto csv = slurp(dir.path / "out_calm" / "summary.csv");
    // wait rows: mean must be 0 for both schedulers
    std::istringstream lines(csv);
    std::string line;
    int wait_rows = 0;
    while (std::getline(lines, line)) {
      if (line.find(",wait,") == std::string::npos) continue;
      ++wait_rows;
      auto pos = line.find(",wait,") + 6;
      CHECK(line.substr(pos, 2) == "0,");
    }
    CHECK(wait_rows == 2);
  }

  SUBCASE("reruns are byte identical") {
    cli::EvaluateArgs args;
    args.dataset = dataset;
    args.schedulers = {"fcfs", "f1", "random"};
    args.iterations = 3;
    args.sequence_length = 64;
    args.seed = 11;
    args.out_dir = dir.str("out_det");
    REQUIRE(cli::cmd_evaluate(args) == cli::kExitOk);
    auto raw1 = slurp(dir.path / "out_det" / "raw.csv");
    auto sum1 = slurp(dir.path / "out_det" / "summary.csv");
    auto man1 = slurp(dir.path / "out_det" / "manifest.json");
    REQUIRE(cli::cmd_evaluate(args) == cli::kExitOk);
    CHECK(slurp(dir.path / "out_det" / "raw.csv") == raw1);
    CHECK(slurp(dir.path / "out_det" / "summary.csv") == sum1);
    CHECK(slurp(dir.path / "out_det" / "manifest.json") == man1);
    CHECK(man1.find("sequence_hashes") != std::string::npos);
  }
}

TEST_CASE("cmd_compare") {
  TempDir dir("sf_cli_cmp");
  auto dataset = synth_spec(dir, "synth.json", 150, 16, 100, 7);

  cli::EvaluateArgs eval;
  eval.dataset = dataset;
  eval.schedulers = {"fcfs", "sjf"};
  eval.iterations = 2;
  eval.sequence_length = 40;
  eval.out_dir = dir.str("run_a");
  REQUIRE(cli::cmd_evaluate(eval) == cli::kExitOk);
  eval.out_dir = dir.str("run_b");
  REQUIRE(cli::cmd_evaluate(eval) == cli::kExitOk);

  SUBCASE("identical result sets have zero deltas") {
    cli::CompareArgs args;
    args.result_dirs = {dir.str("run_a"), dir.str("run_b")};
    args.out_path = dir.str("merged.csv");
    REQUIRE(cli::cmd_compare(args) == cli::kExitOk);
    auto merged = slurp(dir.path / "merged.csv");
    std::istringstream lines(merged);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
      auto last_comma = line.rfind(',');
      CHECK(line.substr(last_comma + 1) == "0");
    }
  }

  SUBCASE("protocol mismatch is refused") {
    cli::EvaluateArgs other = eval;
    other.sequence_length = 30;
    other.out_dir = dir.str("run_c");
    REQUIRE(cli::cmd_evaluate(other) == cli::kExitOk);
    cli::CompareArgs args;
    args.result_dirs = {dir.str("run_a"), dir.str("run_c")};
    CHECK(cli::cmd_compare(args) == cli::kExitDomainError);
  }

  SUBCASE("fewer than two dirs is a config error") {
    cli::CompareArgs args;
    args.result_dirs = {dir.str("run_a")};
    CHECK(cli::cmd_compare(args) == cli::kExitConfigError);
  }
}

TEST_CASE("cmd_train") {
  TempDir dir("sf_cli_train");
  char cfg[640];
  std::snprintf(cfg, sizeof(cfg),
                "{\"synthetic\": {\"jobs\": 120, \"nodes\": 8, \"mean_interarrival\": 15, "
                "\"runtime_min\": 5, \"runtime_max\": 150, \"seed\": 4},\n"
                " \"nodes\": 8, \"window\": 8, \"goal\": \"bsld\",\n"
                " \"iterations\": 2, \"workers\": 2, \"episodes_per_worker\": 1,\n"
                " \"sequence_length\": 16, \"seed\": 3, \"out\": \"%s\",\n"
                " \"ppo\": {\"epochs\": 1, \"learning_rate\": 0.005},\n"
                " \"pbt\": {\"enabled\": false, \"population\": 2, \"exploit_cadence\": 1},\n"
                " \"tune\": {\"enabled\": false, \"trials\": 2, \"trial_iterations\": 1}}\n",
                dir.str("train_out").c_str());
  spit(dir.path / "train.json", cfg);

  SUBCASE("zero iterations emits the initial checkpoint only") {
    cli::TrainArgs args;
    args.config_path = dir.str("train.json");
    args.iterations = 0;
    args.out_dir = dir.str("out0");
    REQUIRE(cli::cmd_train(args) == cli::kExitOk);
    CHECK(fs::exists(dir.path / "out0" / "checkpoint_final.json"));
    auto ckpt = load_checkpoint(dir.str("out0/checkpoint_final.json"));
    CHECK(ckpt.policy.finite());
    auto log = slurp(dir.path / "out0" / "training_log.jsonl");
    CHECK(log.empty());
  }

  SUBCASE("training writes checkpoint usable by evaluate") {
    cli::TrainArgs args;
    args.config_path = dir.str("train.json");
    args.out_dir = dir.str("out1");
    REQUIRE(cli::cmd_train(args) == cli::kExitOk);
    CHECK(fs::exists(dir.path / "out1" / "manifest.json"));

    auto dataset = synth_spec(dir, "eval.json", 120, 8, 15, 4);
    cli::EvaluateArgs eval;
    eval.dataset = dataset;
    eval.schedulers = {"fcfs", dir.str("out1/checkpoint_final.json")};
    eval.iterations = 2;
    eval.sequence_length = 20;
    eval.window = 8;
    eval.out_dir = dir.str("eval_out");
    CHECK(cli::cmd_evaluate(eval) == cli::kExitOk);
    auto summary = slurp(dir.path / "eval_out" / "summary.csv");
    CHECK(summary.find("checkpoint_final") != std::string::npos);
  }

  SUBCASE("ablation trio records distinct feature flags") {
    cli::TrainArgs args;
    args.config_path = dir.str("train.json");
    args.iterations = 1;
    args.out_dir = dir.str("trio");
    args.ablation_trio = true;
    REQUIRE(cli::cmd_train(args) == cli::kExitOk);

    auto full = slurp(dir.path / "trio" / "full" / "manifest.json");
    auto no_pbt = slurp(dir.path / "trio" / "no_pbt" / "manifest.json");
    auto no_tune = slurp(dir.path / "trio" / "no_tune" / "manifest.json");
    CHECK(full.find("\"pbt\": true") != std::string::npos);
    CHECK(full.find("\"tune\": true") != std::string::npos);
    CHECK(no_pbt.find("\"pbt\": false") != std::string::npos);
    CHECK(no_pbt.find("\"tune\": true") != std::string::npos);
    CHECK(no_tune.find("\"pbt\": true") != std::string::npos);
    CHECK(no_tune.find("\"tune\": false") != std::string::npos);
    CHECK(fs::exists(dir.path / "trio" / "full" / "tune_ledger.json"));
  }

  SUBCASE("bad config file is a config error") {
    spit(dir.path / "broken.json", "{not json");
    cli::TrainArgs args;
    args.config_path = dir.str("broken.json");
    CHECK(cli::cmd_train(args) == cli::kExitConfigError);
  }
}
