#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace schedforge::cli {

// Exit codes: 0 success, 1 domain error, 2 config/IO error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitConfigError = 2;

// A dataset argument is either an SWF file or a JSON synthesis spec
// ({"synthetic": {jobs, nodes, mean_interarrival, runtime_min, runtime_max,
// size_distribution, walltime_factor, seed}}).

struct ParseArgs {
  std::string path;
  bool strict = false;
  bool json_to_stdout = false;
  std::string json_out;   // stats JSON file, empty = skip
  std::string csv_out;    // stats CSV file, empty = skip
  std::string emit_path;  // re-emit the validated trace as SWF
};
int cmd_parse(const ParseArgs& args);

struct SimulateArgs {
  std::string dataset;
  std::string scheduler = "fcfs";  // rule name or checkpoint path
  std::string config_path;         // optional episode config JSON
  int nodes = 0;                   // 0 = trace header
  int window = 32;
  bool backfill = true;
  std::uint64_t seed = 1;
  std::size_t start = 0;
  std::size_t sequence_length = 0;  // 0 = whole trace
  std::string out_dir;              // empty = stdout only
};
int cmd_simulate(const SimulateArgs& args);

struct EvaluateArgs {
  std::string dataset;
  std::vector<std::string> schedulers;
  std::string goal = "bsld";
  int iterations = 10;
  std::size_t sequence_length = 1024;
  std::uint64_t seed = 1;
  bool fixed_sequence = false;
  int nodes = 0;
  int window = 32;
  bool backfill = true;
  std::string out_dir = "eval_out";
};
int cmd_evaluate(const EvaluateArgs& args);

struct TrainArgs {
  std::string config_path;
  // overrides; negative / unset values keep the config file's choice
  int iterations = -1;
  int workers = -1;
  bool seed_set = false;
  std::uint64_t seed = 0;
  int pbt = -1;   // -1 keep, 0 force off, 1 force on
  int tune = -1;
  std::string out_dir;
  bool ablation_trio = false;  // run full / no-pbt / no-tune variants
};
int cmd_train(const TrainArgs& args);

struct CompareArgs {
  std::vector<std::string> result_dirs;
  std::string out_path;  // merged CSV, empty = stdout only
};
int cmd_compare(const CompareArgs& args);

}  // namespace schedforge::cli
