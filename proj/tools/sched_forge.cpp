#include <CLI11.hpp>

#include "schedforge/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sched-forge: workload-driven HPC batch scheduling lab"};
  app.require_subcommand(1);

  using namespace schedforge::cli;

  // ---- parse ----
  ParseArgs parse_args;
  auto* parse = app.add_subcommand("parse", "Parse and validate an SWF trace, emit statistics");
  parse->add_option("path", parse_args.path, "SWF file")->required();
  parse->add_flag("--strict", parse_args.strict, "fail on any malformed line (default: skip+count)");
  parse->add_flag("--json", parse_args.json_to_stdout, "print the stats report as JSON");
  parse->add_option("--stats-json", parse_args.json_out, "write stats JSON to this file");
  parse->add_option("--stats-csv", parse_args.csv_out, "write stats CSV to this file");
  parse->add_option("--emit", parse_args.emit_path, "re-emit the validated trace as SWF");

  // ---- simulate ----
  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Replay one job sequence through the cluster simulator");
  sim->add_option("dataset", sim_args.dataset, "SWF file or synthesis spec JSON")->required();
  sim->add_option("--scheduler", sim_args.scheduler,
                  "rule name (fcfs|sjf|f1|wfp3|unicef|random) or checkpoint path")
      ->capture_default_str();
  sim->add_option("--config", sim_args.config_path, "episode config JSON (nodes, window, backfill, preload)");
  sim->add_option("--nodes", sim_args.nodes, "cluster nodes (default: trace header)");
  sim->add_option("--window", sim_args.window, "observable queue window W")->capture_default_str();
  sim->add_flag("--backfill,!--no-backfill", sim_args.backfill, "EASY backfilling (default on)");
  sim->add_option("--seed", sim_args.seed, "seed (random scheduler)")->capture_default_str();
  sim->add_option("--start", sim_args.start, "first job index of the slice")->capture_default_str();
  sim->add_option("--sequence-length", sim_args.sequence_length, "jobs to replay (0 = all)")
      ->capture_default_str();
  sim->add_option("--out", sim_args.out_dir, "write episode.json/episode.csv/metrics.json here");

  // ---- evaluate ----
  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "Run the iteration protocol for several schedulers");
  eval->add_option("dataset", eval_args.dataset, "SWF file or synthesis spec JSON")->required();
  eval->add_option("--scheduler", eval_args.schedulers,
                   "scheduler list: rule names and/or checkpoint paths")
      ->required()
      ->expected(-1);
  eval->add_option("--goal", eval_args.goal, "optimization goal: bsld|wait|turnaround|util")
      ->capture_default_str();
  eval->add_option("--iterations", eval_args.iterations, "evaluation iterations")
      ->capture_default_str();
  eval->add_option("--sequence-length", eval_args.sequence_length, "jobs per iteration")
      ->capture_default_str();
  eval->add_option("--seed", eval_args.seed, "sequence sampling seed")->capture_default_str();
  eval->add_flag("--fixed-sequence", eval_args.fixed_sequence,
                 "replay the leading slice every iteration instead of sampling");
  eval->add_option("--nodes", eval_args.nodes, "cluster nodes (default: trace header)");
  eval->add_option("--window", eval_args.window, "observable queue window W")->capture_default_str();
  eval->add_flag("--backfill,!--no-backfill", eval_args.backfill, "EASY backfilling (default on)");
  eval->add_option("--out", eval_args.out_dir, "output directory")->capture_default_str();

  // ---- train ----
  TrainArgs train_args;
  bool pbt_on = false, pbt_off = false, tune_on = false, tune_off = false;
  auto* train = app.add_subcommand("train", "Train the DD-PPO scheduling policy");
  train->add_option("--config", train_args.config_path, "training config JSON")->required();
  train->add_option("--iterations", train_args.iterations, "override training iterations");
  train->add_option("--workers", train_args.workers, "override worker count N");
  auto* seed_opt = train->add_option("--seed", train_args.seed, "override master seed");
  train->add_flag("--pbt", pbt_on, "force population-based training on");
  train->add_flag("--no-pbt", pbt_off, "force population-based training off");
  train->add_flag("--tune", tune_on, "force hyperparameter search on");
  train->add_flag("--no-tune", tune_off, "force hyperparameter search off");
  train->add_option("--out", train_args.out_dir, "override output directory");
  train->add_flag("--ablation-trio", train_args.ablation_trio,
                  "run full / no-pbt / no-tune variants under one config");

  // ---- compare ----
  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare", "Merge evaluation result sets into one report");
  cmp->add_option("dirs", cmp_args.result_dirs, "evaluate output directories")
      ->required()
      ->expected(-1);
  cmp->add_option("--out", cmp_args.out_path, "merged CSV path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  if (parse->parsed()) return cmd_parse(parse_args);
  if (sim->parsed()) return cmd_simulate(sim_args);
  if (eval->parsed()) return cmd_evaluate(eval_args);
  if (train->parsed()) {
    train_args.seed_set = seed_opt->count() > 0;
    if (pbt_on) train_args.pbt = 1;
    if (pbt_off) train_args.pbt = 0;
    if (tune_on) train_args.tune = 1;
    if (tune_off) train_args.tune = 0;
    return cmd_train(train_args);
  }
  if (cmp->parsed()) return cmd_compare(cmp_args);
  return kExitConfigError;
}
