#include "schedforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "schedforge/errors.hpp"

namespace schedforge {

double bounded_slowdown(double wait_seconds, double run_seconds) {
  if (wait_seconds < 0 || run_seconds < 0) {
    throw NegativeInputError("bounded_slowdown needs nonnegative wait and run times");
  }
  return std::max((wait_seconds + run_seconds) / std::max(run_seconds, 10.0), 1.0);
}

double turnaround(double wait_seconds, double run_seconds) {
  if (wait_seconds < 0 || run_seconds < 0) {
    throw NegativeInputError("turnaround needs nonnegative wait and run times");
  }
  return wait_seconds + run_seconds;
}

double utilization(const EpisodeResult& result) {
  return utilization_fraction(result, result.first_submit, result.last_completion);
}

namespace {

template <typename F>
double job_average(const EpisodeResult& result, F&& per_job) {
  if (result.jobs.empty()) throw EmptyInputError("episode finished no jobs");
  double sum = 0;
  for (const auto& j : result.jobs) sum += per_job(j);
  return sum / static_cast<double>(result.jobs.size());
}

}  // namespace

double episode_avg_bounded_slowdown(const EpisodeResult& result) {
  return job_average(result, [](const FinishedJob& j) {
    return bounded_slowdown(static_cast<double>(j.wait_time), static_cast<double>(j.run_time));
  });
}

double episode_avg_waiting(const EpisodeResult& result) {
  return job_average(result, [](const FinishedJob& j) { return static_cast<double>(j.wait_time); });
}

double episode_avg_turnaround(const EpisodeResult& result) {
  return job_average(result, [](const FinishedJob& j) {
    return static_cast<double>(j.wait_time + j.run_time);
  });
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyInputError("quantile of empty set");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values.front();
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo >= values.size() - 1) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

DistributionStats distribution_stats(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInputError("stats of empty set");
  DistributionStats s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(var / static_cast<double>(values.size()));
  s.median = quantile(values, 0.5);
  s.q25 = quantile(values, 0.25);
  s.q75 = quantile(values, 0.75);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

MetricsSummary summarize(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw EmptyInputError("summarize needs at least one episode");

  std::vector<double> bsld, wait, turn, util;
  bsld.reserve(results.size());
  for (const auto& r : results) {
    bsld.push_back(episode_avg_bounded_slowdown(r));
    wait.push_back(episode_avg_waiting(r));
    turn.push_back(episode_avg_turnaround(r));
    util.push_back(utilization(r));
  }

  MetricsSummary s;
  s.episodes = results.size();
  s.bounded_slowdown_stats = distribution_stats(bsld);
  s.waiting_stats = distribution_stats(wait);
  s.turnaround_stats = distribution_stats(turn);
  s.utilization_stats = distribution_stats(util);
  s.avg_bounded_slowdown = s.bounded_slowdown_stats.mean;
  s.avg_waiting_time = s.waiting_stats.mean;
  s.avg_turnaround_time = s.turnaround_stats.mean;
  s.utilization = s.utilization_stats.mean;
  return s;
}

namespace {

nlohmann::json stats_json(const DistributionStats& s) {
  return {{"mean", s.mean}, {"std", s.std_dev}, {"median", s.median}, {"q25", s.q25},
          {"q75", s.q75},   {"min", s.min},     {"max", s.max}};
}

}  // namespace

std::string summary_to_json(const MetricsSummary& summary, const std::string& dataset,
                            const std::string& scheduler, const std::string& goal) {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["scheduler"] = scheduler;
  j["goal"] = goal;
  j["episodes"] = summary.episodes;
  j["bsld"] = stats_json(summary.bounded_slowdown_stats);
  j["wait"] = stats_json(summary.waiting_stats);
  j["turnaround"] = stats_json(summary.turnaround_stats);
  j["util"] = stats_json(summary.utilization_stats);
  return j.dump(2);
}

std::string summary_to_csv_rows(const MetricsSummary& summary, const std::string& dataset,
                                const std::string& scheduler) {
  std::string out;
  char buf[352];
  auto row = [&](const char* goal, const DistributionStats& s) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  dataset.c_str(), scheduler.c_str(), goal, s.mean, s.std_dev, s.median, s.q25,
                  s.q75, s.min, s.max);
    out += buf;
  };
  row("bsld", summary.bounded_slowdown_stats);
  row("wait", summary.waiting_stats);
  row("turnaround", summary.turnaround_stats);
  row("util", summary.utilization_stats);
  return out;
}

}  // namespace schedforge
