#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "schedforge/simulator.hpp"

namespace schedforge {

// mean/std are population statistics; quantiles interpolate linearly
// between closest ranks.
struct DistributionStats {
  double mean = 0, std_dev = 0, median = 0, q25 = 0, q75 = 0, min = 0, max = 0;
};

struct MetricsSummary {
  double avg_bounded_slowdown = 0;
  double avg_waiting_time = 0;
  double avg_turnaround_time = 0;
  double utilization = 0;
  DistributionStats bounded_slowdown_stats;
  DistributionStats waiting_stats;
  DistributionStats turnaround_stats;
  DistributionStats utilization_stats;
  std::size_t episodes = 0;
};

// max((w + e) / max(e, 10), 1) -- slowdown with the 10 s interactive floor.
double bounded_slowdown(double wait_seconds, double run_seconds);

double turnaround(double wait_seconds, double run_seconds);

// Time-weighted allocated fraction over [first submit, last completion].
double utilization(const EpisodeResult& result);

// Per-episode job-level averages of one finished episode.
double episode_avg_bounded_slowdown(const EpisodeResult& result);
double episode_avg_waiting(const EpisodeResult& result);
double episode_avg_turnaround(const EpisodeResult& result);

double quantile(std::vector<double> values, double q);
DistributionStats distribution_stats(const std::vector<double>& values);

// Job-level averages per episode, then cross-episode statistics.
MetricsSummary summarize(const std::vector<EpisodeResult>& results);

std::string summary_to_json(const MetricsSummary& summary, const std::string& dataset,
                            const std::string& scheduler, const std::string& goal);
// Header: dataset,scheduler,goal,mean,std,median,q25,q75,min,max (one row
// per metric, `goal` names the metric).
std::string summary_to_csv_rows(const MetricsSummary& summary, const std::string& dataset,
                                const std::string& scheduler);

}  // namespace schedforge
