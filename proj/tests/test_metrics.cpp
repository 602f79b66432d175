#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "schedforge/baselines.hpp"
#include "schedforge/errors.hpp"
#include "schedforge/metrics.hpp"
#include "schedforge/rng.hpp"
#include "schedforge/workload.hpp"

using namespace schedforge;

TEST_CASE("bounded slowdown formula") {
  CHECK(bounded_slowdown(0, 20) == doctest::Approx(1.0));
  CHECK(bounded_slowdown(100, 5) == doctest::Approx(10.5));
  CHECK(bounded_slowdown(90, 10) == doctest::Approx(10.0));
  CHECK_THROWS_AS(bounded_slowdown(-1, 10), NegativeInputError);
  CHECK_THROWS_AS(bounded_slowdown(1, -10), NegativeInputError);

  // >= 1 always, monotone nondecreasing in wait
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    double e = rng.uniform(0, 500);
    double w1 = rng.uniform(0, 500);
    double w2 = w1 + rng.uniform(0, 100);
    CHECK(bounded_slowdown(w1, e) >= 1.0);
    CHECK(bounded_slowdown(w2, e) >= bounded_slowdown(w1, e));
  }
}

TEST_CASE("turnaround") {
  CHECK(turnaround(0, 20) == doctest::Approx(20));
  CHECK(turnaround(100, 5) == doctest::Approx(105));
  CHECK(turnaround(0, 0) == doctest::Approx(0));
  CHECK_THROWS_AS(turnaround(-1, 0), NegativeInputError);
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    double w = rng.uniform(0, 100), e = rng.uniform(0, 100);
    CHECK(turnaround(w, e) >= std::max(w, e));
  }
}

TEST_CASE("quantiles interpolate linearly") {
  std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(quantile({}, 0.5), EmptyInputError);
}

namespace {

EpisodeResult fake_episode(const std::vector<std::pair<std::int64_t, std::int64_t>>& wait_run,
                           int total_nodes = 4) {
  EpisodeResult r;
  r.total_nodes = total_nodes;
  std::int64_t id = 1;
  for (auto [w, e] : wait_run) {
    FinishedJob j;
    j.job_id = id++;
    j.submit_time = 0;
    j.start_time = w;
    j.end_time = w + e;
    j.wait_time = w;
    j.run_time = e;
    j.nodes = 1;
    r.jobs.push_back(j);
    r.last_completion = std::max(r.last_completion, j.end_time);
  }
  r.first_submit = 0;
  r.allocation_timeline = {{0, total_nodes}, {r.last_completion, 0}};
  r.makespan = r.last_completion;
  return r;
}

}  // namespace

TEST_CASE("summarize statistics") {
  SUBCASE("single episode has zero std") {
    auto s = summarize({fake_episode({{0, 100}, {50, 20}})});
    CHECK(s.episodes == 1);
    CHECK(s.waiting_stats.std_dev == doctest::Approx(0.0));
    CHECK(s.avg_waiting_time == doctest::Approx(25.0));
  }
  SUBCASE("identical episodes collapse") {
    auto e = fake_episode({{10, 100}});
    auto s = summarize({e, e, e});
    CHECK(s.waiting_stats.mean == doctest::Approx(10));
    CHECK(s.waiting_stats.median == doctest::Approx(10));
    CHECK(s.waiting_stats.std_dev == doctest::Approx(0));
  }
  SUBCASE("population std and quartiles") {
    std::vector<EpisodeResult> eps;
    for (double w : {1.0, 2.0, 3.0, 4.0}) {
      eps.push_back(fake_episode({{static_cast<std::int64_t>(w), 10}}));
    }
    auto s = summarize(eps);
    CHECK(s.waiting_stats.mean == doctest::Approx(2.5));
    CHECK(s.waiting_stats.std_dev == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.waiting_stats.median == doctest::Approx(2.5));
    CHECK(s.waiting_stats.q25 == doctest::Approx(1.75));
    CHECK(s.waiting_stats.q75 == doctest::Approx(3.25));
  }
  SUBCASE("permutation invariance") {
    std::vector<EpisodeResult> eps = {fake_episode({{5, 10}}), fake_episode({{9, 30}}),
                                      fake_episode({{1, 70}})};
    auto a = summarize(eps);
    std::reverse(eps.begin(), eps.end());
    auto b = summarize(eps);
    CHECK(a.avg_bounded_slowdown == doctest::Approx(b.avg_bounded_slowdown));
    CHECK(a.waiting_stats.median == doctest::Approx(b.waiting_stats.median));
    CHECK(a.turnaround_stats.q75 == doctest::Approx(b.turnaround_stats.q75));
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(summarize({}), EmptyInputError);
  }
}

TEST_CASE("turnaround minus waiting equals run time") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    SynthesisParams p;
    p.jobs = 40;
    p.nodes = 8;
    p.mean_interarrival = 15;
    p.runtime_min = 1;
    p.runtime_max = 400;
    auto trace = synthesize_trace(p, rng.next_u64());
    SimConfig cfg;
    cfg.total_nodes = 8;
    auto r = run_episode(trace.jobs, make_rule_scheduler(Rule::fcfs), cfg);

    double run_avg = 0;
    for (const auto& j : r.jobs) run_avg += static_cast<double>(j.run_time);
    run_avg /= static_cast<double>(r.jobs.size());
    CHECK(episode_avg_turnaround(r) - episode_avg_waiting(r) == doctest::Approx(run_avg).epsilon(1e-9));
  }
}

TEST_CASE("summary serialization") {
  auto s = summarize({fake_episode({{0, 100}})});
  auto json = summary_to_json(s, "toy", "fcfs", "bsld");
  CHECK(json.find("\"scheduler\": \"fcfs\"") != std::string::npos);
  auto csv = summary_to_csv_rows(s, "toy", "fcfs");
  CHECK(csv.find("toy,fcfs,bsld,") != std::string::npos);
  CHECK(csv.find("toy,fcfs,util,") != std::string::npos);
}
