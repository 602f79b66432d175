#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "schedforge/errors.hpp"
#include "schedforge/neural.hpp"
#include "schedforge/rng.hpp"

using namespace schedforge;

namespace {

JobSlots random_slots(int window, std::size_t n_valid, Rng& rng) {
  JobSlots slots;
  slots.window = window;
  slots.features.assign(static_cast<std::size_t>(window) * kFeatureDim, 0.0);
  slots.valid.assign(static_cast<std::size_t>(window), 0);
  for (std::size_t i = 0; i < n_valid; ++i) {
    for (int f = 0; f < kFeatureDim - 1; ++f) {
      slots.features[i * kFeatureDim + static_cast<std::size_t>(f)] = rng.uniform();
    }
    slots.features[i * kFeatureDim + kFeatureDim - 1] = 1.0;
    slots.valid[i] = 1;
  }
  return slots;
}

}  // namespace

TEST_CASE("init_params architecture and determinism") {
  auto policy = init_params(NetTag::policy, kFeatureDim, 3);
  REQUIRE(policy.layers.size() == 4);
  CHECK(policy.layers[0].w.rows == 32);
  CHECK(policy.layers[1].w.rows == 16);
  CHECK(policy.layers[2].w.rows == 8);
  CHECK(policy.layers[3].w.rows == 1);
  CHECK(policy.finite());

  auto value = init_params(NetTag::value, 4 * kFeatureDim, 3);
  CHECK(value.layers[0].w.rows == 64);
  CHECK(value.layers[1].w.rows == 32);
  CHECK(value.layers[2].w.rows == 8);
  CHECK(value.layers[3].w.rows == 1);

  CHECK(params_equal(init_params(NetTag::policy, kFeatureDim, 7),
                     init_params(NetTag::policy, kFeatureDim, 7)));
  CHECK_FALSE(params_equal(init_params(NetTag::policy, kFeatureDim, 7),
                           init_params(NetTag::policy, kFeatureDim, 8)));

  // scaled-uniform bound on the first layer
  const double bound = std::sqrt(6.0 / (kFeatureDim + 32));
  for (double w : policy.layers[0].w.a) CHECK(std::fabs(w) <= bound);
}

TEST_CASE("linear single-layer gradient") {
  MlpParams p;
  p.tag = NetTag::value;
  p.input_dim = 1;
  Layer l;
  l.w = Matrix(1, 1);
  l.w.at(0, 0) = 3.0;
  l.b = {0.0};
  l.act = Activation::identity;
  p.layers.push_back(l);

  ForwardCache cache;
  const double x = 2.0;
  const double y = mlp_forward(p, std::span<const double>(&x, 1), &cache);
  CHECK(y == doctest::Approx(6.0));

  auto grad = GradientBuffer::zeros_like(p);
  mlp_backward(p, cache, 1.0, grad);
  CHECK(grad.dw[0].at(0, 0) == doctest::Approx(2.0));  // dL/dw = x
  CHECK(grad.db[0][0] == doctest::Approx(1.0));

  auto zero = GradientBuffer::zeros_like(p);
  mlp_backward(p, cache, 0.0, zero);
  CHECK(zero.dw[0].at(0, 0) == 0.0);
  CHECK(zero.db[0][0] == 0.0);
}

TEST_CASE("policy softmax basics") {
  Rng rng(11);
  auto params = init_params(NetTag::policy, kFeatureDim, 5);

  SUBCASE("single valid job gets probability 1") {
    auto slots = random_slots(8, 1, rng);
    auto fwd = policy_forward(params, slots);
    CHECK(fwd.probs[0] == doctest::Approx(1.0));
    for (std::size_t i = 1; i < fwd.probs.size(); ++i) CHECK(fwd.probs[i] == 0.0);
  }
  SUBCASE("identical features get equal probabilities") {
    auto slots = random_slots(8, 1, rng);
    // duplicate slot 0 into slot 1
    for (int f = 0; f < kFeatureDim; ++f) {
      slots.features[static_cast<std::size_t>(kFeatureDim) + f] = slots.features[f];
    }
    slots.valid[1] = 1;
    auto fwd = policy_forward(params, slots);
    CHECK(fwd.probs[0] == doctest::Approx(0.5));
    CHECK(fwd.probs[1] == doctest::Approx(0.5));
  }
  SUBCASE("probabilities sum to one over valid slots") {
    for (int trial = 0; trial < 50; ++trial) {
      auto slots = random_slots(16, 1 + rng.pick_index(16), rng);
      auto fwd = policy_forward(params, slots);
      double sum = 0;
      for (std::size_t i = 0; i < fwd.probs.size(); ++i) {
        CHECK(fwd.probs[i] >= 0.0);
        if (!slots.valid[i]) CHECK(fwd.probs[i] == 0.0);
        sum += fwd.probs[i];
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
  SUBCASE("permutation equivariance") {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + rng.pick_index(6);
      auto slots = random_slots(static_cast<int>(n), n, rng);
      auto fwd = policy_forward(params, slots);

      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(perm, rng);

      JobSlots shuffled = slots;
      for (std::size_t i = 0; i < n; ++i) {
        for (int f = 0; f < kFeatureDim; ++f) {
          shuffled.features[i * kFeatureDim + static_cast<std::size_t>(f)] =
              slots.features[perm[i] * kFeatureDim + static_cast<std::size_t>(f)];
        }
      }
      auto fwd2 = policy_forward(params, shuffled);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(fwd2.probs[i] == doctest::Approx(fwd.probs[perm[i]]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("no valid jobs") {
    JobSlots empty;
    empty.window = 4;
    empty.features.assign(4 * kFeatureDim, 0.0);
    empty.valid.assign(4, 0);
    CHECK_THROWS_AS(policy_forward(params, empty), NoValidJobsError);
  }
}

TEST_CASE("value network basics") {
  Rng rng(13);
  const int window = 4;
  auto slots = random_slots(window, 3, rng);

  auto params = init_params(NetTag::value, window * kFeatureDim, 2);
  auto a = value_forward(params, slots);
  auto b = value_forward(params, slots);
  CHECK(a.value == b.value);
  CHECK(std::isfinite(a.value));

  // zero parameters -> zero output
  for (auto& l : params.layers) {
    std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  CHECK(value_forward(params, slots).value == 0.0);

  auto wrong = init_params(NetTag::value, (window + 1) * kFeatureDim, 2);
  CHECK_THROWS_AS(value_forward(wrong, slots), ShapeMismatchError);
}

TEST_CASE("gradient check vs central finite differences") {
  Rng rng(17);

  SUBCASE("policy net through weighted scores") {
    for (int trial = 0; trial < 15; ++trial) {
      auto params = init_params(NetTag::policy, kFeatureDim, rng.next_u64());
      auto slots = random_slots(6, 1 + rng.pick_index(6), rng);
      std::vector<double> coeff(6);
      for (auto& c : coeff) c = rng.uniform(-1, 1);

      auto loss = [&]() {
        auto fwd = policy_forward(params, slots);
        double l = 0;
        for (std::size_t i = 0; i < fwd.scores.size(); ++i) {
          if (slots.valid[i]) l += coeff[i] * fwd.scores[i];
        }
        return l;
      };

      auto fwd = policy_forward(params, slots, true);
      auto grad = GradientBuffer::zeros_like(params);
      std::vector<double> d_scores(6, 0.0);
      for (std::size_t i = 0; i < 6; ++i) {
        if (slots.valid[i]) d_scores[i] = coeff[i];
      }
      policy_backward(params, slots, fwd, d_scores, grad);

      auto fd = testing::fd_gradient(params, loss);
      CHECK(testing::max_rel_error(fd, grad) < 1e-4);
    }
  }

  SUBCASE("log-prob of a chosen action through the masked softmax") {
    for (int trial = 0; trial < 15; ++trial) {
      auto params = init_params(NetTag::policy, kFeatureDim, rng.next_u64());
      const std::size_t n_valid = 2 + rng.pick_index(4);
      auto slots = random_slots(6, n_valid, rng);
      const std::size_t action = rng.pick_index(n_valid);

      auto loss = [&]() {
        auto fwd = policy_forward(params, slots);
        return std::log(fwd.probs[action]);
      };

      auto fwd = policy_forward(params, slots, true);
      auto grad = GradientBuffer::zeros_like(params);
      auto d_scores = grad_log_prob_scores(fwd, action);
      policy_backward(params, slots, fwd, d_scores, grad);

      auto fd = testing::fd_gradient(params, loss);
      CHECK(testing::max_rel_error(fd, grad) < 1e-4);
    }
  }

  SUBCASE("entropy of the masked softmax") {
    for (int trial = 0; trial < 10; ++trial) {
      auto params = init_params(NetTag::policy, kFeatureDim, rng.next_u64());
      auto slots = random_slots(5, 2 + rng.pick_index(3), rng);

      auto loss = [&]() { return entropy(policy_forward(params, slots)); };

      auto fwd = policy_forward(params, slots, true);
      auto grad = GradientBuffer::zeros_like(params);
      auto d_scores = grad_entropy_scores(fwd);
      policy_backward(params, slots, fwd, d_scores, grad);

      auto fd = testing::fd_gradient(params, loss);
      CHECK(testing::max_rel_error(fd, grad) < 1e-4);
    }
  }

  SUBCASE("value net") {
    const int window = 3;
    for (int trial = 0; trial < 10; ++trial) {
      auto params = init_params(NetTag::value, window * kFeatureDim, rng.next_u64());
      auto slots = random_slots(window, 1 + rng.pick_index(3), rng);

      auto loss = [&]() { return value_forward(params, slots).value; };

      auto fwd = value_forward(params, slots, true);
      auto grad = GradientBuffer::zeros_like(params);
      value_backward(params, slots, fwd, 1.0, grad);

      auto fd = testing::fd_gradient(params, loss);
      CHECK(testing::max_rel_error(fd, grad) < 1e-4);
    }
  }
}

TEST_CASE("featurize clamps and pads") {
  DecisionPoint dp;
  dp.clock = 1000;
  JobRecord j;
  j.job_id = 1;
  j.submit_time = 400;
  j.requested_time = 3600;
  j.requested_procs = 8;
  dp.observable_jobs = {j};
  dp.queue_length = 1;

  FeatureConfig cfg;
  cfg.window = 4;
  cfg.max_procs = 16;
  auto slots = featurize(dp, cfg);
  REQUIRE(slots.window == 4);
  CHECK(slots.valid[0] == 1);
  CHECK(slots.valid_count() == 1);
  for (int f = 0; f < kFeatureDim; ++f) {
    CHECK(slots.features[static_cast<std::size_t>(f)] >= 0.0);
    CHECK(slots.features[static_cast<std::size_t>(f)] <= 1.0);
  }
  CHECK(slots.features[6] == 1.0);  // validity flag
  CHECK(slots.features[2] == doctest::Approx(0.5));  // 8 of 16 procs
  // padded slots zeroed
  for (std::size_t i = kFeatureDim; i < slots.features.size(); ++i) CHECK(slots.features[i] == 0.0);
}

TEST_CASE("checkpoint round trip and validation") {
  const std::string path = "ckpt_test.json";
  Checkpoint ckpt;
  ckpt.policy = init_params(NetTag::policy, kFeatureDim, 21);
  ckpt.value = init_params(NetTag::value, 4 * kFeatureDim, 22);
  ckpt.meta_json = "{\"iteration\": 7}";
  save_checkpoint(path, ckpt);

  auto loaded = load_checkpoint(path);
  CHECK(params_equal(loaded.policy, ckpt.policy));
  CHECK(params_equal(loaded.value, ckpt.value));
  CHECK(loaded.meta_json.find("\"iteration\"") != std::string::npos);

  SUBCASE("tampered shapes rejected") {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"rows\": 32");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "\"rows\": 31");
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), Error);
  }

  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint("does_not_exist.json"), IoError);
}
