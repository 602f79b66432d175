#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "schedforge/simulator.hpp"

namespace schedforge {

enum class Activation { relu, tanh_fn, identity };
enum class NetTag { policy, value };

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

struct Layer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
  Activation act = Activation::tanh_fn;
};

// Fixed-architecture MLP parameters. Policy nets score one job slot
// (hidden 32, 16, 8); value nets consume the whole window (hidden 64, 32,
// 8); both end in an identity scalar head.
struct MlpParams {
  NetTag tag = NetTag::policy;
  int input_dim = 0;
  std::vector<Layer> layers;

  int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
  std::size_t parameter_count() const;
  double get_param(std::size_t index) const;
  void set_param(std::size_t index, double value);
  bool finite() const;
};

// Same shapes as its parameter set; accumulates objective gradients.
struct GradientBuffer {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;

  static GradientBuffer zeros_like(const MlpParams& params);
  void add(const GradientBuffer& other);        // elementwise +=
  void scale(double factor);
  double get_param(std::size_t index) const;    // flat view, same order as MlpParams
  std::size_t parameter_count() const;
  bool finite() const;
};

// theta += alpha * grad; shapes must agree (ShapeMismatchError).
void axpy_params(MlpParams& params, double alpha, const GradientBuffer& grad);

bool params_equal(const MlpParams& a, const MlpParams& b);  // bitwise

// Deterministic scaled-uniform init, bound = sqrt(6 / (in + out)), zero
// biases. Policy hidden sizes [32,16,8], value [64,32,8], scalar heads.
MlpParams init_params(NetTag tag, int input_dim, std::uint64_t seed);

// ---- forward / backward ----

struct ForwardCache {
  // acts[0] = input, acts[l+1] = post-activation output of layer l
  std::vector<std::vector<double>> acts;
};

// Scalar-head forward pass. Pass a cache to enable a backward pass later.
double mlp_forward(const MlpParams& params, std::span<const double> input,
                   ForwardCache* cache = nullptr);

// Exact reverse-mode gradient of (upstream * output) wrt all parameters,
// accumulated into `grad`. The cache must come from mlp_forward on the same
// params and input.
void mlp_backward(const MlpParams& params, const ForwardCache& cache, double upstream,
                  GradientBuffer& grad);

// ---- job featurization ----

constexpr int kFeatureDim = 7;

struct FeatureConfig {
  int window = 128;
  double wait_clip = 86400.0;          // 1 day
  double max_walltime = 7.0 * 86400.0; // longest request expected
  double max_procs = 1.0;              // total_nodes * procs_per_node
};

// Fixed W-slot observation: per-slot normalized features, padded slots
// zeroed with validity 0.
struct JobSlots {
  int window = 0;
  int feature_dim = kFeatureDim;
  std::vector<double> features;  // window x feature_dim, row-major
  std::vector<std::uint8_t> valid;

  std::span<const double> slot(int i) const {
    return {features.data() + static_cast<std::size_t>(i) * feature_dim,
            static_cast<std::size_t>(feature_dim)};
  }
  std::size_t valid_count() const;
};

JobSlots featurize(const DecisionPoint& decision, const FeatureConfig& config);

// ---- policy head: per-slot scores + masked softmax ----

struct PolicyForward {
  std::vector<double> scores;  // per slot; invalid slots hold 0 and are masked
  std::vector<double> probs;   // softmax over valid slots, invalid exactly 0
  std::vector<ForwardCache> caches;  // per slot, empty for invalid slots
};

// Shared-weight scoring of every valid slot followed by a masked softmax.
// Throws NoValidJobsError when nothing is valid, ShapeMismatchError when
// params.input_dim != feature_dim.
PolicyForward policy_forward(const MlpParams& params, const JobSlots& slots,
                             bool keep_caches = false);

// Backward through every valid slot given dL/dscore per slot.
void policy_backward(const MlpParams& params, const JobSlots& slots, const PolicyForward& fwd,
                     std::span<const double> d_scores, GradientBuffer& grad);

struct ValueForward {
  double value = 0;
  ForwardCache cache;
};

// Critic over the flattened window. Throws ShapeMismatchError when the
// window shape does not match params.input_dim.
ValueForward value_forward(const MlpParams& params, const JobSlots& slots,
                           bool keep_cache = false);
void value_backward(const MlpParams& params, const JobSlots& slots, const ValueForward& fwd,
                    double upstream, GradientBuffer& grad);

// ---- masked-softmax calculus ----

double entropy(const PolicyForward& fwd);
// d log p[action] / d score_j (zero on invalid slots)
std::vector<double> grad_log_prob_scores(const PolicyForward& fwd, std::size_t action);
// d entropy / d score_j
std::vector<double> grad_entropy_scores(const PolicyForward& fwd);

// ---- checkpoints ----

struct Checkpoint {
  MlpParams policy;
  MlpParams value;
  std::string meta_json;  // free-form metadata (iteration, score, config)
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Validates tags and layer shapes; throws ShapeMismatchError / IoError.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace schedforge
