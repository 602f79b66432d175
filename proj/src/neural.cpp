#include "schedforge/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "schedforge/errors.hpp"
#include "schedforge/rng.hpp"

namespace schedforge {

namespace {

constexpr int kPolicyHidden[] = {32, 16, 8};
constexpr int kValueHidden[] = {64, 32, 8};

double activate(Activation act, double z) {
  switch (act) {
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::tanh_fn: return std::tanh(z);
    case Activation::identity: return z;
  }
  return z;
}

// derivative expressed through the post-activation value
double activate_grad(Activation act, double a) {
  switch (act) {
    case Activation::relu: return a > 0 ? 1.0 : 0.0;
    case Activation::tanh_fn: return 1.0 - a * a;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.a.size() + l.b.size();
  return n;
}

double MlpParams::get_param(std::size_t index) const {
  for (const auto& l : layers) {
    if (index < l.w.a.size()) return l.w.a[index];
    index -= l.w.a.size();
    if (index < l.b.size()) return l.b[index];
    index -= l.b.size();
  }
  throw ShapeMismatchError("parameter index out of range");
}

void MlpParams::set_param(std::size_t index, double value) {
  for (auto& l : layers) {
    if (index < l.w.a.size()) {
      l.w.a[index] = value;
      return;
    }
    index -= l.w.a.size();
    if (index < l.b.size()) {
      l.b[index] = value;
      return;
    }
    index -= l.b.size();
  }
  throw ShapeMismatchError("parameter index out of range");
}

bool MlpParams::finite() const {
  for (const auto& l : layers) {
    for (double v : l.w.a)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

GradientBuffer GradientBuffer::zeros_like(const MlpParams& params) {
  GradientBuffer g;
  g.dw.reserve(params.layers.size());
  g.db.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.dw.emplace_back(l.w.rows, l.w.cols);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void GradientBuffer::add(const GradientBuffer& other) {
  if (dw.size() != other.dw.size()) throw ShapeMismatchError("gradient buffer layer count mismatch");
  for (std::size_t l = 0; l < dw.size(); ++l) {
    if (dw[l].a.size() != other.dw[l].a.size() || db[l].size() != other.db[l].size()) {
      throw ShapeMismatchError("gradient buffer shape mismatch");
    }
    for (std::size_t i = 0; i < dw[l].a.size(); ++i) dw[l].a[i] += other.dw[l].a[i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
  }
}

void GradientBuffer::scale(double factor) {
  for (auto& m : dw)
    for (double& v : m.a) v *= factor;
  for (auto& b : db)
    for (double& v : b) v *= factor;
}

double GradientBuffer::get_param(std::size_t index) const {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    if (index < dw[l].a.size()) return dw[l].a[index];
    index -= dw[l].a.size();
    if (index < db[l].size()) return db[l][index];
    index -= db[l].size();
  }
  throw ShapeMismatchError("gradient index out of range");
}

std::size_t GradientBuffer::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < dw.size(); ++l) n += dw[l].a.size() + db[l].size();
  return n;
}

bool GradientBuffer::finite() const {
  for (const auto& m : dw)
    for (double v : m.a)
      if (!std::isfinite(v)) return false;
  for (const auto& b : db)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void axpy_params(MlpParams& params, double alpha, const GradientBuffer& grad) {
  if (params.layers.size() != grad.dw.size()) throw ShapeMismatchError("axpy layer count mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    if (layer.w.a.size() != grad.dw[l].a.size() || layer.b.size() != grad.db[l].size()) {
      throw ShapeMismatchError("axpy shape mismatch");
    }
    for (std::size_t i = 0; i < layer.w.a.size(); ++i) layer.w.a[i] += alpha * grad.dw[l].a[i];
    for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] += alpha * grad.db[l][i];
  }
}

bool params_equal(const MlpParams& a, const MlpParams& b) {
  if (a.tag != b.tag || a.input_dim != b.input_dim || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].w.a != b.layers[l].w.a || a.layers[l].b != b.layers[l].b) return false;
  }
  return true;
}

MlpParams init_params(NetTag tag, int input_dim, std::uint64_t seed) {
  if (input_dim < 1) throw ShapeMismatchError("input_dim must be >= 1");
  MlpParams p;
  p.tag = tag;
  p.input_dim = input_dim;

  std::vector<int> sizes;
  const auto& hidden = tag == NetTag::policy ? kPolicyHidden : kValueHidden;
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(1);  // scalar head

  Rng rng(seed);
  int in = input_dim;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    Layer layer;
    layer.w = Matrix(sizes[l], in);
    layer.b.assign(static_cast<std::size_t>(sizes[l]), 0.0);
    layer.act = l + 1 == sizes.size() ? Activation::identity : Activation::tanh_fn;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + sizes[l]));
    for (double& v : layer.w.a) v = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
    in = sizes[l];
  }
  return p;
}

double mlp_forward(const MlpParams& params, std::span<const double> input, ForwardCache* cache) {
  if (static_cast<int>(input.size()) != params.input_dim) {
    throw ShapeMismatchError("mlp_forward input size " + std::to_string(input.size()) +
                             " != input_dim " + std::to_string(params.input_dim));
  }
  std::vector<double> cur(input.begin(), input.end());
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(cur);
  }
  for (const auto& layer : params.layers) {
    std::vector<double> next(static_cast<std::size_t>(layer.w.rows));
    for (int r = 0; r < layer.w.rows; ++r) {
      double z = layer.b[static_cast<std::size_t>(r)];
      const double* wrow = layer.w.a.data() + static_cast<std::size_t>(r) * layer.w.cols;
      for (int c = 0; c < layer.w.cols; ++c) z += wrow[c] * cur[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = activate(layer.act, z);
    }
    cur = std::move(next);
    if (cache) cache->acts.push_back(cur);
  }
  return cur[0];
}

void mlp_backward(const MlpParams& params, const ForwardCache& cache, double upstream,
                  GradientBuffer& grad) {
  if (cache.acts.size() != params.layers.size() + 1) {
    throw ShapeMismatchError("forward cache does not match network depth");
  }
  if (grad.dw.size() != params.layers.size()) {
    throw ShapeMismatchError("gradient buffer does not match network depth");
  }

  std::vector<double> delta = {upstream};  // dL/d(output activations)
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& out_act = cache.acts[l + 1];
    const auto& in_act = cache.acts[l];

    // through the activation
    std::vector<double> dz(out_act.size());
    for (std::size_t r = 0; r < out_act.size(); ++r) {
      dz[r] = delta[r] * activate_grad(layer.act, out_act[r]);
    }

    auto& dw = grad.dw[l];
    auto& db = grad.db[l];
    for (int r = 0; r < layer.w.rows; ++r) {
      const double d = dz[static_cast<std::size_t>(r)];
      db[static_cast<std::size_t>(r)] += d;
      double* dwrow = dw.a.data() + static_cast<std::size_t>(r) * dw.cols;
      for (int c = 0; c < layer.w.cols; ++c) dwrow[c] += d * in_act[static_cast<std::size_t>(c)];
    }

    if (l > 0) {
      std::vector<double> prev(in_act.size(), 0.0);
      for (int r = 0; r < layer.w.rows; ++r) {
        const double d = dz[static_cast<std::size_t>(r)];
        const double* wrow = layer.w.a.data() + static_cast<std::size_t>(r) * layer.w.cols;
        for (int c = 0; c < layer.w.cols; ++c) prev[static_cast<std::size_t>(c)] += d * wrow[c];
      }
      delta = std::move(prev);
    }
  }
}

std::size_t JobSlots::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid) n += v;
  return n;
}

JobSlots featurize(const DecisionPoint& decision, const FeatureConfig& config) {
  JobSlots slots;
  slots.window = config.window;
  slots.features.assign(static_cast<std::size_t>(config.window) * kFeatureDim, 0.0);
  slots.valid.assign(static_cast<std::size_t>(config.window), 0);

  const auto clip01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  const std::size_t n =
      std::min<std::size_t>(decision.observable_jobs.size(), static_cast<std::size_t>(config.window));
  for (std::size_t i = 0; i < n; ++i) {
    const JobRecord& job = decision.observable_jobs[i];
    double* f = slots.features.data() + i * kFeatureDim;
    const double wait = static_cast<double>(decision.clock - job.submit_time);
    const double tod = static_cast<double>(job.submit_time % 86400) / 86400.0;
    f[0] = clip01(wait / config.wait_clip);
    f[1] = clip01(static_cast<double>(job.requested_time) / config.max_walltime);
    f[2] = clip01(static_cast<double>(job.requested_procs) / std::max(config.max_procs, 1.0));
    f[3] = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * tod);
    f[4] = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * tod);
    f[5] = static_cast<double>(i) / static_cast<double>(config.window);
    f[6] = 1.0;
    slots.valid[i] = 1;
  }
  return slots;
}

PolicyForward policy_forward(const MlpParams& params, const JobSlots& slots, bool keep_caches) {
  if (params.input_dim != slots.feature_dim) {
    throw ShapeMismatchError("policy input_dim " + std::to_string(params.input_dim) +
                             " != feature_dim " + std::to_string(slots.feature_dim));
  }
  PolicyForward fwd;
  fwd.scores.assign(static_cast<std::size_t>(slots.window), 0.0);
  fwd.probs.assign(static_cast<std::size_t>(slots.window), 0.0);
  if (keep_caches) fwd.caches.resize(static_cast<std::size_t>(slots.window));

  double max_score = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < slots.window; ++i) {
    if (!slots.valid[static_cast<std::size_t>(i)]) continue;
    any = true;
    ForwardCache* cache = keep_caches ? &fwd.caches[static_cast<std::size_t>(i)] : nullptr;
    const double s = mlp_forward(params, slots.slot(i), cache);
    fwd.scores[static_cast<std::size_t>(i)] = s;
    max_score = std::max(max_score, s);
  }
  if (!any) throw NoValidJobsError("policy_forward with no valid job slots");

  // masked softmax; invalid slots stay exactly 0
  double denom = 0.0;
  for (int i = 0; i < slots.window; ++i) {
    if (!slots.valid[static_cast<std::size_t>(i)]) continue;
    const double e = std::exp(fwd.scores[static_cast<std::size_t>(i)] - max_score);
    fwd.probs[static_cast<std::size_t>(i)] = e;
    denom += e;
  }
  for (int i = 0; i < slots.window; ++i) {
    if (slots.valid[static_cast<std::size_t>(i)]) fwd.probs[static_cast<std::size_t>(i)] /= denom;
  }
  return fwd;
}

void policy_backward(const MlpParams& params, const JobSlots& slots, const PolicyForward& fwd,
                     std::span<const double> d_scores, GradientBuffer& grad) {
  if (static_cast<int>(d_scores.size()) != slots.window) {
    throw ShapeMismatchError("d_scores length != window");
  }
  if (fwd.caches.size() != static_cast<std::size_t>(slots.window)) {
    throw ShapeMismatchError("policy_backward requires caches from policy_forward(keep_caches)");
  }
  for (int i = 0; i < slots.window; ++i) {
    if (!slots.valid[static_cast<std::size_t>(i)]) continue;
    if (d_scores[static_cast<std::size_t>(i)] == 0.0) continue;
    mlp_backward(params, fwd.caches[static_cast<std::size_t>(i)],
                 d_scores[static_cast<std::size_t>(i)], grad);
  }
}

ValueForward value_forward(const MlpParams& params, const JobSlots& slots, bool keep_cache) {
  const std::size_t need = static_cast<std::size_t>(slots.window) * slots.feature_dim;
  if (static_cast<std::size_t>(params.input_dim) != need || slots.features.size() != need) {
    throw ShapeMismatchError("value input_dim " + std::to_string(params.input_dim) +
                             " != window*feature_dim " + std::to_string(need));
  }
  ValueForward out;
  out.value = mlp_forward(params, slots.features, keep_cache ? &out.cache : nullptr);
  return out;
}

void value_backward(const MlpParams& params, const JobSlots& slots, const ValueForward& fwd,
                    double upstream, GradientBuffer& grad) {
  (void)slots;
  mlp_backward(params, fwd.cache, upstream, grad);
}

double entropy(const PolicyForward& fwd) {
  double h = 0.0;
  for (double p : fwd.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> grad_log_prob_scores(const PolicyForward& fwd, std::size_t action) {
  if (action >= fwd.probs.size() || fwd.probs[action] <= 0.0) {
    throw ShapeMismatchError("action index does not point at a valid slot");
  }
  std::vector<double> g(fwd.probs.size(), 0.0);
  for (std::size_t j = 0; j < fwd.probs.size(); ++j) {
    if (fwd.probs[j] > 0.0) g[j] = (j == action ? 1.0 : 0.0) - fwd.probs[j];
  }
  return g;
}

std::vector<double> grad_entropy_scores(const PolicyForward& fwd) {
  const double h = entropy(fwd);
  std::vector<double> g(fwd.probs.size(), 0.0);
  for (std::size_t j = 0; j < fwd.probs.size(); ++j) {
    const double p = fwd.probs[j];
    if (p > 0.0) g[j] = -p * (std::log(p) + h);
  }
  return g;
}

// ---- checkpoint io ----

namespace {

nlohmann::json net_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["tag"] = p.tag == NetTag::policy ? "policy" : "value";
  j["input_dim"] = p.input_dim;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : p.layers) {
    nlohmann::json lj;
    lj["rows"] = l.w.rows;
    lj["cols"] = l.w.cols;
    lj["act"] = l.act == Activation::relu ? "relu"
                : l.act == Activation::tanh_fn ? "tanh"
                                               : "identity";
    lj["w"] = l.w.a;
    lj["b"] = l.b;
    layers.push_back(std::move(lj));
  }
  return j;
}

MlpParams net_from_json(const nlohmann::json& j) {
  MlpParams p;
  const std::string tag = j.at("tag").get<std::string>();
  p.tag = tag == "policy" ? NetTag::policy : NetTag::value;
  p.input_dim = j.at("input_dim").get<int>();

  int in = p.input_dim;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    l.w.rows = lj.at("rows").get<int>();
    l.w.cols = lj.at("cols").get<int>();
    const std::string act = lj.at("act").get<std::string>();
    l.act = act == "relu" ? Activation::relu
            : act == "tanh" ? Activation::tanh_fn
                            : Activation::identity;
    l.w.a = lj.at("w").get<std::vector<double>>();
    l.b = lj.at("b").get<std::vector<double>>();
    if (l.w.cols != in || l.w.a.size() != static_cast<std::size_t>(l.w.rows) * l.w.cols ||
        l.b.size() != static_cast<std::size_t>(l.w.rows)) {
      throw ShapeMismatchError("checkpoint layer shapes are inconsistent");
    }
    in = l.w.rows;
    p.layers.push_back(std::move(l));
  }
  if (in != 1) throw ShapeMismatchError("checkpoint network lacks a scalar head");

  // architecture contract per tag
  const auto& expect = p.tag == NetTag::policy ? kPolicyHidden : kValueHidden;
  if (p.layers.size() != 4) throw ShapeMismatchError("checkpoint layer count != 4");
  for (int l = 0; l < 3; ++l) {
    if (p.layers[static_cast<std::size_t>(l)].w.rows != expect[l]) {
      throw ShapeMismatchError("checkpoint hidden sizes do not match the architecture tag");
    }
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = "sched-forge-checkpoint-v1";
  j["policy"] = net_to_json(ckpt.policy);
  j["value"] = net_to_json(ckpt.value);
  j["meta"] = ckpt.meta_json.empty() ? nlohmann::json::object()
                                     : nlohmann::json::parse(ckpt.meta_json);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "sched-forge-checkpoint-v1") {
    throw IoError("unrecognized checkpoint format in '" + path + "'");
  }
  try {
    Checkpoint ckpt;
    ckpt.policy = net_from_json(j.at("policy"));
    ckpt.value = net_from_json(j.at("value"));
    ckpt.meta_json = j.value("meta", nlohmann::json::object()).dump();
    if (ckpt.policy.tag != NetTag::policy || ckpt.value.tag != NetTag::value) {
      throw ShapeMismatchError("checkpoint tags are swapped or missing");
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace schedforge
