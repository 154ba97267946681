// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Epsilon-prediction network: an MLP over [z, sinusoidal time features,
// concept embedding] with an explicit reverse pass and a masked AdamW.
//
// Batches are column-major: a batch of B states of dimension d is a d x B
// matrix. Every column carries its own timestep and concept id.

#pragma once

#include "ssrg/core.hpp"

#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssrg {

enum class Activation { silu, tanh };

struct NetworkShape {
  int input_dim = 2;
  std::vector<int> hidden{128, 128, 128};
  int time_embed_dim = 32;
  int concept_embed_dim = 16;
  int num_concepts = 8;  // embedding table has num_concepts + 1 rows; the last is the null token
  Activation activation = Activation::silu;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int input_width() const { return input_dim + time_embed_dim + concept_embed_dim; }
  int null_id() const { return num_concepts; }

  void validate() const {
    if (input_dim < 1 || time_embed_dim < 2 || time_embed_dim % 2 != 0 || concept_embed_dim < 1 || num_concepts < 1)
      throw ConfigError("network shape: dimensions must be positive (time_embed_dim even)");
    for (int h : hidden)
      if (h < 1) throw ConfigError("network shape: hidden widths must be >= 1");
  }

  bool operator==(const NetworkShape&) const = default;
};

struct Tensor {
  std::string name;
  Mat value;
};

/// Network weights. Tensor order: layer{i}.weight, layer{i}.bias for every
/// linear layer, then concept_embedding.
struct Parameters {
  NetworkShape shape;
  std::vector<Tensor> tensors;
  std::uint64_t version = 0;  // bumped by every optimizer update

  int tensor_count() const { return static_cast<int>(tensors.size()); }
  Mat& weight(int layer) { return tensors[static_cast<std::size_t>(2 * layer)].value; }
  const Mat& weight(int layer) const { return tensors[static_cast<std::size_t>(2 * layer)].value; }
  Mat& bias(int layer) { return tensors[static_cast<std::size_t>(2 * layer + 1)].value; }
  const Mat& bias(int layer) const { return tensors[static_cast<std::size_t>(2 * layer + 1)].value; }
  Mat& embedding() { return tensors.back().value; }
  const Mat& embedding() const { return tensors.back().value; }
  int embedding_index() const { return tensor_count() - 1; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors)
      if (!t.value.allFinite()) return false;
    return true;
  }

  /// Bitwise equality of every tensor (NaN payloads included).
  bool bit_equal(const Parameters& o) const {
    if (!(shape == o.shape) || tensors.size() != o.tensors.size()) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const Mat& a = tensors[i].value;
      const Mat& b = o.tensors[i].value;
      if (tensors[i].name != o.tensors[i].name || a.rows() != b.rows() || a.cols() != b.cols()) return false;
      if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) return false;
    }
    return true;
  }
};

inline Parameters zero_parameters(const NetworkShape& shape) {
  shape.validate();
  Parameters p;
  p.shape = shape;
  int fan_in = shape.input_width();
  for (int l = 0; l < shape.layer_count(); ++l) {
    const int fan_out = l + 1 < shape.layer_count() ? shape.hidden[static_cast<std::size_t>(l)] : shape.input_dim;
    p.tensors.push_back({"layer" + std::to_string(l) + ".weight", Mat::Zero(fan_out, fan_in)});
    p.tensors.push_back({"layer" + std::to_string(l) + ".bias", Mat::Zero(fan_out, 1)});
    fan_in = fan_out;
  }
  p.tensors.push_back({"concept_embedding", Mat::Zero(shape.num_concepts + 1, shape.concept_embed_dim)});
  return p;
}

/// Uniform(+-1/sqrt(fan_in)) for linear layers, N(0, 0.02^2) for embeddings.
inline Parameters init_parameters(const NetworkShape& shape, std::uint64_t seed) {
  Parameters p = zero_parameters(shape);
  Rng rng = make_rng(seed, 21);
  for (int l = 0; l < shape.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.weight(l).cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < p.weight(l).size(); ++i) p.weight(l).data()[i] = u(rng);
    for (Eigen::Index i = 0; i < p.bias(l).size(); ++i) p.bias(l).data()[i] = u(rng);
  }
  std::normal_distribution<double> n(0.0, 0.02);
  for (Eigen::Index i = 0; i < p.embedding().size(); ++i) p.embedding().data()[i] = n(rng);
  return p;
}

/// Sinusoidal features of an integer timestep: [sin(t f_k)..., cos(t f_k)...].
inline void time_features(int t, int dim, double* out) {
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(1000.0) * k / half);
    out[k] = std::sin(t * freq);
    out[k + half] = std::cos(t * freq);
  }
}

namespace detail {

inline void activate(Activation a, const Mat& pre, Mat& out) {
  if (a == Activation::silu)
    out = pre.array() / (1.0 + (-pre.array()).exp());
  else
    out = pre.array().tanh();
}

inline void activate_grad(Activation a, const Mat& pre, Mat& grad) {
  if (a == Activation::silu) {
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-pre.array()).exp());
    grad.array() *= s * (1.0 + pre.array() * (1.0 - s));
  } else {
    grad.array() *= 1.0 - pre.array().tanh().square();
  }
}

}  // namespace detail

/// Activation record for one forward pass. Valid only while the parameters it
/// was recorded against are alive and unmodified.
struct Tape {
  const Parameters* params = nullptr;
  std::uint64_t version = 0;
  Mat input;
  std::vector<Mat> pre;
  std::vector<Mat> act;
  std::vector<int> concepts;
};

struct GradientBuffer {
  std::vector<Mat> grads;

  static GradientBuffer zeros_like(const Parameters& p) {
    GradientBuffer g;
    for (const auto& t : p.tensors) g.grads.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    return g;
  }

  void add_scaled(const GradientBuffer& o, double s) {
    if (o.grads.size() != grads.size()) throw StructuralError("gradient buffers are not congruent");
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += s * o.grads[i];
  }
  GradientBuffer& operator+=(const GradientBuffer& o) {
    add_scaled(o, 1.0);
    return *this;
  }
  void set_zero() {
    for (auto& g : grads) g.setZero();
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& g : grads) s += g.squaredNorm();
    return s;
  }
  bool all_finite() const {
    for (const auto& g : grads)
      if (!g.allFinite()) return false;
    return true;
  }
};

namespace detail {

inline Mat forward_impl(const Parameters& params, const Mat& z, std::span<const int> timesteps,
                        std::span<const int> concepts, Tape* tape) {
  const NetworkShape& s = params.shape;
  const Eigen::Index batch = z.cols();
  if (z.rows() != s.input_dim) throw StructuralError("forward: state dimension does not match the network");
  if (static_cast<Eigen::Index>(timesteps.size()) != batch || static_cast<Eigen::Index>(concepts.size()) != batch)
    throw StructuralError("forward: need one timestep and one concept per column");
  if (params.tensor_count() != 2 * s.layer_count() + 1) throw StructuralError("forward: malformed parameters");

  Mat x(s.input_width(), batch);
  x.topRows(s.input_dim) = z;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int c = concepts[static_cast<std::size_t>(b)];
    if (c < 0 || c > s.num_concepts) throw StructuralError("forward: concept id out of range");
    time_features(timesteps[static_cast<std::size_t>(b)], s.time_embed_dim, x.col(b).data() + s.input_dim);
    x.col(b).tail(s.concept_embed_dim) = params.embedding().row(c).transpose();
  }

  const int layers = s.layer_count();
  Mat h = std::move(x);
  if (tape) {
    tape->params = &params;
    tape->version = params.version;
    tape->input = h;
    tape->pre.clear();
    tape->act.clear();
    tape->concepts.assign(concepts.begin(), concepts.end());
  }
  for (int l = 0; l + 1 < layers; ++l) {
    Mat pre = params.weight(l) * h;
    pre.colwise() += params.bias(l).col(0);
    activate(s.activation, pre, h);
    if (tape) {
      tape->pre.push_back(std::move(pre));
      tape->act.push_back(h);
    }
  }
  Mat out = params.weight(layers - 1) * h;
  out.colwise() += params.bias(layers - 1).col(0);
  return out;
}

}  // namespace detail

struct ForwardResult {
  Mat eps;
  Tape tape;
};

inline ForwardResult forward(const Parameters& params, const Mat& z, std::span<const int> timesteps,
                             std::span<const int> concepts) {
  ForwardResult r;
  r.eps = detail::forward_impl(params, z, timesteps, concepts, &r.tape);
  return r;
}

/// Forward pass without recording activations.
inline Mat predict(const Parameters& params, const Mat& z, std::span<const int> timesteps,
                   std::span<const int> concepts) {
  return detail::forward_impl(params, z, timesteps, concepts, nullptr);
}

/// Same timestep and concept for every column.
inline Mat predict(const Parameters& params, const Mat& z, int t, int c) {
  const std::vector<int> ts(static_cast<std::size_t>(z.cols()), t);
  const std::vector<int> cs(static_cast<std::size_t>(z.cols()), c);
  return predict(params, z, ts, cs);
}

inline ForwardResult forward(const Parameters& params, const Mat& z, int t, int c) {
  const std::vector<int> ts(static_cast<std::size_t>(z.cols()), t);
  const std::vector<int> cs(static_cast<std::size_t>(z.cols()), c);
  return forward(params, z, ts, cs);
}

/// Gradient of sum_b <upstream_b, eps_b> with respect to every parameter.
inline GradientBuffer backward(const Parameters& params, const Tape& tape, const Mat& upstream) {
  if (tape.params != &params || tape.version != params.version)
    throw StructuralError("backward: tape was recorded against different or since-modified parameters");
  const NetworkShape& s = params.shape;
  if (upstream.rows() != s.input_dim || upstream.cols() != tape.input.cols())
    throw StructuralError("backward: upstream shape does not match the forward batch");

  GradientBuffer g = GradientBuffer::zeros_like(params);
  const int layers = s.layer_count();
  Mat delta = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    const Mat& in = l == 0 ? tape.input : tape.act[static_cast<std::size_t>(l - 1)];
    g.grads[static_cast<std::size_t>(2 * l)].noalias() = delta * in.transpose();
    g.grads[static_cast<std::size_t>(2 * l + 1)] = delta.rowwise().sum();
    Mat down = params.weight(l).transpose() * delta;
    if (l > 0) detail::activate_grad(s.activation, tape.pre[static_cast<std::size_t>(l - 1)], down);
    delta = std::move(down);
  }
  Mat& ge = g.grads.back();
  const int offset = s.input_dim + s.time_embed_dim;
  for (Eigen::Index b = 0; b < delta.cols(); ++b)
    ge.row(tape.concepts[static_cast<std::size_t>(b)]) += delta.col(b).segment(offset, s.concept_embed_dim).transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Trainable subsets

struct TrainMask {
  std::vector<bool> trainable;

  static TrainMask all(const Parameters& p) { return {std::vector<bool>(p.tensors.size(), true)}; }
  static TrainMask none(const Parameters& p) { return {std::vector<bool>(p.tensors.size(), false)}; }

  bool any() const {
    for (bool b : trainable)
      if (b) return true;
    return false;
  }
};

/// Selectors: "all", "embedding", "output" (last linear layer), "hidden"
/// (every linear layer but the last), "layer<i>", or an exact tensor name.
inline TrainMask select_tensors(const Parameters& p, const std::vector<std::string>& selectors) {
  TrainMask m = TrainMask::none(p);
  const int layers = p.shape.layer_count();
  for (const auto& sel : selectors) {
    bool hit = false;
    for (int i = 0; i < p.tensor_count(); ++i) {
      const std::string& name = p.tensors[static_cast<std::size_t>(i)].name;
      const bool is_embed = i == p.embedding_index();
      const int layer = is_embed ? -1 : i / 2;
      bool take = sel == "all" || sel == name || (sel == "embedding" && is_embed) ||
                  (sel == "output" && layer == layers - 1) ||
                  (sel == "hidden" && !is_embed && layer < layers - 1) ||
                  (!is_embed && sel == "layer" + std::to_string(layer));
      if (take) {
        m.trainable[static_cast<std::size_t>(i)] = true;
        hit = true;
      }
    }
    if (!hit) throw ConfigError("trainable: selector '" + sel + "' matches no tensor");
  }
  return m;
}

// ---------------------------------------------------------------------------
// AdamW

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptimizerState {
  AdamWConfig config;
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::int64_t step = 0;

  static OptimizerState for_params(const Parameters& p, const AdamWConfig& cfg) {
    OptimizerState s;
    s.config = cfg;
    for (const auto& t : p.tensors) {
      s.m.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
      s.v.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    }
    return s;
  }
};

/// Decoupled weight decay followed by the bias-corrected Adam update. Tensors
/// outside the mask keep their values and moments untouched.
inline void adamw_step(Parameters& params, const GradientBuffer& grads, const TrainMask& mask,
                       OptimizerState& state) {
  const std::size_t n = params.tensors.size();
  if (grads.grads.size() != n || mask.trainable.size() != n || state.m.size() != n || state.v.size() != n)
    throw StructuralError("adamw_step: parameters, gradients, mask and state are not congruent");
  for (std::size_t i = 0; i < n; ++i) {
    const Mat& p = params.tensors[i].value;
    if (grads.grads[i].rows() != p.rows() || grads.grads[i].cols() != p.cols())
      throw StructuralError("adamw_step: gradient shape mismatch for " + params.tensors[i].name);
    if (mask.trainable[i] && !grads.grads[i].allFinite())
      throw NumericalError("adamw_step: non-finite gradient for " + params.tensors[i].name);
  }
  const AdamWConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.trainable[i]) continue;
    Mat& p = params.tensors[i].value;
    const Mat& g = grads.grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    if (c.weight_decay != 0.0) p *= 1.0 - c.lr * c.weight_decay;
    p.array() -= c.lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + c.eps);
  }
  params.version += 1;
}

}  // namespace ssrg
