// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic concept worlds: labeled 2-D Gaussian mixtures and 16x16 glyph
// images, together with the analytic oracles used to score generated samples.

#pragma once

#include "ssrg/core.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ssrg {

enum class DataMode { points2d, glyphs16 };

inline std::string to_string(DataMode m) { return m == DataMode::points2d ? "points2d" : "glyphs16"; }

inline DataMode parse_data_mode(std::string_view s) {
  if (s == "points2d") return DataMode::points2d;
  if (s == "glyphs16") return DataMode::glyphs16;
  throw ConfigError("unknown data mode '" + std::string(s) + "'");
}

/// Ordered concept names. Ids are dense 0..K-1; the unconditional token uses id K.
class ConceptVocab {
 public:
  ConceptVocab() = default;
  explicit ConceptVocab(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty() || names_[i] == "null")
        throw ConfigError("vocab: concept name '" + names_[i] + "' is reserved or empty");
      for (std::size_t j = 0; j < i; ++j)
        if (names_[i] == names_[j]) throw ConfigError("vocab: duplicate concept '" + names_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  int null_id() const { return size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool valid(int id) const { return id >= 0 && id <= null_id(); }

  const std::string& name(int id) const {
    static const std::string null_name = "null";
    if (id == null_id()) return null_name;
    if (id < 0 || id > null_id()) throw ConfigError("vocab: concept id " + std::to_string(id) + " out of range");
    return names_[static_cast<std::size_t>(id)];
  }

  int id_of(std::string_view name) const {
    if (name == "null") return null_id();
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    throw ConfigError("vocab: unknown concept '" + std::string(name) + "'");
  }

  bool operator==(const ConceptVocab&) const = default;

 private:
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Point mixtures

struct PointMixtureSpec {
  std::vector<Eigen::Vector2d> means;
  double sigma = 0.15;
  std::vector<double> weights;

  int size() const { return static_cast<int>(means.size()); }

  void validate() const {
    if (means.empty()) throw ConfigError("point mixture: no component means");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("point mixture: sigma must be positive");
    if (weights.size() != means.size()) throw ConfigError("point mixture: one weight per mean required");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ConfigError("point mixture: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("point mixture: weights must sum to 1");
  }
};

/// K equal-weight components evenly spaced on a circle.
inline PointMixtureSpec ring_mixture(int k = 8, double radius = 1.0, double sigma = 0.15) {
  PointMixtureSpec spec;
  spec.sigma = sigma;
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * i / k;
    spec.means.emplace_back(radius * std::cos(a), radius * std::sin(a));
    spec.weights.push_back(1.0 / k);
  }
  return spec;
}

inline std::vector<std::string> ring_names(int k) {
  if (k == 8) return {"east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast"};
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("p" + std::to_string(i));
  return names;
}

// ---------------------------------------------------------------------------
// Glyphs

enum class ShapeKind { circle, square, cross, triangle, stripes };

inline ShapeKind parse_shape_kind(std::string_view s) {
  if (s == "circle") return ShapeKind::circle;
  if (s == "square") return ShapeKind::square;
  if (s == "cross") return ShapeKind::cross;
  if (s == "triangle") return ShapeKind::triangle;
  if (s == "stripes") return ShapeKind::stripes;
  throw ConfigError("glyphs: unknown shape kind '" + std::string(s) + "'");
}

inline std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::square: return "square";
    case ShapeKind::cross: return "cross";
    case ShapeKind::triangle: return "triangle";
    case ShapeKind::stripes: return "stripes";
  }
  return "?";
}

struct GlyphSpec {
  static constexpr int resolution = 16;
  static constexpr int pixels = resolution * resolution;
  std::vector<ShapeKind> shapes{ShapeKind::circle, ShapeKind::square, ShapeKind::cross, ShapeKind::triangle,
                                ShapeKind::stripes};
  double jitter_position = 1.0;  // pixels, uniform in [-j, j] per axis
  double jitter_scale = 0.1;     // relative, uniform in [1-j, 1+j]
  double intensity_min = 0.8;
  double intensity_max = 1.0;

  int size() const { return static_cast<int>(shapes.size()); }

  void validate() const {
    if (shapes.empty()) throw ConfigError("glyphs: no shape kinds");
    if (jitter_position < 0.0 || jitter_scale < 0.0 || jitter_scale >= 1.0)
      throw ConfigError("glyphs: jitter out of range");
    if (!(0.0 <= intensity_min && intensity_min <= intensity_max && intensity_max <= 1.0))
      throw ConfigError("glyphs: intensity range must lie in [0,1]");
  }
};

namespace detail {

// Membership test in shape-local coordinates (pixels, origin at the glyph centre).
inline bool inside(ShapeKind kind, double u, double v) {
  switch (kind) {
    case ShapeKind::circle: {
      const double r = std::hypot(u, v);
      return r >= 3.5 && r <= 5.6;
    }
    case ShapeKind::square: {
      const double m = std::max(std::abs(u), std::abs(v));
      return m >= 3.6 && m <= 5.6;
    }
    case ShapeKind::cross:
      return (std::abs(u) <= 1.3 && std::abs(v) <= 6.0) || (std::abs(v) <= 1.3 && std::abs(u) <= 6.0);
    case ShapeKind::triangle: {
      // apex up, base at v = 4.8
      if (v < -5.6 || v > 4.8) return false;
      const double half = (v + 5.6) * (5.8 / 10.4);
      return std::abs(u) <= half;
    }
    case ShapeKind::stripes: {
      if (std::abs(u) > 6.0 || std::abs(v) > 6.0) return false;
      const int band = static_cast<int>(std::floor((v + 6.0) / 2.4));
      return band % 2 == 0;
    }
  }
  return false;
}

}  // namespace detail

/// Renders one glyph with 4x4 supersampled coverage; values lie in [0, intensity].
inline Vec render_glyph(ShapeKind kind, double dx = 0.0, double dy = 0.0, double scale = 1.0,
                        double intensity = 1.0) {
  constexpr int n = GlyphSpec::resolution;
  constexpr int ss = 4;
  const double centre = 0.5 * (n - 1);
  Vec img(GlyphSpec::pixels);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      int hits = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double x = col - 0.5 + (sx + 0.5) / ss;
          const double y = row - 0.5 + (sy + 0.5) / ss;
          const double u = (x - centre - dx) / scale;
          const double v = (y - centre - dy) / scale;
          hits += detail::inside(kind, u, v) ? 1 : 0;
        }
      }
      img(row * n + col) = intensity * hits / double(ss * ss);
    }
  }
  return img;
}

inline Vec canonical_template(const GlyphSpec& spec, int concept_id) {
  if (concept_id < 0 || concept_id >= spec.size()) throw ConfigError("glyphs: concept id out of range");
  return render_glyph(spec.shapes[static_cast<std::size_t>(concept_id)]);
}

// ---------------------------------------------------------------------------
// Datasets

/// Labeled samples, one sample per column (d x n).
struct Dataset {
  Mat samples;
  std::vector<int> labels;
  DataMode mode = DataMode::points2d;

  int dim() const { return static_cast<int>(samples.rows()); }
  int size() const { return static_cast<int>(samples.cols()); }
  bool operator==(const Dataset& o) const {
    return mode == o.mode && labels == o.labels && samples.rows() == o.samples.rows() &&
           samples.cols() == o.samples.cols() && samples == o.samples;
  }
};

inline Dataset gen_points2d(const PointMixtureSpec& spec, int n_per_concept, std::uint64_t seed) {
  spec.validate();
  if (n_per_concept < 1) throw ConfigError("gen_points2d: n_per_concept must be >= 1");
  Rng rng = make_rng(seed, 11);
  std::normal_distribution<double> n01(0.0, 1.0);
  Dataset ds;
  ds.mode = DataMode::points2d;
  const int k = spec.size();
  ds.samples.resize(2, static_cast<Eigen::Index>(k) * n_per_concept);
  ds.labels.reserve(static_cast<std::size_t>(k) * n_per_concept);
  Eigen::Index col = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < n_per_concept; ++i, ++col) {
      ds.samples(0, col) = spec.means[c].x() + spec.sigma * n01(rng);
      ds.samples(1, col) = spec.means[c].y() + spec.sigma * n01(rng);
      ds.labels.push_back(c);
    }
  }
  return ds;
}

inline Dataset gen_glyphs(const GlyphSpec& spec, int n_per_concept, std::uint64_t seed) {
  spec.validate();
  if (n_per_concept < 1) throw ConfigError("gen_glyphs: n_per_concept must be >= 1");
  Rng rng = make_rng(seed, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  Dataset ds;
  ds.mode = DataMode::glyphs16;
  const int k = spec.size();
  ds.samples.resize(GlyphSpec::pixels, static_cast<Eigen::Index>(k) * n_per_concept);
  Eigen::Index col = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < n_per_concept; ++i, ++col) {
      const double dx = between(-spec.jitter_position, spec.jitter_position);
      const double dy = between(-spec.jitter_position, spec.jitter_position);
      const double sc = between(1.0 - spec.jitter_scale, 1.0 + spec.jitter_scale);
      const double in = between(spec.intensity_min, spec.intensity_max);
      ds.samples.col(col) = render_glyph(spec.shapes[static_cast<std::size_t>(c)], dx, dy, sc, in);
      ds.labels.push_back(c);
    }
  }
  return ds;
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "label";
  for (int j = 0; j < ds.dim(); ++j) out << ",x" << j;
  out << '\n';
  char buf[32];
  for (int i = 0; i < ds.size(); ++i) {
    out << ds.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.samples(j, i));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw FormatError(path + ": missing CSV header");
  const int dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (dim != 2 && dim != GlyphSpec::pixels) throw FormatError(path + ": unsupported sample dimension");
  std::vector<int> labels;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    labels.push_back(std::stoi(cell));
    int count = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    if (count != dim) throw FormatError(path + ": ragged row " + std::to_string(labels.size()));
  }
  Dataset ds;
  ds.mode = dim == 2 ? DataMode::points2d : DataMode::glyphs16;
  ds.labels = std::move(labels);
  ds.samples = Eigen::Map<Mat>(values.data(), dim, static_cast<Eigen::Index>(ds.labels.size()));
  return ds;
}

// ---------------------------------------------------------------------------
// Oracles

/// Log-density of the mixture after forward diffusion to noise level alpha_bar
/// (alpha_bar = 1, or absent, is the clean mixture).
inline double mixture_log_density(const PointMixtureSpec& spec, const Eigen::Vector2d& x,
                                  std::optional<double> alpha_bar = std::nullopt) {
  const double ab = alpha_bar.value_or(1.0);
  const double var = ab * spec.sigma * spec.sigma + (1.0 - ab);
  const double scale = std::sqrt(ab);
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(spec.means.size());
  for (std::size_t k = 0; k < spec.means.size(); ++k) {
    const double d2 = (x - scale * spec.means[k]).squaredNorm();
    terms[k] = std::log(spec.weights[k]) - 0.5 * d2 / var - std::log(2.0 * std::numbers::pi * var);
    max_term = std::max(max_term, terms[k]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - max_term);
  return max_term + std::log(s);
}

inline Eigen::Vector2d mixture_log_density_grad(const PointMixtureSpec& spec, const Eigen::Vector2d& x,
                                                std::optional<double> alpha_bar = std::nullopt) {
  spec.validate();
  const double ab = alpha_bar.value_or(1.0);
  if (!(ab > 0.0 && ab <= 1.0)) throw ConfigError("mixture score: alpha_bar must lie in (0, 1]");
  const double var = ab * spec.sigma * spec.sigma + (1.0 - ab);
  const double scale = std::sqrt(ab);
  std::vector<double> logr(spec.means.size());
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < spec.means.size(); ++k) {
    logr[k] = std::log(spec.weights[k]) - 0.5 * (x - scale * spec.means[k]).squaredNorm() / var;
    max_term = std::max(max_term, logr[k]);
  }
  double norm = 0.0;
  for (double& l : logr) norm += (l = std::exp(l - max_term));
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < spec.means.size(); ++k) g -= (logr[k] / norm) * (x - scale * spec.means[k]) / var;
  return g;
}

struct Classification {
  int id = 0;
  double confidence = 0.0;
  Vec scores;  // posterior (points) or per-concept confidence (glyphs)
};

inline Classification bayes_classify(const PointMixtureSpec& spec, const Eigen::Vector2d& x) {
  const int k = spec.size();
  Vec logp(k);
  for (int i = 0; i < k; ++i)
    logp(i) = std::log(spec.weights[static_cast<std::size_t>(i)]) -
              0.5 * (x - spec.means[static_cast<std::size_t>(i)]).squaredNorm() / (spec.sigma * spec.sigma);
  const double m = logp.maxCoeff();
  Vec post = (logp.array() - m).exp();
  post /= post.sum();
  Classification out;
  out.scores = post;
  out.id = 0;
  for (int i = 1; i < k; ++i)
    if (post(i) > post(out.id)) out.id = i;
  out.confidence = post(out.id);
  return out;
}

/// Confidence is the best normalized cross-correlation mapped from [-1,1] to [0,1].
inline Classification template_classify(const GlyphSpec& spec, const Vec& image) {
  if (image.size() != GlyphSpec::pixels) throw StructuralError("template_classify: image must have 256 pixels");
  const int k = spec.size();
  Classification out;
  out.scores = Vec::Zero(k);
  const Vec a = image.array() - image.mean();
  const double na = a.norm();
  if (!(na > 1e-12)) return out;
  for (int c = 0; c < k; ++c) {
    const Vec tpl = canonical_template(spec, c);
    const Vec b = tpl.array() - tpl.mean();
    const double ncc = a.dot(b) / (na * b.norm());
    out.scores(c) = std::clamp(0.5 * (ncc + 1.0), 0.0, 1.0);
  }
  for (int c = 1; c < k; ++c)
    if (out.scores(c) > out.scores(out.id)) out.id = c;
  out.confidence = out.scores(out.id);
  return out;
}

}  // namespace ssrg
