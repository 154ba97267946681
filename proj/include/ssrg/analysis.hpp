// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics (oracle erasure rate, kernel two-sample drift, SSIM,
// same-seed consistency) and numerical checks of the KL-to-score-distance
// derivation behind the erasure objective.

#pragma once

#include "ssrg/core.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/guidance.hpp"
#include "ssrg/nnet.hpp"
#include "ssrg/toyworld.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ssrg {

using Classifier = std::function<Classification(const Vec&)>;

inline Classifier points_oracle(const PointMixtureSpec& spec) {
  return [spec](const Vec& x) { return bayes_classify(spec, Eigen::Vector2d(x(0), x(1))); };
}

/// Template classifier with the canonical templates rendered once.
inline Classifier glyph_oracle(const GlyphSpec& spec) {
  std::vector<Vec> centred;
  for (int c = 0; c < spec.size(); ++c) {
    Vec t = canonical_template(spec, c);
    t.array() -= t.mean();
    centred.push_back(t / t.norm());
  }
  return [centred](const Vec& image) {
    if (image.size() != GlyphSpec::pixels) throw StructuralError("glyph oracle: image must have 256 pixels");
    Classification out;
    const int k = static_cast<int>(centred.size());
    out.scores = Vec::Zero(k);
    const Vec a = image.array() - image.mean();
    const double na = a.norm();
    if (!(na > 1e-12)) return out;
    for (int c = 0; c < k; ++c)
      out.scores(c) = std::clamp(0.5 * (a.dot(centred[static_cast<std::size_t>(c)]) / na + 1.0), 0.0, 1.0);
    for (int c = 1; c < k; ++c)
      if (out.scores(c) > out.scores(out.id)) out.id = c;
    out.confidence = out.scores(out.id);
    return out;
  };
}

/// Fraction of columns the oracle assigns to `target` with confidence >= threshold.
inline double erasure_rate(const Mat& samples, int target, const Classifier& oracle, double threshold) {
  if (samples.cols() == 0) throw StructuralError("erasure_rate: empty batch");
  Eigen::Index hits = 0;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const Classification r = oracle(samples.col(j));
    if (r.id == target && r.confidence >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.cols());
}

/// Fraction of columns whose oracle label is `label` (no threshold).
inline double label_accuracy(const Mat& samples, int label, const Classifier& oracle) {
  return erasure_rate(samples, label, oracle, 0.0);
}

// ---------------------------------------------------------------------------
// Kernel two-sample drift

enum class KernelKind { polynomial, rbf, linear };

struct KernelSpec {
  KernelKind kind = KernelKind::polynomial;
  int degree = 3;
  double scale = 0.0;  // polynomial: 0 means 1/d
  double coef = 1.0;
  double bandwidth = 1.0;  // rbf

  static KernelSpec linear() { return {KernelKind::linear}; }
  static KernelSpec rbf(double bw) {
    KernelSpec k;
    k.kind = KernelKind::rbf;
    k.bandwidth = bw;
    return k;
  }
};

namespace detail {

inline Mat gram(const Mat& a, const Mat& b, const KernelSpec& k) {
  const Mat dot = a.transpose() * b;
  switch (k.kind) {
    case KernelKind::linear: return dot;
    case KernelKind::polynomial: {
      const double s = k.scale > 0.0 ? k.scale : 1.0 / static_cast<double>(a.rows());
      return (s * dot.array() + k.coef).pow(k.degree).matrix();
    }
    case KernelKind::rbf: {
      const Vec na = a.colwise().squaredNorm().transpose();
      const Vec nb = b.colwise().squaredNorm().transpose();
      Mat d2 = (-2.0 * dot).colwise() + na;
      d2.rowwise() += nb.transpose();
      return (-d2.array().max(0.0) / (2.0 * k.bandwidth * k.bandwidth)).exp().matrix();
    }
  }
  return dot;
}

}  // namespace detail

/// Unbiased MMD^2 between the column sets X and Y.
inline double mmd2(const Mat& x, const Mat& y, const KernelSpec& kernel) {
  if (x.rows() != y.rows()) throw StructuralError("mmd2: dimension mismatch");
  if (x.cols() < 2 || y.cols() < 2) throw StructuralError("mmd2: need at least two samples per set");
  const double m = static_cast<double>(x.cols());
  const double n = static_cast<double>(y.cols());
  const Mat kxx = detail::gram(x, x, kernel);
  const Mat kyy = detail::gram(y, y, kernel);
  const Mat kxy = detail::gram(x, y, kernel);
  const double sxx = kxx.sum() - kxx.trace();
  const double syy = kyy.sum() - kyy.trace();
  return sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * kxy.sum() / (m * n);
}

/// Median pairwise distance over the pooled sample.
inline double median_bandwidth(const Mat& x, const Mat& y) {
  Mat pooled(x.rows(), x.cols() + y.cols());
  pooled << x, y;
  const Eigen::Index n = std::min<Eigen::Index>(pooled.cols(), 1000);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((pooled.col(i) - pooled.col(j)).norm());
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

// ---------------------------------------------------------------------------
// SSIM

/// Mean SSIM over every window x window placement, uniform weights and
/// population moments; dynamic range L = 1.
inline double ssim(const Mat& a, const Mat& b, int window) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw StructuralError("ssim: shape mismatch");
  if (window < 1 || window > a.rows() || window > a.cols()) throw StructuralError("ssim: window does not fit");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const double np = double(window) * window;
  double total = 0.0;
  int count = 0;
  for (Eigen::Index r = 0; r + window <= a.rows(); ++r) {
    for (Eigen::Index c = 0; c + window <= a.cols(); ++c) {
      const auto wa = a.block(r, c, window, window).array();
      const auto wb = b.block(r, c, window, window).array();
      const double ma = wa.sum() / np;
      const double mb = wb.sum() / np;
      const double va = (wa * wa).sum() / np - ma * ma;
      const double vb = (wb * wb).sum() / np - mb * mb;
      const double cov = (wa * wb).sum() / np - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

inline double ssim_glyph(const Vec& a, const Vec& b, int window = 7) {
  if (a.size() != GlyphSpec::pixels || b.size() != GlyphSpec::pixels) throw StructuralError("ssim: need 16x16 images");
  constexpr int n = GlyphSpec::resolution;
  // row-major pixel order
  const Mat ma = Eigen::Map<const Eigen::Matrix<double, n, n, Eigen::RowMajor>>(a.data());
  const Mat mb = Eigen::Map<const Eigen::Matrix<double, n, n, Eigen::RowMajor>>(b.data());
  return ssim(ma, mb, window);
}

// ---------------------------------------------------------------------------
// Same-seed consistency

/// Similarity of paired columns: SSIM for glyphs, negative L2 distance for points.
inline double paired_similarity(DataMode mode, const Vec& a, const Vec& b, int ssim_window = 7) {
  if (mode == DataMode::glyphs16) return ssim_glyph(a, b, ssim_window);
  return -(a - b).norm();
}

/// Per-concept mean similarity between same-seed samples of two samplers.
inline std::vector<double> seed_consistency(const EpsFn& model_a, const EpsFn& model_b, int dim, DataMode mode,
                                            const NoiseSchedule& sched, const SamplerConfig& sampler,
                                            std::span<const int> concepts, std::span<const std::uint64_t> seeds,
                                            int ssim_window = 7) {
  if (seeds.empty()) throw ConfigError("seed_consistency: need at least one seed");
  std::vector<double> out;
  for (int c : concepts) {
    const std::vector<int> cs(seeds.size(), c);
    const Mat sa = sample_batch(sched, sampler, dim, cs, model_a, seeds);
    const Mat sb = sample_batch(sched, sampler, dim, cs, model_b, seeds);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < sa.cols(); ++j) acc += paired_similarity(mode, sa.col(j), sb.col(j), ssim_window);
    out.push_back(acc / static_cast<double>(sa.cols()));
  }
  return out;
}

inline std::vector<double> seed_consistency(const Parameters& a, const Parameters& b, double gamma, DataMode mode,
                                            const NoiseSchedule& sched, const SamplerConfig& sampler,
                                            std::span<const int> concepts, std::span<const std::uint64_t> seeds,
                                            int ssim_window = 7) {
  if (!(a.shape == b.shape)) throw ConfigError("seed_consistency: models do not share a network shape and vocab");
  return seed_consistency(guided_eps_fn(a, gamma), guided_eps_fn(b, gamma), a.shape.input_dim, mode, sched, sampler,
                          concepts, seeds, ssim_window);
}

// ---------------------------------------------------------------------------
// Reports

struct MetricReport {
  std::string method;
  std::vector<std::string> concepts;
  std::vector<double> erasure_rate;
  std::vector<double> drift;        // MMD^2 against the reference model
  std::vector<double> consistency;  // same-seed similarity against the reference model
  int samples_per_concept = 0;
  std::vector<std::uint64_t> seeds;
  int target = -1;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["concepts"] = concepts;
    j["erasure_rate"] = erasure_rate;
    j["drift"] = drift;
    j["consistency"] = consistency;
    j["samples_per_concept"] = samples_per_concept;
    j["seeds"] = seeds;
    j["target"] = target;
    return j;
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
      r.method = j.at("method").get<std::string>();
      r.concepts = j.at("concepts").get<std::vector<std::string>>();
      r.erasure_rate = j.at("erasure_rate").get<std::vector<double>>();
      r.drift = j.at("drift").get<std::vector<double>>();
      r.consistency = j.at("consistency").get<std::vector<double>>();
      r.samples_per_concept = j.at("samples_per_concept").get<int>();
      r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      r.target = j.at("target").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("metrics: ") + e.what());
    }
    return r;
  }
};

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_metric_csv(const MetricReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "concept,erasure_rate,drift,consistency\n";
  for (std::size_t i = 0; i < r.concepts.size(); ++i)
    out << r.concepts[i] << ',' << fmt6(r.erasure_rate[i]) << ',' << fmt6(r.drift[i]) << ','
        << fmt6(r.consistency[i]) << '\n';
}

// ---------------------------------------------------------------------------
// Theory checks

struct LossWeights {
  double w = 0.0;
  double w_prime = 0.0;
};

inline LossWeights loss_weights(double alpha_t, double alpha_bar_t, double alpha_bar_prev) {
  LossWeights lw;
  lw.w_prime = 2.0 * (1.0 - alpha_bar_t) / ((1.0 - alpha_t) * (1.0 - alpha_bar_prev));
  lw.w = 2.0 * (1.0 - alpha_bar_t) * (1.0 - alpha_t) * (1.0 - alpha_t) /
         ((1.0 - alpha_t) * (1.0 - alpha_bar_prev) * alpha_t);
  return lw;
}

inline LossWeights loss_weights(int t, const NoiseSchedule& sched) {
  if (t < 2 || t > sched.t_train) throw ConfigError("loss_weights: t must lie in [2, T_train]");
  return loss_weights(sched.alpha(t), sched.alpha_bar(t), sched.alpha_bar(t - 1));
}

/// KL(N(mu1, s2 I) || N(mu2, s2 I)).
inline double kl_guided_gaussians(const Vec& mu1, const Vec& mu2, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("kl_guided_gaussians: variance must be positive");
  if (mu1.size() != mu2.size()) throw StructuralError("kl_guided_gaussians: dimension mismatch");
  return (mu1 - mu2).squaredNorm() / (2.0 * sigma2);
}

/// Sample mean of log N(x; mu1) - log N(x; mu2) over x ~ N(mu1, s2 I).
inline double kl_monte_carlo(const Vec& mu1, const Vec& mu2, double sigma2, int draws, std::uint64_t seed) {
  if (!(sigma2 > 0.0) || draws < 1) throw ConfigError("kl_monte_carlo: need sigma2 > 0 and draws >= 1");
  if (mu1.size() != mu2.size()) throw StructuralError("kl_monte_carlo: dimension mismatch");
  Rng rng = make_rng(seed, 61);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double s = std::sqrt(sigma2);
  double acc = 0.0;
  Vec x(mu1.size());
  for (int i = 0; i < draws; ++i) {
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = mu1(k) + s * n01(rng);
    acc += ((x - mu2).squaredNorm() - (x - mu1).squaredNorm()) / (2.0 * sigma2);
  }
  return acc / draws;
}

struct KlProbe {
  Vec z;
  int t = 2;  // diffusion timestep
  int c = 0;         // student condition
  int c_prime = 0;   // teacher condition
  double gamma1 = 7.5;
  double gamma2 = 7.5;
};

struct KlProbeResult {
  double kl = 0.0;               // closed form over the guided transition means
  double weighted_distance = 0.0;  // w(t) * ||s_teacher - s_student||^2
  double decomposition_error = 0.0;
  double norm_unconditional = 0.0;  // ||L_U||
  double norm_conditional = 0.0;    // ||L_C||
  double norm_total = 0.0;          // ||L_U + L_C||
};

struct KlChainReport {
  std::vector<KlProbeResult> probes;
  double max_relative_discrepancy = 0.0;
  double max_decomposition_error = 0.0;
  bool triangle_holds = true;
};

namespace detail {

// Guided score -(eps_null + g (eps_c - eps_null)) / sigma_t and its parts.
struct GuidedScore {
  Vec uncond;
  Vec cond;
  Vec guided;
};

inline GuidedScore guided_score(const Parameters& p, const Vec& z, int t, int c, double gamma,
                                const NoiseSchedule& sched) {
  const double s = sched.sigma(t);
  GuidedScore g;
  g.uncond = -predict(p, z, t, p.shape.null_id()).col(0) / s;
  g.cond = -predict(p, z, t, c).col(0) / s;
  g.guided = g.uncond + gamma * (g.cond - g.uncond);
  return g;
}

}  // namespace detail

/// Evaluates the teacher/student guided reverse transitions two ways: the
/// Gaussian KL of their means (shared variance 1/(2 w'(t))) and the
/// loss-weighted score distance, and splits the score residual into its
/// unconditional and conditional parts.
inline KlChainReport kl_chain_check(const Parameters& teacher, const Parameters& student, const NoiseSchedule& sched,
                                    std::span<const KlProbe> probes) {
  if (!(teacher.shape == student.shape)) throw ConfigError("kl_chain_check: models do not share a shape");
  KlChainReport rep;
  for (const auto& pr : probes) {
    const LossWeights lw = loss_weights(pr.t, sched);
    const double a = sched.alpha(pr.t);
    const auto gt = detail::guided_score(teacher, pr.z, pr.t, pr.c_prime, pr.gamma1, sched);
    const auto gs = detail::guided_score(student, pr.z, pr.t, pr.c, pr.gamma2, sched);
    const Vec mu_t = pr.z / std::sqrt(a) + (1.0 - a) / std::sqrt(a) * gt.guided;
    const Vec mu_s = pr.z / std::sqrt(a) + (1.0 - a) / std::sqrt(a) * gs.guided;

    KlProbeResult r;
    r.kl = kl_guided_gaussians(mu_t, mu_s, 1.0 / (2.0 * lw.w_prime));
    const Vec residual = gt.guided - gs.guided;
    r.weighted_distance = lw.w * residual.squaredNorm();
    const Vec lu = gt.uncond - gs.uncond;
    const Vec lc = pr.gamma1 * (gt.cond - gt.uncond) - pr.gamma2 * (gs.cond - gs.uncond);
    r.decomposition_error = (residual - (lu + lc)).lpNorm<Eigen::Infinity>();
    r.norm_unconditional = lu.norm();
    r.norm_conditional = lc.norm();
    r.norm_total = (lu + lc).norm();

    const double scale = std::max({std::abs(r.kl), std::abs(r.weighted_distance), 1e-300});
    const double rel = r.kl == r.weighted_distance ? 0.0 : std::abs(r.kl - r.weighted_distance) / scale;
    rep.max_relative_discrepancy = std::max(rep.max_relative_discrepancy, rel);
    const double res_scale = std::max(residual.lpNorm<Eigen::Infinity>(), 1.0);
    rep.max_decomposition_error = std::max(rep.max_decomposition_error, r.decomposition_error / res_scale);
    if (r.norm_total > (r.norm_unconditional + r.norm_conditional) * (1.0 + 1e-12)) rep.triangle_holds = false;
    rep.probes.push_back(r);
  }
  return rep;
}

/// Number of random residual pairs violating ||u + c|| <= ||u|| + ||c||.
inline int triangle_violations(int pairs, int dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, 51);
  std::uniform_real_distribution<double> scale(-3.0, 3.0);
  int bad = 0;
  for (int i = 0; i < pairs; ++i) {
    const Vec u = randn(dim, 1, rng).col(0) * std::pow(10.0, scale(rng));
    const Vec c = randn(dim, 1, rng).col(0) * std::pow(10.0, scale(rng));
    if ((u + c).norm() > (u.norm() + c.norm()) * (1.0 + 1e-12)) ++bad;
  }
  return bad;
}

}  // namespace ssrg
