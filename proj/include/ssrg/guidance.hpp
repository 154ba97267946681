// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Score composition: classifier-free guidance, class directions, and the
// percentile-masked explicit erasing signal built from instruction concepts.
//
// Two guidance conventions appear here. cfg_compose uses the offset form
// (1+g)*eps_c - g*eps_null, where g = 0 is the plain conditional. guided_eps
// uses the scale form eps_null + g*(eps_c - eps_null), where g = 1 is the
// plain conditional; this is the form the erasure rollout is written in.

#pragma once

#include "ssrg/core.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ssrg {

inline Mat cfg_compose(const Mat& eps_uncond, const Mat& eps_cond, double gamma) {
  if (eps_uncond.rows() != eps_cond.rows() || eps_uncond.cols() != eps_cond.cols())
    throw StructuralError("cfg_compose: length mismatch");
  return (1.0 + gamma) * eps_cond - gamma * eps_uncond;
}

/// eps(z, c) - eps(z, null): the scaled class-posterior score.
inline Mat class_direction(const Parameters& params, const Mat& z, int t, int c) {
  return predict(params, z, t, c) - predict(params, z, t, params.shape.null_id());
}

/// Nearest-rank percentile: element ceil(kappa*n)-1 of the ascending order.
inline double percentile_threshold(std::span<const double> values, double kappa) {
  if (values.empty()) throw StructuralError("percentile_threshold: empty input");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("percentile_threshold: kappa must lie in [0,1]");
  const auto n = static_cast<long>(values.size());
  // Guard against kappa*n landing one ulp above an integer.
  long rank = static_cast<long>(std::ceil(kappa * static_cast<double>(n) - 1e-9)) - 1;
  rank = std::clamp(rank, 0L, n - 1);
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + rank, v.end());
  return v[static_cast<std::size_t>(rank)];
}

struct InstructionConcept {
  int concept_id = 0;
  double guidance = 0.0;  // g_c, signed
  int t_high = 0;         // window bounds on the sampler index
  int t_low = 0;
  double kappa = 0.95;

  bool in_window(int index) const { return t_high <= index && index <= t_low; }
};

enum class WarmupMode {
  literal,  // active iff sampler index >= t_warmup
  sega      // skip the first t_warmup reverse iterations
};

struct WarmupRule {
  int t_warmup = 5;
  WarmupMode mode = WarmupMode::literal;

  bool active(const StepPoint& at) const {
    if (mode == WarmupMode::literal) return at.index >= t_warmup;
    return at.steps - at.index >= t_warmup;
  }
};

inline void validate_instructions(std::span<const InstructionConcept> instructions, int num_concepts, int steps) {
  for (const auto& ins : instructions) {
    if (ins.concept_id < 0 || ins.concept_id >= num_concepts)
      throw ConfigError("instruction: concept id " + std::to_string(ins.concept_id) + " is not a real concept");
    if (!(0 <= ins.t_high && ins.t_high <= ins.t_low && ins.t_low <= steps))
      throw ConfigError("instruction: require 0 <= t_high <= t_low <= T");
    if (!(ins.kappa >= 0.0 && ins.kappa <= 1.0)) throw ConfigError("instruction: kappa must lie in [0,1]");
    if (!std::isfinite(ins.guidance)) throw ConfigError("instruction: guidance weight must be finite");
  }
}

/// One instruction's contribution before weighting by g_c.
struct DeltaTerm {
  Mat direction;                                                   // Delta_c = eps(z,c) - eps(z,null)
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;         // beta
  int kept() const { return static_cast<int>(mask.count()); }
};

/// Per-instruction masked directions at one reverse step. The percentile is
/// taken per column over all d elements of |Delta_c|; elements at the
/// threshold are kept.
inline std::vector<DeltaTerm> delta_terms(const Parameters& teacher, const Mat& z, const StepPoint& at,
                                          std::span<const InstructionConcept> instructions,
                                          const WarmupRule& warmup, const Mat* eps_uncond = nullptr) {
  validate_instructions(instructions, teacher.shape.num_concepts, at.steps);
  std::vector<DeltaTerm> terms;
  if (instructions.empty()) return terms;
  Mat uncond_storage;
  if (!eps_uncond) {
    uncond_storage = predict(teacher, z, at.timestep, teacher.shape.null_id());
    eps_uncond = &uncond_storage;
  }
  const bool warm = warmup.active(at);
  std::vector<double> column(static_cast<std::size_t>(z.rows()));
  for (const auto& ins : instructions) {
    DeltaTerm term;
    term.mask.setConstant(z.rows(), z.cols(), false);
    if (warm && ins.in_window(at.index)) {
      term.direction = predict(teacher, z, at.timestep, ins.concept_id) - *eps_uncond;
      for (Eigen::Index b = 0; b < z.cols(); ++b) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) column[static_cast<std::size_t>(i)] = std::abs(term.direction(i, b));
        const double thr = percentile_threshold(column, ins.kappa);
        term.mask.col(b) = term.direction.col(b).array().abs() >= thr;
      }
    } else {
      term.direction = Mat::Zero(z.rows(), z.cols());
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

/// delta = sum_c g_c * beta_c * Delta_c, always evaluated with the frozen teacher.
inline Mat delta(const Parameters& teacher, const Mat& z, const StepPoint& at,
                 std::span<const InstructionConcept> instructions, const WarmupRule& warmup,
                 const Mat* eps_uncond = nullptr) {
  Mat out = Mat::Zero(z.rows(), z.cols());
  const auto terms = delta_terms(teacher, z, at, instructions, warmup, eps_uncond);
  for (std::size_t k = 0; k < terms.size(); ++k)
    out += instructions[k].guidance * terms[k].mask.select(terms[k].direction, 0.0);
  return out;
}

/// eps_null + gamma*(eps_c - eps_null) + delta, per column concept.
inline Mat guided_eps(const Parameters& params, const Mat& z, const StepPoint& at, std::span<const int> concepts,
                      double gamma, std::span<const InstructionConcept> instructions, const WarmupRule& warmup) {
  const std::vector<int> ts(static_cast<std::size_t>(z.cols()), at.timestep);
  const std::vector<int> nulls(static_cast<std::size_t>(z.cols()), params.shape.null_id());
  const Mat uncond = predict(params, z, ts, nulls);
  const Mat cond = predict(params, z, ts, concepts);
  Mat out = uncond + gamma * (cond - uncond);
  if (!instructions.empty()) out += delta(params, z, at, instructions, warmup, &uncond);
  return out;
}

/// Sampler closure in the offset convention of cfg_compose.
inline EpsFn cfg_eps_fn(const Parameters& params, double gamma) {
  return [&params, gamma](const Mat& z, const StepPoint& at, std::span<const int> concepts) {
    const std::vector<int> ts(static_cast<std::size_t>(z.cols()), at.timestep);
    const std::vector<int> nulls(static_cast<std::size_t>(z.cols()), params.shape.null_id());
    return cfg_compose(predict(params, z, ts, nulls), predict(params, z, ts, concepts), gamma);
  };
}

/// Sampler closure in the scale convention, optionally with an erasing signal.
inline EpsFn guided_eps_fn(const Parameters& params, double gamma,
                           std::vector<InstructionConcept> instructions = {}, WarmupRule warmup = {}) {
  return [&params, gamma, instructions = std::move(instructions), warmup](
             const Mat& z, const StepPoint& at, std::span<const int> concepts) {
    return guided_eps(params, z, at, concepts, gamma, instructions, warmup);
  };
}

}  // namespace ssrg
