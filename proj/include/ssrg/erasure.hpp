// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Concept-erasure objectives and the teacher-rollout fine-tuning loop.
//
// The student's class direction eps(z,c) - sg(eps(z,null)) is matched to the
// frozen teacher's direction shifted by the erasing signal, while a penalty
// anchors the student's unconditional prediction to the teacher's. The
// stop-gradient is realized by never backpropagating through the student's
// unconditional evaluation inside the concept loss.

#pragma once

#include "ssrg/core.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/guidance.hpp"
#include "ssrg/nnet.hpp"

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssrg {

enum class LossKind { ours, esd, sdd };
enum class ReplacementMode { delta, explicit_concept };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::ours: return "ours";
    case LossKind::esd: return "esd";
    case LossKind::sdd: return "sdd";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "ours") return LossKind::ours;
  if (s == "esd") return LossKind::esd;
  if (s == "sdd") return LossKind::sdd;
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

struct EraseConfig {
  std::vector<int> erase_set;
  std::vector<InstructionConcept> instructions;
  ReplacementMode replacement = ReplacementMode::delta;
  std::vector<int> replacement_concepts;  // one per erase_set entry, explicit mode only
  double gamma1 = 7.5;                     // teacher direction scale
  double gamma2 = 7.5;                     // student direction scale
  double lambda = 5.0;
  double slack = 0.0;
  int iterations = 200;
  int batch = 1;  // independent rollouts per iteration
  WarmupRule warmup;
  LossKind loss = LossKind::ours;
  double baseline_gamma = 1.0;  // negative-guidance scale of the esd target
  std::vector<std::string> trainable{"all"};
  AdamWConfig optimizer;
  int snapshot_every = 10;
  std::uint64_t seed = 0;

  void validate(int num_concepts, int steps) const {
    if (erase_set.empty()) throw ConfigError("erase.concepts: at least one concept to erase is required");
    for (int c : erase_set)
      if (c < 0 || c >= num_concepts) throw ConfigError("erase.concepts: id " + std::to_string(c) + " is invalid");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("erase.lambda: must be >= 0");
    if (slack != 0.0) throw ConfigError("erase.slack: only 0 is supported");
    if (iterations < 1) throw ConfigError("erase.iterations: must be >= 1");
    if (batch < 1) throw ConfigError("erase.batch: must be >= 1");
    if (warmup.t_warmup < 0 || warmup.t_warmup > steps) throw ConfigError("erase.warmup: must lie in [0, T]");
    if (replacement == ReplacementMode::explicit_concept) {
      if (replacement_concepts.size() != erase_set.size())
        throw ConfigError("erase.replacement: one replacement concept per erased concept is required");
      for (int c : replacement_concepts)
        if (c < 0 || c >= num_concepts) throw ConfigError("erase.replacement: invalid concept id");
    }
    validate_instructions(instructions, num_concepts, steps);
  }
};

struct LossBreakdown {
  double concept_term = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct LossGrad {
  double value = 0.0;
  GradientBuffer grad;
};

/// Target the student's scaled class direction is matched to.
inline Mat concept_target(const Parameters& teacher, const Mat& z, const StepPoint& at, int c,
                          const EraseConfig& cfg, std::optional<int> replacement = std::nullopt) {
  const Mat uncond = predict(teacher, z, at.timestep, teacher.shape.null_id());
  if (cfg.replacement == ReplacementMode::explicit_concept) {
    const int cp = replacement.value_or(c);
    return cfg.gamma1 * (predict(teacher, z, at.timestep, cp) - uncond);
  }
  Mat target = cfg.gamma1 * (predict(teacher, z, at.timestep, c) - uncond);
  if (!cfg.instructions.empty()) target += delta(teacher, z, at, cfg.instructions, cfg.warmup, &uncond);
  return target;
}

/// Mean over columns of || g2 (eps_s(z,c) - sg(eps_s(z,null))) - target ||^2.
/// Only the student's conditional evaluation is differentiated.
inline LossGrad concept_loss(const Parameters& student, const Parameters& teacher, const Mat& z,
                             const StepPoint& at, int c, const EraseConfig& cfg,
                             std::optional<int> replacement = std::nullopt) {
  const double batch = static_cast<double>(z.cols());
  const Mat target = concept_target(teacher, z, at, c, cfg, replacement);
  ForwardResult cond = forward(student, z, at.timestep, c);
  const Mat uncond_sg = predict(student, z, at.timestep, student.shape.null_id());
  const Mat residual = cfg.gamma2 * (cond.eps - uncond_sg) - target;
  LossGrad out;
  out.value = residual.squaredNorm() / batch;
  if (!std::isfinite(out.value)) throw NumericalError("concept_loss: non-finite loss");
  out.grad = backward(student, cond.tape, (2.0 * cfg.gamma2 / batch) * residual);
  return out;
}

/// Mean over columns of || eps_s(z,null) - eps_t(z,null) ||^2.
inline LossGrad penalty_loss(const Parameters& student, const Parameters& teacher, const Mat& z, int t) {
  const double batch = static_cast<double>(z.cols());
  ForwardResult su = forward(student, z, t, student.shape.null_id());
  const Mat tu = predict(teacher, z, t, teacher.shape.null_id());
  const Mat residual = su.eps - tu;
  LossGrad out;
  out.value = residual.squaredNorm() / batch;
  out.grad = backward(student, su.tape, (2.0 / batch) * residual);
  return out;
}

inline Mat baseline_target(LossKind kind, const Parameters& teacher, const Mat& z, int t, int c, double gamma) {
  const Mat uncond = predict(teacher, z, t, teacher.shape.null_id());
  switch (kind) {
    case LossKind::esd: return uncond - gamma * (predict(teacher, z, t, c) - uncond);
    case LossKind::sdd: return uncond;
    default: throw ConfigError("baseline_loss: kind must be esd or sdd");
  }
}

/// Mean over columns of || eps_s(z,c) - target ||^2 with a frozen-teacher target.
inline LossGrad baseline_loss(LossKind kind, const Parameters& student, const Parameters& teacher, const Mat& z,
                              int t, int c, double gamma) {
  const Mat target = baseline_target(kind, teacher, z, t, c, gamma);
  ForwardResult cond = forward(student, z, t, c);
  const Mat residual = cond.eps - target;
  const double batch = static_cast<double>(z.cols());
  LossGrad out;
  out.value = residual.squaredNorm() / batch;
  if (!std::isfinite(out.value)) throw NumericalError("baseline_loss: non-finite loss");
  out.grad = backward(student, cond.tape, (2.0 / batch) * residual);
  return out;
}

struct EraseIteration {
  int iteration = 0;
  int step_index = 0;  // sampled t in 1..T
  int timestep = 0;    // tau[t]
  int concept_id = 0;
  LossBreakdown loss;
};

struct Snapshot {
  int iteration = 0;  // number of completed updates
  Parameters params;
};

struct EraseRunLog {
  std::vector<EraseIteration> iterations;
  std::vector<Snapshot> snapshots;
};

struct EraseResult {
  Parameters student;
  EraseRunLog log;
};

/// Loss and gradient of one erasure objective at a rolled-out state.
struct StepObjective {
  LossBreakdown loss;
  GradientBuffer grad;
};

inline StepObjective erase_objective(const Parameters& student, const Parameters& teacher, const Mat& z,
                                     const StepPoint& at, int c, const EraseConfig& cfg,
                                     std::optional<int> replacement = std::nullopt) {
  StepObjective out;
  if (cfg.loss == LossKind::ours) {
    LossGrad lc = concept_loss(student, teacher, z, at, c, cfg, replacement);
    LossGrad lp = penalty_loss(student, teacher, z, at.timestep);
    out.loss = {lc.value, lp.value, lc.value + cfg.lambda * lp.value};
    out.grad = std::move(lc.grad);
    out.grad.add_scaled(lp.grad, cfg.lambda);
  } else {
    LossGrad lb = baseline_loss(cfg.loss, student, teacher, z, at.timestep, c, cfg.baseline_gamma);
    out.loss = {lb.value, 0.0, lb.value};
    out.grad = std::move(lb.grad);
  }
  if (!std::isfinite(out.loss.total)) throw NumericalError("erase: non-finite loss");
  return out;
}

/// Teacher rollout from z_T down to sampler index t under the guidance the
/// configured objective samples from.
inline Mat teacher_rollout(const Parameters& teacher, const EraseConfig& cfg, const NoiseSchedule& sched,
                           const SamplerConfig& sampler, int t, int c, std::optional<int> replacement, Rng& rng) {
  Mat z = randn(teacher.shape.input_dim, cfg.batch, rng);
  const bool explicit_mode = cfg.loss == LossKind::ours && cfg.replacement == ReplacementMode::explicit_concept;
  const std::vector<int> concepts(static_cast<std::size_t>(cfg.batch), explicit_mode ? replacement.value_or(c) : c);
  const bool with_delta = cfg.loss == LossKind::ours && !explicit_mode;
  const std::vector<InstructionConcept> none;
  const auto& ins = with_delta ? cfg.instructions : none;
  const EpsFn eps = [&](const Mat& zz, const StepPoint& at, std::span<const int> cs) {
    return guided_eps(teacher, zz, at, cs, cfg.gamma1, ins, cfg.warmup);
  };
  return reverse_steps(std::move(z), sampler.steps, t, concepts, eps, sched, sampler);
}

inline EraseResult erase_finetune(const Parameters& base, const EraseConfig& cfg, const NoiseSchedule& sched,
                                  const SamplerConfig& sampler) {
  cfg.validate(base.shape.num_concepts, sampler.steps);
  const Parameters teacher = base;
  EraseResult res;
  res.student = base;
  const TrainMask mask = select_tensors(res.student, cfg.trainable);
  if (!mask.any()) throw ConfigError("erase.trainable: no tensor selected");
  OptimizerState opt = OptimizerState::for_params(res.student, cfg.optimizer);

  std::uniform_int_distribution<int> tdist(1, sampler.steps);
  std::uniform_int_distribution<std::size_t> cdist(0, cfg.erase_set.size() - 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    Rng rng = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(it));
    const int t = tdist(rng);
    const std::size_t ci = cdist(rng);
    const int c = cfg.erase_set[ci];
    std::optional<int> replacement;
    if (cfg.replacement == ReplacementMode::explicit_concept) replacement = cfg.replacement_concepts[ci];

    const StepPoint at{t, sampler.timestep(t), sampler.steps};
    StepObjective obj;
    try {
      const Mat z = teacher_rollout(teacher, cfg, sched, sampler, t, c, replacement, rng);
      obj = erase_objective(res.student, teacher, z, at, c, cfg, replacement);
      adamw_step(res.student, obj.grad, mask, opt);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at iteration " + std::to_string(it));
    }
    if (!res.student.all_finite())
      throw NumericalError("erase: non-finite parameters after iteration " + std::to_string(it));
    res.log.iterations.push_back({it, t, at.timestep, c, obj.loss});
    if (cfg.snapshot_every > 0 && (it + 1) % cfg.snapshot_every == 0) res.log.snapshots.push_back({it + 1, res.student});
  }
  return res;
}

inline void write_erase_log_csv(const EraseRunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "iter,t,concept_loss,penalty_loss,total\n";
  char buf[160];
  for (const auto& r : log.iterations) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6g,%.6g\n", r.iteration, r.step_index, r.loss.concept_term,
                  r.loss.penalty, r.loss.total);
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ssrg
