// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Noise schedules, forward diffusion, epsilon-matching training with
// label dropout, and the deterministic DDIM sampler / inverter.

#pragma once

#include "ssrg/core.hpp"
#include "ssrg/nnet.hpp"
#include "ssrg/toyworld.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ssrg {

/// Tables indexed by diffusion timestep 0..T_train. Index 0 is the clean
/// state (alpha_bar = 1, sigma = 0); beta and alpha are unused there.
struct NoiseSchedule {
  int t_train = 0;
  Vec beta;
  Vec alpha;
  Vec alpha_bar;
  Vec sigma;

  double abar(int t) const { return alpha_bar(t); }
  void check_timestep(int t, int lo = 0) const {
    if (t < lo || t > t_train)
      throw ConfigError("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(t_train) + "]");
  }
};

inline NoiseSchedule make_schedule(const std::vector<double>& betas) {
  if (betas.empty()) throw ConfigError("schedule: need at least one timestep");
  NoiseSchedule s;
  s.t_train = static_cast<int>(betas.size());
  const Eigen::Index n = s.t_train + 1;
  s.beta = Vec::Zero(n);
  s.alpha = Vec::Ones(n);
  s.alpha_bar = Vec::Ones(n);
  s.sigma = Vec::Zero(n);
  for (int t = 1; t <= s.t_train; ++t) {
    const double b = betas[static_cast<std::size_t>(t - 1)];
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("schedule: every beta must lie in (0, 1)");
    s.beta(t) = b;
    s.alpha(t) = 1.0 - b;
    s.alpha_bar(t) = t == 1 ? s.alpha(t) : s.alpha_bar(t - 1) * s.alpha(t);
    s.sigma(t) = std::sqrt(1.0 - s.alpha_bar(t));
  }
  return s;
}

inline NoiseSchedule make_linear_schedule(int t_train, double beta_start, double beta_end) {
  if (t_train < 1) throw ConfigError("schedule: t_train must be >= 1");
  if (!(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("schedule: require 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(t_train));
  for (int t = 0; t < t_train; ++t)
    betas[static_cast<std::size_t>(t)] =
        t_train == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / double(t_train - 1);
  return make_schedule(betas);
}

/// tau[i] is the diffusion timestep visited at sampler index i; tau[0] = 0.
struct SamplerConfig {
  int steps = 35;
  double eta = 0.0;
  std::vector<int> tau;

  int timestep(int index) const { return tau.at(static_cast<std::size_t>(index)); }
};

inline SamplerConfig make_sampler(const NoiseSchedule& sched, int steps) {
  if (steps < 1 || steps > sched.t_train) throw ConfigError("sampler: steps must lie in [1, t_train]");
  SamplerConfig s;
  s.steps = steps;
  s.tau.resize(static_cast<std::size_t>(steps) + 1);
  s.tau[0] = 0;
  for (int i = 1; i <= steps; ++i)
    s.tau[static_cast<std::size_t>(i)] = static_cast<int>(std::llround(double(i) * sched.t_train / steps));
  return s;
}

inline Mat forward_diffuse(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& sched) {
  sched.check_timestep(t, 1);
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw StructuralError("forward_diffuse: shape mismatch");
  return std::sqrt(sched.alpha_bar(t)) * x0 + sched.sigma(t) * eps;
}

/// Deterministic DDIM map between any two timesteps (to_t = 0 returns the
/// predicted clean state). Works in both directions; inversion uses to_t > from_t.
inline Mat ddim_step(const Mat& z, const Mat& eps_hat, int from_t, int to_t, const NoiseSchedule& sched) {
  sched.check_timestep(from_t);
  sched.check_timestep(to_t);
  if (from_t == to_t) throw ConfigError("ddim_step: from_t and to_t must differ");
  if (z.rows() != eps_hat.rows() || z.cols() != eps_hat.cols()) throw StructuralError("ddim_step: shape mismatch");
  const Mat x0 = (z - sched.sigma(from_t) * eps_hat) / std::sqrt(sched.alpha_bar(from_t));
  if (to_t == 0) return x0;
  return std::sqrt(sched.alpha_bar(to_t)) * x0 + sched.sigma(to_t) * eps_hat;
}

/// Where in the reverse process an epsilon is requested.
struct StepPoint {
  int index = 0;     // sampler index i in 1..steps
  int timestep = 0;  // tau[i]
  int steps = 0;     // sampler length T
};

/// Guidance closure: epsilon estimate for a batch given per-column concepts.
using EpsFn = std::function<Mat(const Mat& z, const StepPoint& at, std::span<const int> concepts)>;

inline EpsFn conditional_eps(const Parameters& params) {
  return [&params](const Mat& z, const StepPoint& at, std::span<const int> concepts) {
    const std::vector<int> ts(static_cast<std::size_t>(z.cols()), at.timestep);
    return predict(params, z, ts, concepts);
  };
}

/// The degenerate eps == 0 model.
inline EpsFn zero_eps() {
  return [](const Mat& z, const StepPoint&, std::span<const int>) { return Mat::Zero(z.rows(), z.cols()); };
}

inline Mat initial_noise(int dim, std::span<const std::uint64_t> seeds) {
  Mat z(dim, static_cast<Eigen::Index>(seeds.size()));
  for (std::size_t b = 0; b < seeds.size(); ++b) {
    Rng rng = make_rng(seeds[b], 31);
    z.col(static_cast<Eigen::Index>(b)) = randn(dim, 1, rng);
  }
  return z;
}

/// Runs the reverse process from sampler index `from` down to index `to`
/// (exclusive of further steps), returning the state at tau[to].
inline Mat reverse_steps(Mat z, int from, int to, std::span<const int> concepts, const EpsFn& eps_fn,
                         const NoiseSchedule& sched, const SamplerConfig& sampler,
                         std::vector<Mat>* states = nullptr, std::vector<Mat>* eps_trace = nullptr) {
  if (sampler.eta != 0.0) throw ConfigError("sampler: only eta = 0 is supported");
  for (int i = from; i > to; --i) {
    const StepPoint at{i, sampler.timestep(i), sampler.steps};
    Mat eps = eps_fn(z, at, concepts);
    z = ddim_step(z, eps, at.timestep, sampler.timestep(i - 1), sched);
    if (!z.allFinite()) throw NumericalError("sampler: non-finite state after step " + std::to_string(i));
    if (eps_trace) eps_trace->push_back(std::move(eps));
    if (states) states->push_back(z);
  }
  return z;
}

struct Trajectory {
  std::vector<Mat> states;  // z_T first, final sample last
  std::vector<Mat> eps;     // one per step
  std::vector<int> timesteps;
  std::uint64_t seed = 0;

  const Mat& final_state() const { return states.back(); }
};

inline Trajectory sample(const NoiseSchedule& sched, const SamplerConfig& sampler, int dim, int concept_id,
                         const EpsFn& eps_fn, std::uint64_t seed) {
  Trajectory tr;
  tr.seed = seed;
  const std::uint64_t seeds[] = {seed};
  const int concepts[] = {concept_id};
  tr.states.push_back(initial_noise(dim, seeds));
  for (int i = sampler.steps; i >= 0; --i) tr.timesteps.push_back(sampler.timestep(i));
  reverse_steps(tr.states.front(), sampler.steps, 0, concepts, eps_fn, sched, sampler, &tr.states, &tr.eps);
  return tr;
}

/// Final samples for a batch; column b starts from the noise of seeds[b].
inline Mat sample_batch(const NoiseSchedule& sched, const SamplerConfig& sampler, int dim,
                        std::span<const int> concepts, const EpsFn& eps_fn, std::span<const std::uint64_t> seeds) {
  if (concepts.size() != seeds.size()) throw StructuralError("sample_batch: one concept per seed required");
  return reverse_steps(initial_noise(dim, seeds), sampler.steps, 0, concepts, eps_fn, sched, sampler);
}

/// DDIM inversion: the epsilon for the move tau[i-1] -> tau[i] is evaluated at
/// the current state with timestep tau[i].
inline Mat ddim_invert(const Mat& x0, std::span<const int> concepts, const EpsFn& eps_fn,
                       const NoiseSchedule& sched, const SamplerConfig& sampler) {
  if (sampler.eta != 0.0) throw ConfigError("ddim_invert: only eta = 0 is supported");
  Mat z = x0;
  for (int i = 1; i <= sampler.steps; ++i) {
    const StepPoint at{i, sampler.timestep(i), sampler.steps};
    const Mat eps = eps_fn(z, at, concepts);
    z = ddim_step(z, eps, sampler.timestep(i - 1), at.timestep, sched);
    if (!z.allFinite()) throw NumericalError("ddim_invert: non-finite state after step " + std::to_string(i));
  }
  return z;
}

inline Mat reconstruct(const Mat& z_T, std::span<const int> concepts, const EpsFn& eps_fn,
                       const NoiseSchedule& sched, const SamplerConfig& sampler) {
  return reverse_steps(z_T, sampler.steps, 0, concepts, eps_fn, sched, sampler);
}

inline void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const Eigen::Index d = tr.states.front().rows();
  out << "step,timestep";
  for (Eigen::Index j = 0; j < d; ++j) out << ",z" << j;
  for (Eigen::Index j = 0; j < d; ++j) out << ",eps" << j;
  out << '\n';
  char buf[32];
  for (std::size_t s = 0; s < tr.states.size(); ++s) {
    out << s << ',' << tr.timesteps[s];
    for (Eigen::Index j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", tr.states[s](j, 0));
      out << ',' << buf;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      if (s < tr.eps.size()) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.eps[s](j, 0));
        out << ',' << buf;
      } else {
        out << ',';
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Base training

struct BaseTrainConfig {
  int steps = 6000;
  int batch = 128;
  double lr = 2e-3;
  double lr_final_fraction = 0.05;  // cosine decay floor
  double weight_decay = 0.0;
  double p_uncond = 0.1;
  int validation_batch = 512;
  std::uint64_t seed = 0;
};

struct BaseTrainResult {
  Parameters params;
  std::vector<double> loss;  // per-step minibatch MSE
  double validation_start = 0.0;
  double validation_end = 0.0;
};

/// Fixed noisy batch used to score epsilon-matching error.
struct EpsBatch {
  Mat z;
  Mat eps;
  std::vector<int> timesteps;
  std::vector<int> concepts;
};

inline EpsBatch draw_eps_batch(const Dataset& data, const NoiseSchedule& sched, int batch, double p_uncond,
                               int null_id, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> tdist(1, sched.t_train);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EpsBatch b;
  Mat x0(data.dim(), batch);
  b.eps = randn(data.dim(), batch, rng);
  for (int j = 0; j < batch; ++j) {
    const int idx = pick(rng);
    x0.col(j) = data.samples.col(idx);
    b.timesteps.push_back(tdist(rng));
    const bool drop = unit(rng) < p_uncond;
    b.concepts.push_back(drop ? null_id : data.labels[static_cast<std::size_t>(idx)]);
  }
  b.z.resize(data.dim(), batch);
  for (int j = 0; j < batch; ++j) {
    const int t = b.timesteps[static_cast<std::size_t>(j)];
    b.z.col(j) = std::sqrt(sched.alpha_bar(t)) * x0.col(j) + sched.sigma(t) * b.eps.col(j);
  }
  return b;
}

inline double eps_mse(const Parameters& params, const EpsBatch& b) {
  const Mat pred = predict(params, b.z, b.timesteps, b.concepts);
  return (pred - b.eps).squaredNorm() / static_cast<double>(pred.size());
}

inline BaseTrainResult train_base(const Dataset& data, const NetworkShape& shape, const NoiseSchedule& sched,
                                  const BaseTrainConfig& cfg) {
  if (data.size() == 0) throw ConfigError("train_base: empty dataset");
  if (cfg.steps < 1 || cfg.batch < 1) throw ConfigError("train_base: steps and batch must be >= 1");
  if (!(cfg.p_uncond >= 0.0 && cfg.p_uncond <= 1.0)) throw ConfigError("train_base: p_uncond must lie in [0,1]");
  if (shape.input_dim != data.dim()) throw ConfigError("train_base: network input_dim does not match data");

  BaseTrainResult res;
  res.params = init_parameters(shape, cfg.seed);
  Rng val_rng = make_rng(cfg.seed, 41);
  const EpsBatch val = draw_eps_batch(data, sched, cfg.validation_batch, 0.0, shape.null_id(), val_rng);
  res.validation_start = eps_mse(res.params, val);

  AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  OptimizerState opt = OptimizerState::for_params(res.params, opt_cfg);
  const TrainMask mask = TrainMask::all(res.params);
  Rng rng = make_rng(cfg.seed, 42);
  res.loss.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const double progress = cfg.steps > 1 ? double(step) / (cfg.steps - 1) : 1.0;
    const double floor = cfg.lr_final_fraction;
    opt.config.lr = cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));

    const EpsBatch b = draw_eps_batch(data, sched, cfg.batch, cfg.p_uncond, shape.null_id(), rng);
    ForwardResult fr = forward(res.params, b.z, b.timesteps, b.concepts);
    const Mat diff = fr.eps - b.eps;
    const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
    if (!std::isfinite(loss)) throw NumericalError("train_base: non-finite loss at step " + std::to_string(step));
    res.loss.push_back(loss);
    const GradientBuffer g = backward(res.params, fr.tape, (2.0 / static_cast<double>(diff.size())) * diff);
    adamw_step(res.params, g, mask, opt);
  }
  res.validation_end = eps_mse(res.params, val);
  return res;
}

}  // namespace ssrg
