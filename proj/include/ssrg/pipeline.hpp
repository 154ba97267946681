// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end pieces shared by the command-line tool and the acceptance run:
// base training from a RunConfig, erasure, and metric evaluation.

#pragma once

#include "ssrg/analysis.hpp"
#include "ssrg/checkpoint.hpp"
#include "ssrg/config.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/erasure.hpp"
#include "ssrg/guidance.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssrg {

/// n reproducible noise seeds for one named stream of a run.
inline std::vector<std::uint64_t> stream_seeds(std::uint64_t seed, std::uint64_t stream, int n) {
  std::vector<std::uint64_t> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = mix_seed(seed, stream * 1000003ULL + k);
  return out;
}

inline constexpr std::uint64_t kStreamPaired = 7;  // same-seed comparisons
inline constexpr std::uint64_t kStreamDrift = 8;   // independent draws for MMD

inline BaseTrainResult train_base_model(const RunConfig& cfg) {
  const Dataset data = cfg.make_dataset(cfg.seed);
  return train_base(data, cfg.network, cfg.noise_schedule(), cfg.base);
}

inline CheckpointMeta model_meta(const RunConfig& cfg, const std::string& method) {
  CheckpointMeta m = cfg.checkpoint_meta();
  m.extra["method"] = method;
  return m;
}

/// Checks that a checkpoint was produced under the same world as cfg.
inline void check_compatible(const LoadedCheckpoint& ck, const RunConfig& cfg, const std::string& path) {
  if (ck.meta.mode != to_string(cfg.mode))
    throw ConfigError(path + ": checkpoint mode '" + ck.meta.mode + "' does not match run.mode");
  if (ck.meta.vocab != cfg.vocab.names()) throw ConfigError(path + ": checkpoint vocab does not match the config");
  if (!(ck.meta.schedule == cfg.schedule)) throw ConfigError(path + ": checkpoint schedule does not match the config");
  if (ck.params.shape.input_dim != cfg.dim()) throw ConfigError(path + ": checkpoint input dimension mismatch");
}

inline Mat sample_concept(const Parameters& p, const RunConfig& cfg, int c, double gamma,
                          std::span<const std::uint64_t> seeds) {
  const NoiseSchedule sched = cfg.noise_schedule();
  const SamplerConfig sampler = cfg.sampler(sched);
  const std::vector<int> cs(seeds.size(), c);
  return sample_batch(sched, sampler, cfg.dim(), cs, guided_eps_fn(p, gamma), seeds);
}

inline KernelSpec drift_kernel(const RunConfig& cfg, const Mat& x, const Mat& y) {
  KernelSpec k;
  k.kind = cfg.metrics.kernel;
  if (k.kind == KernelKind::rbf) k.bandwidth = median_bandwidth(x, y);
  return k;
}

/// Per-concept metrics of `model` against `reference` at the evaluation
/// guidance. Paired samples share noise seeds; the drift pair does not.
inline MetricReport evaluate_model(const Parameters& model, const Parameters& reference, const RunConfig& cfg,
                                   int target, const std::string& method, int samples, std::uint64_t seed) {
  if (samples < 2) throw ConfigError("metrics.samples_per_concept: must be >= 2");
  if (!(model.shape == reference.shape)) throw ConfigError("eval: model and reference shapes differ");
  const Classifier oracle = cfg.oracle();
  const auto paired = stream_seeds(seed, kStreamPaired, samples);
  const auto fresh = stream_seeds(seed, kStreamDrift, samples);
  MetricReport r;
  r.method = method;
  r.concepts = cfg.vocab.names();
  r.samples_per_concept = samples;
  r.seeds = {seed};
  r.target = target;
  const double g = cfg.metrics.gamma;
  for (int c = 0; c < cfg.vocab.size(); ++c) {
    const Mat ref = sample_concept(reference, cfg, c, g, paired);
    const Mat same = sample_concept(model, cfg, c, g, paired);
    const Mat other = sample_concept(model, cfg, c, g, fresh);
    r.erasure_rate.push_back(erasure_rate(same, c, oracle, cfg.metrics.threshold));
    r.drift.push_back(mmd2(ref, other, drift_kernel(cfg, ref, other)));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < same.cols(); ++j)
      acc += paired_similarity(cfg.mode, ref.col(j), same.col(j), cfg.metrics.ssim_window);
    r.consistency.push_back(acc / static_cast<double>(same.cols()));
  }
  return r;
}

/// MMD^2 between two independent draws of the same model; the noise floor
/// that drift figures are compared against.
inline double self_drift(const Parameters& model, const RunConfig& cfg, int c, int samples, std::uint64_t seed) {
  const Mat a = sample_concept(model, cfg, c, cfg.metrics.gamma, stream_seeds(seed, kStreamPaired, samples));
  const Mat b = sample_concept(model, cfg, c, cfg.metrics.gamma, stream_seeds(seed, kStreamDrift, samples));
  return mmd2(a, b, drift_kernel(cfg, a, b));
}

struct TimelinePoint {
  int iteration = 0;
  double erasure_rate = 0.0;
};

/// Target erasure rate of the base model and of every snapshot.
inline std::vector<TimelinePoint> erasure_timeline(const Parameters& base, const EraseRunLog& log,
                                                   const RunConfig& cfg, int target, int samples,
                                                   std::uint64_t seed) {
  const Classifier oracle = cfg.oracle();
  const auto seeds = stream_seeds(seed, kStreamPaired, samples);
  std::vector<TimelinePoint> out;
  const auto rate = [&](const Parameters& p) {
    return erasure_rate(sample_concept(p, cfg, target, cfg.metrics.gamma, seeds), target, oracle,
                        cfg.metrics.threshold);
  };
  out.push_back({0, rate(base)});
  for (const auto& s : log.snapshots) out.push_back({s.iteration, rate(s.params)});
  return out;
}

inline void write_timeline_csv(const std::vector<TimelinePoint>& tl, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "iter,erasure_rate\n";
  for (const auto& p : tl) out << p.iteration << ',' << fmt6(p.erasure_rate) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ssrg
