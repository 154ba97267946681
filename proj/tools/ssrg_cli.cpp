// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// ssrg: command-line pipeline for training, erasing, sampling and evaluating
// toy-world diffusion models. Exit codes: 0 ok, 1 config, 2 io, 3 numerical,
// 4 format.

#include "ssrg/analysis.hpp"
#include "ssrg/checkpoint.hpp"
#include "ssrg/config.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/erasure.hpp"
#include "ssrg/pipeline.hpp"
#include "ssrg/report.hpp"
#include "ssrg/toyworld.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef SSRG_VERSION
#define SSRG_VERSION "0.1.0-unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssrg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

std::string g_command_line;

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = (c.config == "paper-defaults" || c.config == "defaults") ? parse_config("", c.config)
                                                                           : load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.base.seed = *c.seed;
    cfg.erase.seed = *c.seed;
  }
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
  return fs::path(out);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { write_text(p.string(), j.dump(2) + "\n"); }

// Appends one entry per command to <out>/manifest.json so a run directory
// records every step that wrote into it.
void record_manifest(const fs::path& out, const std::string& command, const RunConfig* cfg,
                     const json& extra = json::object()) {
  const fs::path path = out / "manifest.json";
  json m = fs::exists(path) ? read_json(path) : json{{"version", SSRG_VERSION}, {"commands", json::array()}};
  json entry{{"command", command}, {"args", g_command_line}, {"created", utc_timestamp()}, {"version", SSRG_VERSION}};
  if (cfg) {
    entry["seeds"] = {{"run", cfg->seed}, {"base", cfg->base.seed}, {"erase", cfg->erase.seed}, {"eval", cfg->seeds}};
    entry["config"] = to_ini(*cfg);
    write_text((out / "config.ini").string(), to_ini(*cfg));
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) entry[it.key()] = it.value();
  m["version"] = SSRG_VERSION;
  m["commands"].push_back(entry);
  write_json(path, m);
}

LoadedCheckpoint load_model(const std::string& path, const RunConfig& cfg) {
  LoadedCheckpoint ck = read_checkpoint(path);
  check_compatible(ck, cfg, path);
  return ck;
}

void write_samples_csv(const Mat& x, const std::vector<int>& labels, DataMode mode, const std::string& path) {
  Dataset ds;
  ds.samples = x;
  ds.labels = labels;
  ds.mode = mode;
  write_dataset_csv(ds, path);
}

std::vector<int> concept_list(const RunConfig& cfg, const std::string& name) {
  if (name.empty() || name == "all") {
    std::vector<int> all(static_cast<std::size_t>(cfg.vocab.size()));
    for (int c = 0; c < cfg.vocab.size(); ++c) all[static_cast<std::size_t>(c)] = c;
    return all;
  }
  return {cfg.vocab.id_of(name)};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const Common& c, int n) {
  RunConfig cfg = resolve_config(c);
  if (n > 0) cfg.data.n_per_concept = n;
  const fs::path out = prepare_out(c.out);
  const Dataset ds = cfg.make_dataset(cfg.seed);
  write_dataset_csv(ds, (out / "data.csv").string());
  record_manifest(out, "gen-data", &cfg, {{"samples", ds.size()}});
  std::cout << "wrote " << ds.size() << " samples to " << (out / "data.csv").string() << '\n';
  return 0;
}

void write_train_outputs(const fs::path& out, const RunConfig& cfg, const BaseTrainResult& r) {
  write_checkpoint(r.params, model_meta(cfg, "base"), (out / "base.ssrg").string());
  std::ostringstream loss;
  loss << "step,loss\n";
  for (std::size_t i = 0; i < r.loss.size(); ++i) loss << i << ',' << fmt6(r.loss[i]) << '\n';
  write_text((out / "train_loss.csv").string(), loss.str());
}

int cmd_train_base(const Common& c, const std::string& data_path) {
  const RunConfig cfg = resolve_config(c);
  const fs::path out = prepare_out(c.out);
  BaseTrainResult r;
  if (!data_path.empty()) {
    const Dataset ds = read_dataset_csv(data_path);
    if (ds.mode != cfg.mode) throw ConfigError(data_path + ": dataset mode does not match run.mode");
    r = train_base(ds, cfg.network, cfg.noise_schedule(), cfg.base);
  } else {
    r = train_base_model(cfg);
  }
  write_train_outputs(out, cfg, r);
  record_manifest(out, "train-base", &cfg,
                  {{"validation_start", r.validation_start}, {"validation_end", r.validation_end}});
  std::cout << "validation eps-mse " << fmt6(r.validation_start) << " -> " << fmt6(r.validation_end) << '\n';
  return 0;
}

// Runs one erasure into `out`, which ends up self-contained: config snapshot,
// reference model, erased model, snapshots, loss log and timeline.
EraseResult run_erase(const RunConfig& cfg, const Parameters& base, const fs::path& out, int timeline_samples) {
  prepare_out(out.string());
  const NoiseSchedule sched = cfg.noise_schedule();
  const SamplerConfig sampler = cfg.sampler(sched);
  EraseResult res = erase_finetune(base, cfg.erase, sched, sampler);

  std::vector<std::string> names;
  for (int id : cfg.erase.erase_set) names.push_back(cfg.vocab.name(id));
  CheckpointMeta meta = model_meta(cfg, to_string(cfg.erase.loss));
  meta.extra["erase_concepts"] = names;
  meta.extra["lambda"] = cfg.erase.lambda;
  write_checkpoint(base, model_meta(cfg, "base"), (out / "base.ssrg").string());
  write_checkpoint(res.student, meta, (out / "erased.ssrg").string());
  if (!res.log.snapshots.empty()) prepare_out((out / "snapshots").string());
  for (const auto& s : res.log.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%04d.ssrg", s.iteration);
    CheckpointMeta sm = meta;
    sm.extra["iteration"] = s.iteration;
    write_checkpoint(s.params, sm, (out / "snapshots" / name).string());
  }
  write_erase_log_csv(res.log, (out / "erase_log.csv").string());
  if (timeline_samples > 0) {
    const auto tl =
        erasure_timeline(base, res.log, cfg, cfg.erase.erase_set.front(), timeline_samples, mix_seed(cfg.seed, 90));
    write_timeline_csv(tl, (out / "erasure_timeline.csv").string());
  }
  return res;
}

Parameters obtain_base(const RunConfig& cfg, const std::string& base_path) {
  if (!base_path.empty()) return load_model(base_path, cfg).params;
  std::cout << "no --base given; training a base model (" << cfg.base.steps << " steps)\n";
  return train_base_model(cfg).params;
}

int cmd_erase(const Common& c, const std::string& base_path, std::optional<double> lambda,
              const std::string& loss, int timeline_samples) {
  RunConfig cfg = resolve_config(c);
  if (lambda) {
    if (!(*lambda >= 0.0)) throw ConfigError("--lambda: must be >= 0");
    cfg.erase.lambda = *lambda;
  }
  if (!loss.empty()) cfg.erase.loss = parse_loss_kind(loss);
  const fs::path out = prepare_out(c.out);
  const Parameters base = obtain_base(cfg, base_path);
  const EraseResult res = run_erase(cfg, base, out, timeline_samples);
  record_manifest(out, "erase", &cfg, {{"base", base_path.empty() ? "trained" : base_path}});
  const auto& last = res.log.iterations.back().loss;
  std::cout << "erased " << cfg.vocab.name(cfg.erase.erase_set.front()) << " with " << to_string(cfg.erase.loss)
            << " in " << cfg.erase.iterations << " iterations; final loss " << fmt6(last.total) << '\n';
  return 0;
}

int resolve_target(const RunConfig& cfg, const LoadedCheckpoint& model, const std::string& name) {
  if (!name.empty()) return cfg.vocab.id_of(name);
  const auto& extra = model.meta.extra;
  if (extra.contains("erase_concepts") && !extra["erase_concepts"].empty())
    return cfg.vocab.id_of(extra["erase_concepts"][0].get<std::string>());
  return cfg.erase.erase_set.front();
}

MetricReport run_eval(const RunConfig& cfg, const LoadedCheckpoint& model, const LoadedCheckpoint& reference,
                      int target, int samples, const fs::path& out) {
  const std::string method = model.meta.extra.value("method", std::string("model"));
  const MetricReport r = evaluate_model(model.params, reference.params, cfg, target, method, samples,
                                        mix_seed(cfg.seed, 91));
  write_json(out / "metrics.json", r.to_json());
  write_metric_csv(r, (out / "metrics.csv").string());
  return r;
}

int cmd_eval(const Common& c, std::string model_path, std::string ref_path, int samples, const std::string& target) {
  const RunConfig cfg = resolve_config(c);
  const fs::path out = prepare_out(c.out);
  if (model_path.empty()) model_path = (out / "erased.ssrg").string();
  if (ref_path.empty()) ref_path = (out / "base.ssrg").string();
  const LoadedCheckpoint model = load_model(model_path, cfg);
  const LoadedCheckpoint ref = load_model(ref_path, cfg);
  const int n = samples > 0 ? samples : cfg.metrics.samples_per_concept;
  const MetricReport r = run_eval(cfg, model, ref, resolve_target(cfg, model, target), n, out);
  record_manifest(out, "eval", &cfg, {{"model", model_path}, {"reference", ref_path}, {"samples", n}});
  const ComparisonRow row = summarize(r, out.string());
  std::cout << r.method << ": target erasure rate " << fmt6(row.erasure_rate) << ", non-target mmd2 "
            << fmt6(row.mmd2) << ", consistency " << fmt6(row.consistency) << '\n';
  return 0;
}

int cmd_sample(const Common& c, const std::string& model_path, const std::string& concept_name, int n,
               std::optional<double> gamma, bool with_delta, bool trajectory) {
  const RunConfig cfg = resolve_config(c);
  const fs::path out = prepare_out(c.out);
  const LoadedCheckpoint ck = load_model(model_path, cfg);
  if (n < 1) throw ConfigError("--n: must be >= 1");
  const double g = gamma.value_or(cfg.metrics.gamma);
  const NoiseSchedule sched = cfg.noise_schedule();
  const SamplerConfig sampler = cfg.sampler(sched);
  const EpsFn eps = with_delta ? guided_eps_fn(ck.params, g, cfg.erase.instructions, cfg.erase.warmup)
                               : guided_eps_fn(ck.params, g);
  std::vector<int> labels;
  std::vector<std::uint64_t> seeds;
  for (int concept_id : concept_list(cfg, concept_name)) {
    const auto s = stream_seeds(cfg.seed, 11 + static_cast<std::uint64_t>(concept_id), n);
    seeds.insert(seeds.end(), s.begin(), s.end());
    labels.insert(labels.end(), static_cast<std::size_t>(n), concept_id);
  }
  const Mat x = sample_batch(sched, sampler, cfg.dim(), labels, eps, seeds);
  write_samples_csv(x, labels, cfg.mode, (out / "samples.csv").string());
  if (trajectory)
    write_trajectory_csv(sample(sched, sampler, cfg.dim(), labels.front(), eps, seeds.front()),
                         (out / "trajectory.csv").string());
  const Classifier oracle = cfg.oracle();
  json summary = json::object();
  for (int concept_id : concept_list(cfg, concept_name)) {
    int hits = 0, total = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != concept_id) continue;
      ++total;
      if (oracle(x.col(static_cast<Eigen::Index>(j))).id == concept_id) ++hits;
    }
    summary[cfg.vocab.name(concept_id)] = static_cast<double>(hits) / total;
  }
  write_json(out / "samples.json", {{"gamma", g}, {"delta", with_delta}, {"oracle_accuracy", summary}});
  record_manifest(out, "sample", &cfg, {{"model", model_path}, {"n", n}});
  std::cout << "wrote " << x.cols() << " samples to " << (out / "samples.csv").string() << '\n';
  return 0;
}

int cmd_invert(const Common& c, const std::string& model_path, std::string recon_path, const std::string& data_path,
               const std::string& concept_name, int n, double gamma, std::optional<double> recon_gamma) {
  const RunConfig cfg = resolve_config(c);
  const fs::path out = prepare_out(c.out);
  const LoadedCheckpoint inv = load_model(model_path, cfg);
  if (recon_path.empty()) recon_path = model_path;
  const LoadedCheckpoint rec = recon_path == model_path ? inv : load_model(recon_path, cfg);

  Dataset ds;
  if (!data_path.empty()) {
    ds = read_dataset_csv(data_path);
    if (ds.mode != cfg.mode) throw ConfigError(data_path + ": dataset mode does not match run.mode");
  } else {
    if (n < 1) throw ConfigError("--n: must be >= 1");
    RunConfig small = cfg;
    small.data.n_per_concept = n;
    ds = small.make_dataset(mix_seed(cfg.seed, 92));
  }
  if (!concept_name.empty() && concept_name != "all") {
    const int id = cfg.vocab.id_of(concept_name);
    Dataset keep;
    keep.mode = ds.mode;
    std::vector<Eigen::Index> cols;
    for (int j = 0; j < ds.size(); ++j)
      if (ds.labels[static_cast<std::size_t>(j)] == id) cols.push_back(j);
    if (cols.empty()) throw ConfigError("--concept: no samples labelled '" + concept_name + "'");
    keep.samples.resize(ds.dim(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      keep.samples.col(static_cast<Eigen::Index>(k)) = ds.samples.col(cols[k]);
      keep.labels.push_back(id);
    }
    ds = std::move(keep);
  }
  const NoiseSchedule sched = cfg.noise_schedule();
  const SamplerConfig sampler = cfg.sampler(sched);
  const Mat latents = ddim_invert(ds.samples, ds.labels, guided_eps_fn(inv.params, gamma), sched, sampler);
  const Mat recon =
      reconstruct(latents, ds.labels, guided_eps_fn(rec.params, recon_gamma.value_or(gamma)), sched, sampler);

  const Classifier oracle = cfg.oracle();
  double rel = 0.0;
  int kept = 0;
  for (int j = 0; j < ds.size(); ++j) {
    const double nx = ds.samples.col(j).norm();
    rel += (recon.col(j) - ds.samples.col(j)).norm() / std::max(nx, 1e-12);
    if (oracle(recon.col(j)).id == ds.labels[static_cast<std::size_t>(j)]) ++kept;
  }
  rel /= ds.size();
  write_samples_csv(latents, ds.labels, cfg.mode, (out / "latents.csv").string());
  write_samples_csv(recon, ds.labels, cfg.mode, (out / "reconstructions.csv").string());
  const double kept_rate = static_cast<double>(kept) / ds.size();
  write_json(out / "inversion.json",
             {{"samples", ds.size()}, {"mean_relative_l2", rel}, {"label_kept", kept_rate},
              {"label_changed", 1.0 - kept_rate}, {"invert_model", model_path}, {"reconstruct_model", recon_path}});
  record_manifest(out, "invert", &cfg, {{"model", model_path}, {"reconstruct_model", recon_path}});
  std::cout << "inverted " << ds.size() << " samples: mean relative L2 " << fmt6(rel) << ", label kept "
            << fmt6(kept_rate) << '\n';
  return 0;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  for (const auto& v : detail::split_list(text)) out.push_back(detail::to_double("--values", v));
  if (out.empty()) throw ConfigError("--values: need at least one value");
  for (double v : out)
    if (!(v >= 0.0)) throw ConfigError("--values: lambda must be >= 0");
  return out;
}

int cmd_sweep_lambda(const Common& c, const std::string& base_path, const std::string& values_text, int samples,
                     int timeline_samples, int jobs) {
  const RunConfig cfg = resolve_config(c);
  const std::vector<double> values = parse_values(values_text);
  const fs::path out = prepare_out(c.out);
  const Parameters base = obtain_base(cfg, base_path);
  const int n = samples > 0 ? samples : cfg.metrics.samples_per_concept;
  const int target = cfg.erase.erase_set.front();

  struct Result {
    double lambda;
    ComparisonRow row;
  };
  const auto one = [&](double lambda) {
    RunConfig run = cfg;
    run.erase.lambda = lambda;
    const fs::path dir = out / ("lambda_" + fmt6(lambda));
    run_erase(run, base, dir, timeline_samples);
    const LoadedCheckpoint model = read_checkpoint((dir / "erased.ssrg").string());
    const LoadedCheckpoint ref = read_checkpoint((dir / "base.ssrg").string());
    const MetricReport r = run_eval(run, model, ref, target, n, dir);
    record_manifest(dir, "sweep-lambda", &run, {{"lambda", lambda}});
    return Result{lambda, summarize(r, dir.filename().string())};
  };

  std::vector<Result> results;
  if (jobs <= 1) {
    for (double v : values) results.push_back(one(v));
  } else {
    std::vector<std::future<Result>> pending;
    std::size_t next = 0;
    while (next < values.size() || !pending.empty()) {
      while (next < values.size() && static_cast<int>(pending.size()) < jobs)
        pending.push_back(std::async(std::launch::async, one, values[next++]));
      results.push_back(pending.front().get());
      pending.erase(pending.begin());
    }
  }
  std::sort(results.begin(), results.end(), [](const Result& a, const Result& b) { return a.lambda < b.lambda; });
  std::ostringstream csv;
  csv << "lambda,target_erasure_rate,mean_mmd2,mean_consistency\n";
  PlotSeries cons{"consistency", {}, {}}, er{"target erasure rate", {}, {}};
  for (const auto& r : results) {
    csv << fmt6(r.lambda) << ',' << fmt6(r.row.erasure_rate) << ',' << fmt6(r.row.mmd2) << ','
        << fmt6(r.row.consistency) << '\n';
    cons.x.push_back(r.lambda);
    cons.y.push_back(r.row.consistency);
    er.x.push_back(r.lambda);
    er.y.push_back(r.row.erasure_rate);
  }
  write_text((out / "sweep.csv").string(), csv.str());
  write_text((out / "consistency_vs_lambda.svg").string(),
             svg_line_plot("Non-target consistency vs lambda", "lambda", "consistency", {cons}));
  write_text((out / "erasure_vs_lambda.svg").string(),
             svg_line_plot("Target erasure rate vs lambda", "lambda", "erasure rate", {er}));
  record_manifest(out, "sweep-lambda", &cfg, {{"values", values}, {"samples", n}});
  std::cout << csv.str();
  return 0;
}

int cmd_verify_theory(const Common& c, const std::string& model_path) {
  const RunConfig cfg = resolve_config(c);
  const fs::path out = prepare_out(c.out);
  const NoiseSchedule sched = cfg.noise_schedule();
  json checks = json::array();
  bool ok = true;
  const auto report = [&](const std::string& name, double value, double tol, bool pass) {
    checks.push_back({{"check", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}});
    std::cout << (pass ? "PASS " : "FAIL ") << name << " value=" << fmt6(value) << " tol=" << fmt6(tol) << '\n';
    ok = ok && pass;
  };

  double worst = 0.0;
  for (int t = 2; t <= sched.t_train; ++t) {
    const LossWeights lw = loss_weights(t, sched);
    const double a = sched.alpha(t);
    const double expect = lw.w_prime * (1.0 - a) * (1.0 - a) / a;
    worst = std::max(worst, std::abs(lw.w - expect) / std::max(std::abs(expect), 1e-300));
  }
  report("loss_weight_identity", worst, 1e-12, worst <= 1e-12);
  const LossWeights worked = loss_weights(0.9, 0.72, 0.8);
  const double worked_err = std::max(std::abs(worked.w_prime - 28.0), std::abs(worked.w - 28.0 / 90.0));
  report("loss_weight_worked_value", worked_err, 1e-12, worked_err <= 1e-12);

  Rng rng = make_rng(cfg.seed, 93);
  double kl_err = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Vec mu1 = randn(cfg.dim() > 8 ? 8 : cfg.dim(), 1, rng).col(0);
    const Vec mu2 = mu1 + 0.5 * randn(mu1.size(), 1, rng).col(0);
    const double s2 = 0.5 + k * 0.25;
    const double exact = kl_guided_gaussians(mu1, mu2, s2);
    const double mc = kl_monte_carlo(mu1, mu2, s2, 1000000, mix_seed(cfg.seed, 94 + k));
    kl_err = std::max(kl_err, std::abs(mc - exact) / exact);
  }
  report("kl_monte_carlo_agreement", kl_err, 0.02, kl_err <= 0.02);

  Parameters teacher;
  if (!model_path.empty()) {
    teacher = load_model(model_path, cfg).params;
  } else {
    teacher = init_parameters(cfg.network, mix_seed(cfg.seed, 95));
  }
  Parameters student = teacher;
  for (auto& t : student.tensors) t.value += 0.01 * randn(t.value.rows(), t.value.cols(), rng);
  std::vector<KlProbe> probes;
  std::uniform_int_distribution<int> tdist(2, sched.t_train);
  std::uniform_int_distribution<int> cdist(0, cfg.vocab.size() - 1);
  for (int k = 0; k < 20; ++k) {
    KlProbe p;
    p.z = randn(cfg.dim(), 1, rng).col(0);
    p.t = tdist(rng);
    p.c = cdist(rng);
    p.c_prime = cdist(rng);
    p.gamma1 = cfg.erase.gamma1;
    p.gamma2 = cfg.erase.gamma2;
    probes.push_back(p);
  }
  const KlChainReport chain = kl_chain_check(teacher, student, sched, probes);
  report("kl_chain_two_path", chain.max_relative_discrepancy, 1e-10, chain.max_relative_discrepancy <= 1e-10);
  report("kl_chain_decomposition", chain.max_decomposition_error, 1e-12, chain.max_decomposition_error <= 1e-12);
  report("kl_chain_triangle", chain.triangle_holds ? 0.0 : 1.0, 0.0, chain.triangle_holds);
  const int bad = triangle_violations(1000, cfg.dim(), mix_seed(cfg.seed, 96));
  report("triangle_bound_1000_pairs", bad, 0.0, bad == 0);

  write_json(out / "theory.json", {{"checks", checks}, {"pass", ok}});
  record_manifest(out, "verify-theory", &cfg, {{"pass", ok}});
  if (!ok) throw NumericalError("verify-theory: at least one check exceeded its tolerance");
  return 0;
}

// Series read from an optional two-column-or-wider CSV in a run directory.
std::optional<PlotSeries> read_series(const fs::path& csv, const std::string& name, const std::string& xcol,
                                      const std::string& ycol) {
  std::ifstream in(csv);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(csv.string() + ": empty file");
  const auto header = detail::split_list(line);
  const auto xi = std::find(header.begin(), header.end(), xcol) - header.begin();
  const auto yi = std::find(header.begin(), header.end(), ycol) - header.begin();
  if (xi >= static_cast<long>(header.size()) || yi >= static_cast<long>(header.size()))
    throw FormatError(csv.string() + ": missing column '" + (xi >= static_cast<long>(header.size()) ? xcol : ycol) +
                      "'");
  PlotSeries s{name, {}, {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_list(line);
    if (static_cast<long>(cells.size()) <= std::max(xi, yi)) throw FormatError(csv.string() + ": short row");
    s.x.push_back(detail::to_double(csv.string(), cells[static_cast<std::size_t>(xi)]));
    s.y.push_back(detail::to_double(csv.string(), cells[static_cast<std::size_t>(yi)]));
  }
  return s;
}

int cmd_report(const std::string& out_dir, const std::vector<std::string>& runs) {
  if (runs.empty()) throw ConfigError("report: at least one run directory is required");
  const fs::path out = prepare_out(out_dir);
  std::vector<ComparisonRow> rows;
  std::vector<PlotSeries> loss, timeline, lambda;
  for (const auto& run : runs) {
    const fs::path dir(run);
    const fs::path metrics = dir / "metrics.json";
    if (!fs::exists(metrics)) throw IoError("report: run '" + run + "' has no metrics.json");
    const MetricReport r = MetricReport::from_json(read_json(metrics));
    const std::string label = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    rows.push_back(summarize(r, label));
    const std::string series = r.method + ":" + label;
    if (auto s = read_series(dir / "erase_log.csv", series, "iter", "total")) loss.push_back(*s);
    if (auto s = read_series(dir / "erasure_timeline.csv", series, "iter", "erasure_rate")) timeline.push_back(*s);
    if (auto s = read_series(dir / "sweep.csv", series, "lambda", "mean_consistency")) lambda.push_back(*s);
  }
  write_text((out / "comparison.csv").string(), comparison_csv(rows));
  write_text((out / "loss_vs_iteration.svg").string(),
             svg_line_plot("Erasure loss vs iteration", "iteration", "total loss", loss));
  write_text((out / "erasure_vs_iteration.svg").string(),
             svg_line_plot("Target erasure rate vs iteration", "iteration", "erasure rate", timeline));
  write_text((out / "consistency_vs_lambda.svg").string(),
             svg_line_plot("Non-target consistency vs lambda", "lambda", "consistency", lambda));
  record_manifest(out, "report", nullptr, {{"runs", runs}});
  std::cout << comparison_csv(rows);
  return 0;
}

int exit_code(ErrorCategory c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Toy-world concept erasure pipeline (exit codes: 0 ok, 1 config, 2 io, 3 numerical, 4 format)"};
  app.set_version_flag("--version", SSRG_VERSION);
  app.require_subcommand(1, 1);

  Common common;
  const auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", common.config,
                                "INI config path, or 'paper-defaults' for the built-in operating point");
    if (need_config) opt->required();
    sub->add_option("--seed", common.seed, "Overrides run.seed, base.seed and erase.seed");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
  };

  int gen_n = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate the labelled toy dataset (data.csv)");
  add_common(gen, true);
  gen->add_option("--n", gen_n, "Samples per concept (default data.n_per_concept)");

  std::string train_data;
  auto* train = app.add_subcommand("train-base", "Train the conditional base model (base.ssrg, train_loss.csv)");
  add_common(train, true);
  train->add_option("--data", train_data, "Train on an existing data.csv instead of fresh samples");

  std::string erase_base, erase_loss;
  std::optional<double> erase_lambda;
  int timeline_samples = 64;
  auto* erase = app.add_subcommand(
      "erase", "Fine-tune a base model to erase erase.concepts (erased.ssrg, snapshots/, erase_log.csv)");
  add_common(erase, true);
  erase->add_option("--base", erase_base, "Base checkpoint; trained from the config when omitted");
  erase->add_option("--lambda", erase_lambda, "Overrides erase.lambda");
  erase->add_option("--loss", erase_loss, "Overrides erase.loss (ours, esd, sdd)");
  erase->add_option("--timeline-samples", timeline_samples, "Samples per snapshot for erasure_timeline.csv (0 = off)")
      ->capture_default_str();

  std::string eval_model, eval_ref, eval_target;
  int eval_samples = 0;
  auto* eval = app.add_subcommand("eval", "Score a model against a reference (metrics.json, metrics.csv)");
  add_common(eval, true);
  eval->add_option("--model", eval_model, "Model checkpoint (default <out>/erased.ssrg)");
  eval->add_option("--reference", eval_ref, "Reference checkpoint (default <out>/base.ssrg)");
  eval->add_option("--samples", eval_samples, "Samples per concept (default metrics.samples_per_concept)");
  eval->add_option("--target", eval_target, "Target concept (default: recorded in the model checkpoint)");

  std::string sample_model, sample_concept_name;
  int sample_n = 16;
  std::optional<double> sample_gamma;
  bool sample_delta = false, sample_traj = false;
  auto* smp = app.add_subcommand("sample", "Draw samples from a checkpoint (samples.csv)");
  add_common(smp, true);
  smp->add_option("--model", sample_model, "Checkpoint to sample from")->required();
  smp->add_option("--concept", sample_concept_name, "Concept name or 'all'")->capture_default_str();
  smp->add_option("--n", sample_n, "Samples per concept")->capture_default_str();
  smp->add_option("--gamma", sample_gamma, "Guidance scale (default metrics.gamma)");
  smp->add_flag("--delta", sample_delta, "Add the configured erasing signal");
  smp->add_flag("--trajectory", sample_traj, "Also write trajectory.csv for the first sample");

  std::string inv_model, inv_recon, inv_data, inv_concept;
  int inv_n = 20;
  double inv_gamma = 1.0;
  std::optional<double> inv_recon_gamma;
  auto* inv = app.add_subcommand("invert", "DDIM-invert data and reconstruct it (latents.csv, reconstructions.csv)");
  add_common(inv, true);
  inv->add_option("--model", inv_model, "Checkpoint used for inversion")->required();
  inv->add_option("--reconstruct-model", inv_recon, "Checkpoint used to re-denoise (default --model)");
  inv->add_option("--data", inv_data, "data.csv to invert (default: fresh samples)");
  inv->add_option("--concept", inv_concept, "Only invert samples of this concept");
  inv->add_option("--n", inv_n, "Fresh samples per concept when --data is absent")->capture_default_str();
  inv->add_option("--gamma", inv_gamma, "Inversion guidance scale")->capture_default_str();
  inv->add_option("--reconstruct-gamma", inv_recon_gamma, "Reconstruction guidance scale (default --gamma)");

  std::string sweep_base, sweep_values = "0,0.5,1,1.5,5";
  int sweep_samples = 0, sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep-lambda", "Erase once per lambda and tabulate the trade-off (sweep.csv)");
  add_common(sweep, true);
  sweep->add_option("--base", sweep_base, "Base checkpoint; trained from the config when omitted");
  sweep->add_option("--values", sweep_values, "Comma-separated lambda values")->capture_default_str();
  sweep->add_option("--samples", sweep_samples, "Evaluation samples per concept");
  sweep->add_option("--timeline-samples", timeline_samples, "Samples per snapshot for erasure timelines")
      ->capture_default_str();
  sweep->add_option("--jobs", sweep_jobs, "Concurrent lambda runs")->capture_default_str();

  std::string theory_model;
  auto* theory = app.add_subcommand("verify-theory", "Run the weight, KL and triangle checks (theory.json)");
  add_common(theory, true);
  theory->add_option("--model", theory_model, "Checkpoint for the KL chain check (default: random network)");

  std::vector<std::string> report_runs;
  std::string report_out = "report";
  auto* rep = app.add_subcommand("report", "Compare evaluated run directories (comparison.csv, *.svg)");
  rep->add_option("runs", report_runs, "Run directories containing metrics.json")->required();
  rep->add_option("--out", report_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorCategory::config);
  }

  try {
    if (*gen) return cmd_gen_data(common, gen_n);
    if (*train) return cmd_train_base(common, train_data);
    if (*erase) return cmd_erase(common, erase_base, erase_lambda, erase_loss, timeline_samples);
    if (*eval) return cmd_eval(common, eval_model, eval_ref, eval_samples, eval_target);
    if (*smp)
      return cmd_sample(common, sample_model, sample_concept_name, sample_n, sample_gamma, sample_delta, sample_traj);
    if (*inv) return cmd_invert(common, inv_model, inv_recon, inv_data, inv_concept, inv_n, inv_gamma, inv_recon_gamma);
    if (*sweep) return cmd_sweep_lambda(common, sweep_base, sweep_values, sweep_samples, timeline_samples, sweep_jobs);
    if (*theory) return cmd_verify_theory(common, theory_model);
    if (*rep) return cmd_report(report_out, report_runs);
  } catch (const Error& e) {
    std::cerr << "ssrg: " << category_name(e.category()) << " error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ssrg: io error: " << e.what() << '\n';
    return exit_code(ErrorCategory::io);
  } catch (const json::exception& e) {
    std::cerr << "ssrg: format error: " << e.what() << '\n';
    return exit_code(ErrorCategory::format);
  }
  return exit_code(ErrorCategory::config);
}
