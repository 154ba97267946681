// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat sectioned key = value file. Every key has a
// default, so an empty file yields the standard operating point
// (gamma1 = gamma2 = 7.5, lambda = 5, 200 iterations, T = 35, warmup 5,
// kappa = 0.95). Unknown keys and invalid values are rejected with the
// offending key path.
//
// Instruction concepts are declared one per section, in file order:
//
//   [instruction.cover]
//   concept  = northeast
//   guidance = 6.5
//   t_high   = 0.35     ; decimal point: fraction of T, floored
//   t_low    = 35       ; integer: sampler index
//   kappa    = 0.95

#pragma once

#include "ssrg/analysis.hpp"
#include "ssrg/checkpoint.hpp"
#include "ssrg/core.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/erasure.hpp"
#include "ssrg/guidance.hpp"
#include "ssrg/nnet.hpp"
#include "ssrg/toyworld.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ssrg {

struct DataConfig {
  int n_per_concept = 2000;
  int point_concepts = 8;
  double radius = 1.0;
  double sigma = 0.15;
  GlyphSpec glyphs;
};

struct MetricsConfig {
  double threshold = 0.7;
  int ssim_window = 7;
  int samples_per_concept = 1000;
  double gamma = 7.5;  // evaluation guidance, scale convention (1 = plain conditional)
  KernelKind kernel = KernelKind::polynomial;
};

struct RunConfig {
  DataMode mode = DataMode::points2d;
  std::uint64_t seed = 0;
  ConceptVocab vocab;
  DataConfig data;
  ScheduleParams schedule;
  int sampler_steps = 35;
  double eta = 0.0;
  NetworkShape network;
  BaseTrainConfig base;
  EraseConfig erase;
  MetricsConfig metrics;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  int dim() const { return mode == DataMode::points2d ? 2 : GlyphSpec::pixels; }

  PointMixtureSpec point_spec() const { return ring_mixture(data.point_concepts, data.radius, data.sigma); }

  NoiseSchedule noise_schedule() const { return schedule.build(); }

  SamplerConfig sampler(const NoiseSchedule& sched) const {
    SamplerConfig s = make_sampler(sched, sampler_steps);
    s.eta = eta;
    return s;
  }

  Dataset make_dataset(std::uint64_t data_seed) const {
    return mode == DataMode::points2d ? gen_points2d(point_spec(), data.n_per_concept, data_seed)
                                      : gen_glyphs(data.glyphs, data.n_per_concept, data_seed);
  }

  Classifier oracle() const {
    return mode == DataMode::points2d ? points_oracle(point_spec()) : glyph_oracle(data.glyphs);
  }

  CheckpointMeta checkpoint_meta() const {
    CheckpointMeta m;
    m.schedule = schedule;
    m.vocab = vocab.names();
    m.mode = to_string(mode);
    return m;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(d))
    throw ConfigError(key + ": '" + v + "' is not a finite number");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long i = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return i;
}

inline bool looks_fractional(const std::string& v) { return v.find_first_of(".eE") != std::string::npos; }

struct StepBound {
  bool fraction = false;
  double value = 0.0;
  int resolve(int steps) const {
    return fraction ? static_cast<int>(std::floor(value * steps + 1e-9)) : static_cast<int>(value);
  }
};

struct PendingInstruction {
  std::string section;
  std::string concept_name;
  double guidance = 0.0;
  StepBound t_high{true, 0.35};
  StepBound t_low{true, 1.0};
  double kappa = 0.95;
  bool has_concept = false;
};

}  // namespace detail

/// The three-instruction default: suppress the first erased concept and steer
/// toward its two successors in the vocabulary.
inline std::vector<InstructionConcept> default_instructions(int erase_concept, int num_concepts, int steps) {
  const int t_high = static_cast<int>(std::floor(0.35 * steps + 1e-9));
  return {{erase_concept, -7.5, t_high, steps, 0.95},
          {(erase_concept + 1) % num_concepts, 6.5, t_high, steps, 0.95},
          {(erase_concept + 2) % num_concepts, 6.5, t_high, steps, 0.95}};
}

inline RunConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  RunConfig cfg;
  std::vector<std::string> vocab_names;
  std::vector<std::string> erase_names;
  std::vector<std::string> replacement_names;
  std::string shapes_list;
  std::string instructions_mode = "default";
  std::string t_warmup_text;
  std::vector<detail::PendingInstruction> instructions;

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  auto dbl = [](double& dst) { return Setter([&dst](const auto& k, const auto& v) { dst = detail::to_double(k, v); }); };
  auto integer = [](int& dst) {
    return Setter([&dst](const auto& k, const auto& v) { dst = static_cast<int>(detail::to_int(k, v)); });
  };
  auto u64 = [](std::uint64_t& dst) {
    return Setter([&dst](const auto& k, const auto& v) {
      const long long i = detail::to_int(k, v);
      if (i < 0) throw ConfigError(k + ": must be >= 0");
      dst = static_cast<std::uint64_t>(i);
    });
  };
  auto str = [](std::string& dst) { return Setter([&dst](const auto&, const auto& v) { dst = v; }); };
  auto list = [](std::vector<std::string>& dst) {
    return Setter([&dst](const auto&, const auto& v) { dst = detail::split_list(v); });
  };

  std::map<std::string, Setter> table{
      {"run.mode", [&](const auto&, const auto& v) { cfg.mode = parse_data_mode(v); }},
      {"run.seed", u64(cfg.seed)},
      {"vocab.names", list(vocab_names)},
      {"data.n_per_concept", integer(cfg.data.n_per_concept)},
      {"data.concepts", integer(cfg.data.point_concepts)},
      {"data.radius", dbl(cfg.data.radius)},
      {"data.sigma", dbl(cfg.data.sigma)},
      {"data.shapes", str(shapes_list)},
      {"data.jitter_position", dbl(cfg.data.glyphs.jitter_position)},
      {"data.jitter_scale", dbl(cfg.data.glyphs.jitter_scale)},
      {"data.intensity_min", dbl(cfg.data.glyphs.intensity_min)},
      {"data.intensity_max", dbl(cfg.data.glyphs.intensity_max)},
      {"schedule.t_train", integer(cfg.schedule.t_train)},
      {"schedule.beta_start", dbl(cfg.schedule.beta_start)},
      {"schedule.beta_end", dbl(cfg.schedule.beta_end)},
      {"sampler.steps", integer(cfg.sampler_steps)},
      {"sampler.eta", dbl(cfg.eta)},
      {"network.hidden",
       [&](const auto& k, const auto& v) {
         cfg.network.hidden.clear();
         for (const auto& h : detail::split_list(v)) cfg.network.hidden.push_back(static_cast<int>(detail::to_int(k, h)));
       }},
      {"network.time_embed_dim", integer(cfg.network.time_embed_dim)},
      {"network.concept_embed_dim", integer(cfg.network.concept_embed_dim)},
      {"network.activation",
       [&](const auto& k, const auto& v) {
         if (v != "silu" && v != "tanh") throw ConfigError(k + ": expected silu or tanh");
         cfg.network.activation = v == "silu" ? Activation::silu : Activation::tanh;
       }},
      {"base.steps", integer(cfg.base.steps)},
      {"base.batch", integer(cfg.base.batch)},
      {"base.lr", dbl(cfg.base.lr)},
      {"base.lr_final_fraction", dbl(cfg.base.lr_final_fraction)},
      {"base.weight_decay", dbl(cfg.base.weight_decay)},
      {"base.p_uncond", dbl(cfg.base.p_uncond)},
      {"base.seed", u64(cfg.base.seed)},
      {"erase.concepts", list(erase_names)},
      {"erase.loss", [&](const auto&, const auto& v) { cfg.erase.loss = parse_loss_kind(v); }},
      {"erase.replacement_mode",
       [&](const auto& k, const auto& v) {
         if (v == "delta")
           cfg.erase.replacement = ReplacementMode::delta;
         else if (v == "explicit")
           cfg.erase.replacement = ReplacementMode::explicit_concept;
         else
           throw ConfigError(k + ": expected delta or explicit");
       }},
      {"erase.replacement", list(replacement_names)},
      {"erase.instructions",
       [&](const auto& k, const auto& v) {
         if (v != "default" && v != "none" && v != "sections")
           throw ConfigError(k + ": expected default, none or sections");
         instructions_mode = v;
       }},
      {"erase.gamma1", dbl(cfg.erase.gamma1)},
      {"erase.gamma2", dbl(cfg.erase.gamma2)},
      {"erase.lambda", dbl(cfg.erase.lambda)},
      {"erase.slack", dbl(cfg.erase.slack)},
      {"erase.iterations", integer(cfg.erase.iterations)},
      {"erase.batch", integer(cfg.erase.batch)},
      {"erase.t_warmup", str(t_warmup_text)},
      {"erase.warmup_mode",
       [&](const auto& k, const auto& v) {
         if (v == "literal")
           cfg.erase.warmup.mode = WarmupMode::literal;
         else if (v == "sega")
           cfg.erase.warmup.mode = WarmupMode::sega;
         else
           throw ConfigError(k + ": expected literal or sega");
       }},
      {"erase.baseline_gamma", dbl(cfg.erase.baseline_gamma)},
      {"erase.trainable", list(cfg.erase.trainable)},
      {"erase.lr", dbl(cfg.erase.optimizer.lr)},
      {"erase.eps", dbl(cfg.erase.optimizer.eps)},
      {"erase.beta1", dbl(cfg.erase.optimizer.beta1)},
      {"erase.beta2", dbl(cfg.erase.optimizer.beta2)},
      {"erase.weight_decay", dbl(cfg.erase.optimizer.weight_decay)},
      {"erase.snapshot_every", integer(cfg.erase.snapshot_every)},
      {"erase.seed", u64(cfg.erase.seed)},
      {"metrics.threshold", dbl(cfg.metrics.threshold)},
      {"metrics.ssim_window", integer(cfg.metrics.ssim_window)},
      {"metrics.samples_per_concept", integer(cfg.metrics.samples_per_concept)},
      {"metrics.gamma", dbl(cfg.metrics.gamma)},
      {"metrics.kernel",
       [&](const auto& k, const auto& v) {
         if (v == "polynomial")
           cfg.metrics.kernel = KernelKind::polynomial;
         else if (v == "rbf")
           cfg.metrics.kernel = KernelKind::rbf;
         else if (v == "linear")
           cfg.metrics.kernel = KernelKind::linear;
         else
           throw ConfigError(k + ": expected polynomial, rbf or linear");
       }},
      {"seeds.eval",
       [&](const auto& k, const auto& v) {
         cfg.seeds.clear();
         for (const auto& s : detail::split_list(v)) {
           const long long i = detail::to_int(k, s);
           if (i < 0) throw ConfigError(k + ": seeds must be >= 0");
           cfg.seeds.push_back(static_cast<std::uint64_t>(i));
         }
       }},
  };

  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError(origin + ": key '" + section + "' appears outside a section");
    if (section.rfind("instruction.", 0) == 0 && section.size() > 12) {
      detail::PendingInstruction ins;
      ins.section = section;
      for (const auto& [key, node] : body) {
        const std::string path = section + "." + key;
        const std::string v = detail::trim(node.data());
        if (key == "concept") {
          ins.concept_name = v;
          ins.has_concept = true;
        } else if (key == "guidance") {
          ins.guidance = detail::to_double(path, v);
        } else if (key == "t_high" || key == "t_low") {
          detail::StepBound b{detail::looks_fractional(v), detail::to_double(path, v)};
          if (b.fraction && (b.value < 0.0 || b.value > 1.0)) throw ConfigError(path + ": fraction must lie in [0,1]");
          (key == "t_high" ? ins.t_high : ins.t_low) = b;
        } else if (key == "kappa") {
          ins.kappa = detail::to_double(path, v);
          if (!(ins.kappa >= 0.0 && ins.kappa <= 1.0)) throw ConfigError(path + ": must lie in [0,1]");
        } else {
          throw ConfigError(origin + ": unknown key '" + path + "'");
        }
      }
      if (!ins.has_concept) throw ConfigError(section + ".concept: required");
      instructions.push_back(std::move(ins));
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string path = section + "." + key;
      const auto it = table.find(path);
      if (it == table.end()) throw ConfigError(origin + ": unknown key '" + path + "'");
      try {
        it->second(path, detail::trim(node.data()));
      } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.find(path) != std::string::npos) throw;
        throw ConfigError(path + ": " + what);
      }
    }
  }

  // Mode-dependent defaults and cross-field resolution.
  const int steps = cfg.sampler_steps;
  if (steps < 1) throw ConfigError("sampler.steps: must be >= 1");
  if (cfg.eta != 0.0) throw ConfigError("sampler.eta: only 0 is supported");
  if (cfg.schedule.t_train < steps) throw ConfigError("schedule.t_train: must be >= sampler.steps");
  if (!(0.0 < cfg.schedule.beta_start && cfg.schedule.beta_start <= cfg.schedule.beta_end &&
        cfg.schedule.beta_end < 1.0))
    throw ConfigError("schedule.beta_start: require 0 < beta_start <= beta_end < 1");

  if (cfg.mode == DataMode::glyphs16) {
    if (!shapes_list.empty()) {
      cfg.data.glyphs.shapes.clear();
      for (const auto& s : detail::split_list(shapes_list)) cfg.data.glyphs.shapes.push_back(parse_shape_kind(s));
    }
    cfg.data.glyphs.validate();
    if (vocab_names.empty())
      for (auto k : cfg.data.glyphs.shapes) vocab_names.push_back(to_string(k));
    if (static_cast<int>(vocab_names.size()) != cfg.data.glyphs.size())
      throw ConfigError("vocab.names: need one name per glyph shape");
  } else {
    if (!shapes_list.empty()) throw ConfigError("data.shapes: only valid in glyphs16 mode");
    if (!vocab_names.empty()) cfg.data.point_concepts = static_cast<int>(vocab_names.size());
    if (cfg.data.point_concepts < 1) throw ConfigError("data.concepts: must be >= 1");
    if (!(cfg.data.sigma > 0.0)) throw ConfigError("data.sigma: must be positive");
    if (vocab_names.empty()) vocab_names = ring_names(cfg.data.point_concepts);
  }
  if (cfg.data.n_per_concept < 1) throw ConfigError("data.n_per_concept: must be >= 1");
  cfg.vocab = ConceptVocab(vocab_names);

  cfg.network.input_dim = cfg.dim();
  cfg.network.num_concepts = cfg.vocab.size();
  try {
    cfg.network.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  if (cfg.base.steps < 1) throw ConfigError("base.steps: must be >= 1");
  if (cfg.base.batch < 1) throw ConfigError("base.batch: must be >= 1");
  if (!(cfg.base.p_uncond >= 0.0 && cfg.base.p_uncond <= 1.0)) throw ConfigError("base.p_uncond: must lie in [0,1]");

  auto resolve = [&](const std::string& key, const std::string& name) {
    try {
      const int id = cfg.vocab.id_of(name);
      if (id == cfg.vocab.null_id()) throw ConfigError("the null token cannot be used here");
      return id;
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  };
  if (erase_names.empty()) erase_names.push_back(cfg.vocab.names().front());
  cfg.erase.erase_set.clear();
  for (const auto& n : erase_names) cfg.erase.erase_set.push_back(resolve("erase.concepts", n));
  cfg.erase.replacement_concepts.clear();
  for (const auto& n : replacement_names) cfg.erase.replacement_concepts.push_back(resolve("erase.replacement", n));

  if (!t_warmup_text.empty()) cfg.erase.warmup.t_warmup = static_cast<int>(detail::to_int("erase.t_warmup", t_warmup_text));
  if (cfg.erase.warmup.t_warmup < 0 || cfg.erase.warmup.t_warmup > steps)
    throw ConfigError("erase.t_warmup: must lie in [0, T]");

  if (!instructions.empty() && instructions_mode == "none")
    throw ConfigError("erase.instructions: 'none' conflicts with instruction sections");
  cfg.erase.instructions.clear();
  if (!instructions.empty()) {
    for (const auto& p : instructions) {
      InstructionConcept ins;
      ins.concept_id = resolve(p.section + ".concept", p.concept_name);
      ins.guidance = p.guidance;
      ins.t_high = p.t_high.resolve(steps);
      ins.t_low = p.t_low.resolve(steps);
      ins.kappa = p.kappa;
      if (!(0 <= ins.t_high && ins.t_high <= ins.t_low && ins.t_low <= steps))
        throw ConfigError(p.section + ".t_high: require 0 <= t_high <= t_low <= T");
      cfg.erase.instructions.push_back(ins);
    }
  } else if (instructions_mode == "default") {
    cfg.erase.instructions = default_instructions(cfg.erase.erase_set.front(), cfg.vocab.size(), steps);
  } else if (instructions_mode == "sections") {
    throw ConfigError("erase.instructions: 'sections' given but no [instruction.*] section found");
  }

  if (!(cfg.erase.lambda >= 0.0)) throw ConfigError("erase.lambda: must be >= 0");
  if (cfg.erase.slack != 0.0) throw ConfigError("erase.slack: only 0 is supported");
  if (cfg.erase.iterations < 1) throw ConfigError("erase.iterations: must be >= 1");
  if (cfg.erase.batch < 1) throw ConfigError("erase.batch: must be >= 1");
  if (cfg.erase.snapshot_every < 0) throw ConfigError("erase.snapshot_every: must be >= 0");
  if (!(cfg.erase.optimizer.lr >= 0.0)) throw ConfigError("erase.lr: must be >= 0");
  if (!(cfg.erase.optimizer.eps > 0.0)) throw ConfigError("erase.eps: must be > 0");
  if (cfg.erase.replacement == ReplacementMode::explicit_concept &&
      cfg.erase.replacement_concepts.size() != cfg.erase.erase_set.size())
    throw ConfigError("erase.replacement: one replacement concept per erased concept is required");
  {
    const Parameters probe = zero_parameters(cfg.network);
    try {
      select_tensors(probe, cfg.erase.trainable);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("erase.") + e.what());
    }
  }
  if (!(cfg.metrics.threshold >= 0.0 && cfg.metrics.threshold <= 1.0))
    throw ConfigError("metrics.threshold: must lie in [0,1]");
  if (cfg.mode == DataMode::glyphs16 &&
      (cfg.metrics.ssim_window < 1 || cfg.metrics.ssim_window > GlyphSpec::resolution))
    throw ConfigError("metrics.ssim_window: must lie in [1, 16]");
  if (cfg.metrics.samples_per_concept < 2) throw ConfigError("metrics.samples_per_concept: must be >= 2");
  if (cfg.seeds.empty()) throw ConfigError("seeds.eval: at least one seed is required");
  cfg.erase.validate(cfg.vocab.size(), steps);
  return cfg;
}

inline RunConfig default_config() { return parse_config(""); }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Fully resolved configuration as config text; parse_config(to_ini(c)) == c.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  auto join = [](const auto& xs) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? ", " : "") << xs[i];
    return s.str();
  };
  std::vector<std::string> names;
  o << "[run]\nmode = " << to_string(c.mode) << "\nseed = " << c.seed << "\n\n";
  o << "[vocab]\nnames = " << join(c.vocab.names()) << "\n\n";
  o << "[data]\nn_per_concept = " << c.data.n_per_concept << '\n';
  if (c.mode == DataMode::points2d) {
    o << "radius = " << c.data.radius << "\nsigma = " << c.data.sigma << "\n\n";
  } else {
    for (auto k : c.data.glyphs.shapes) names.push_back(to_string(k));
    o << "shapes = " << join(names) << "\njitter_position = " << c.data.glyphs.jitter_position
      << "\njitter_scale = " << c.data.glyphs.jitter_scale << "\nintensity_min = " << c.data.glyphs.intensity_min
      << "\nintensity_max = " << c.data.glyphs.intensity_max << "\n\n";
  }
  o << "[schedule]\nt_train = " << c.schedule.t_train << "\nbeta_start = " << c.schedule.beta_start
    << "\nbeta_end = " << c.schedule.beta_end << "\n\n";
  o << "[sampler]\nsteps = " << c.sampler_steps << "\neta = " << c.eta << "\n\n";
  o << "[network]\nhidden = " << join(c.network.hidden) << "\ntime_embed_dim = " << c.network.time_embed_dim
    << "\nconcept_embed_dim = " << c.network.concept_embed_dim
    << "\nactivation = " << (c.network.activation == Activation::silu ? "silu" : "tanh") << "\n\n";
  o << "[base]\nsteps = " << c.base.steps << "\nbatch = " << c.base.batch << "\nlr = " << c.base.lr
    << "\nlr_final_fraction = " << c.base.lr_final_fraction << "\nweight_decay = " << c.base.weight_decay
    << "\np_uncond = " << c.base.p_uncond << "\nseed = " << c.base.seed << "\n\n";
  names.clear();
  for (int id : c.erase.erase_set) names.push_back(c.vocab.name(id));
  o << "[erase]\nconcepts = " << join(names) << "\nloss = " << to_string(c.erase.loss)
    << "\nreplacement_mode = " << (c.erase.replacement == ReplacementMode::delta ? "delta" : "explicit") << '\n';
  if (!c.erase.replacement_concepts.empty()) {
    names.clear();
    for (int id : c.erase.replacement_concepts) names.push_back(c.vocab.name(id));
    o << "replacement = " << join(names) << '\n';
  }
  o << "instructions = " << (c.erase.instructions.empty() ? "none" : "sections") << "\ngamma1 = " << c.erase.gamma1
    << "\ngamma2 = " << c.erase.gamma2 << "\nlambda = " << c.erase.lambda << "\nslack = " << c.erase.slack
    << "\niterations = " << c.erase.iterations << "\nbatch = " << c.erase.batch
    << "\nt_warmup = " << c.erase.warmup.t_warmup
    << "\nwarmup_mode = " << (c.erase.warmup.mode == WarmupMode::literal ? "literal" : "sega")
    << "\nbaseline_gamma = " << c.erase.baseline_gamma << "\ntrainable = " << join(c.erase.trainable)
    << "\nlr = " << c.erase.optimizer.lr << "\neps = " << c.erase.optimizer.eps << "\nbeta1 = " << c.erase.optimizer.beta1
    << "\nbeta2 = " << c.erase.optimizer.beta2 << "\nweight_decay = " << c.erase.optimizer.weight_decay
    << "\nsnapshot_every = " << c.erase.snapshot_every << "\nseed = " << c.erase.seed << "\n\n";
  for (std::size_t i = 0; i < c.erase.instructions.size(); ++i) {
    const auto& ins = c.erase.instructions[i];
    o << "[instruction." << i << "]\nconcept = " << c.vocab.name(ins.concept_id) << "\nguidance = " << ins.guidance
      << "\nt_high = " << ins.t_high << "\nt_low = " << ins.t_low << "\nkappa = " << ins.kappa << "\n\n";
  }
  const char* kernel = c.metrics.kernel == KernelKind::polynomial ? "polynomial"
                       : c.metrics.kernel == KernelKind::rbf    ? "rbf"
                                                                : "linear";
  o << "[metrics]\nthreshold = " << c.metrics.threshold << "\nssim_window = " << c.metrics.ssim_window
    << "\nsamples_per_concept = " << c.metrics.samples_per_concept << "\ngamma = " << c.metrics.gamma
    << "\nkernel = " << kernel << "\n\n";
  o << "[seeds]\neval = " << join(c.seeds) << '\n';
  return o.str();
}

}  // namespace ssrg
