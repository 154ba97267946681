// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact checkpoint container.
//
// Checkpoint byte layout (all integers little-endian):
//
//   offset 0   4 bytes   magic "SSRG"
//   offset 4   u16       format version
//   offset 6   u32       header length H in bytes
//   offset 10  H bytes   UTF-8 JSON header (network, schedule, vocab,
//                        created, metadata, tensors manifest)
//   offset 10+H          payload: f64 little-endian arrays in manifest
//                        order, each tensor row-major
//
// Manifest offsets are relative to the payload start.

#pragma once

#include "ssrg/core.hpp"
#include "ssrg/diffusion.hpp"
#include "ssrg/nnet.hpp"
#include "ssrg/toyworld.hpp"

#include <nlohmann/json.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace ssrg {

inline constexpr char kCheckpointMagic[4] = {'S', 'S', 'R', 'G'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kPreambleBytes = 10;

struct ScheduleParams {
  int t_train = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  NoiseSchedule build() const { return make_linear_schedule(t_train, beta_start, beta_end); }
  bool operator==(const ScheduleParams&) const = default;
};

struct CheckpointMeta {
  ScheduleParams schedule;
  std::vector<std::string> vocab;
  std::string mode = "points2d";
  std::string created;  // fixed-width UTC timestamp
  nlohmann::json extra = nlohmann::json::object();
};

struct ManifestEntry {
  std::string name;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::uint64_t offset = 0;
  std::uint64_t numel() const { return static_cast<std::uint64_t>(rows * cols); }
};

struct CheckpointHeader {
  std::uint16_t version = kCheckpointVersion;
  NetworkShape shape;
  CheckpointMeta meta;
  std::vector<ManifestEntry> manifest;
  std::uint64_t payload_offset = 0;  // absolute file offset of the payload
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline nlohmann::json shape_to_json(const NetworkShape& s) {
  return {{"input_dim", s.input_dim},
          {"hidden", s.hidden},
          {"time_embed_dim", s.time_embed_dim},
          {"concept_embed_dim", s.concept_embed_dim},
          {"num_concepts", s.num_concepts},
          {"activation", s.activation == Activation::silu ? "silu" : "tanh"}};
}

inline NetworkShape shape_from_json(const nlohmann::json& j) {
  NetworkShape s;
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.time_embed_dim = j.at("time_embed_dim").get<int>();
  s.concept_embed_dim = j.at("concept_embed_dim").get<int>();
  s.num_concepts = j.at("num_concepts").get<int>();
  const auto act = j.at("activation").get<std::string>();
  if (act != "silu" && act != "tanh") throw FormatError("checkpoint: unknown activation '" + act + "'");
  s.activation = act == "silu" ? Activation::silu : Activation::tanh;
  return s;
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}
inline std::uint64_t get_le(const unsigned char* p, int n) {
  std::uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

/// Serialized bytes of a checkpoint; write_checkpoint stores exactly these.
inline std::string encode_checkpoint(const Parameters& params, const CheckpointMeta& meta) {
  nlohmann::json header;
  header["format"] = "ssrg-checkpoint";
  header["network"] = detail::shape_to_json(params.shape);
  header["schedule"] = {{"t_train", meta.schedule.t_train},
                        {"beta_start", meta.schedule.beta_start},
                        {"beta_end", meta.schedule.beta_end}};
  header["vocab"] = meta.vocab;
  header["mode"] = meta.mode;
  header["created"] = meta.created.empty() ? utc_timestamp() : meta.created;
  header["metadata"] = meta.extra;
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : params.tensors) {
    manifest.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}, {"offset", offset}});
    offset += 8 * static_cast<std::uint64_t>(t.value.size());
  }
  header["tensors"] = manifest;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, 4);
  detail::put_u16(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : params.tensors)
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) detail::put_f64(out, t.value(r, c));
  return out;
}

inline void write_checkpoint(const Parameters& params, const CheckpointMeta& meta, const std::string& path) {
  const std::string bytes = encode_checkpoint(params, meta);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size() || std::fflush(f.get()) != 0 ||
      ::fsync(::fileno(f.get())) != 0)
    throw IoError("write failed for '" + path + "': " + std::strerror(errno));
}

namespace detail {

inline CheckpointHeader parse_header(const std::string& path, std::istream& in, std::uint64_t file_size) {
  unsigned char pre[kPreambleBytes];
  if (!in.read(reinterpret_cast<char*>(pre), kPreambleBytes))
    throw FormatError(path + ": file too short for a checkpoint preamble");
  if (std::memcmp(pre, kCheckpointMagic, 4) != 0) throw FormatError(path + ": bad magic, not an SSRG checkpoint");
  CheckpointHeader h;
  h.version = static_cast<std::uint16_t>(get_le(pre + 4, 2));
  if (h.version > kCheckpointVersion)
    throw UnsupportedVersionError(path + ": checkpoint format version " + std::to_string(h.version) +
                                  " is newer than supported version " + std::to_string(kCheckpointVersion));
  if (h.version == 0) throw FormatError(path + ": invalid format version 0");
  const std::uint64_t header_len = get_le(pre + 6, 4);
  if (kPreambleBytes + header_len > file_size) throw CorruptionError(path + ": header runs past end of file");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  h.payload_offset = kPreambleBytes + header_len;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    h.shape = shape_from_json(j.at("network"));
    const auto& s = j.at("schedule");
    h.meta.schedule = {s.at("t_train").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>()};
    h.meta.vocab = j.at("vocab").get<std::vector<std::string>>();
    h.meta.mode = j.at("mode").get<std::string>();
    h.meta.created = j.at("created").get<std::string>();
    h.meta.extra = j.at("metadata");
    for (const auto& e : j.at("tensors")) {
      ManifestEntry m;
      m.name = e.at("name").get<std::string>();
      m.rows = e.at("shape").at(0).get<std::int64_t>();
      m.cols = e.at("shape").at(1).get<std::int64_t>();
      m.offset = e.at("offset").get<std::uint64_t>();
      h.manifest.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": malformed header: " + e.what());
  }
  std::uint64_t expected = 0;
  for (const auto& m : h.manifest) {
    if (m.rows < 0 || m.cols < 0) throw FormatError(path + ": negative shape for tensor " + m.name);
    if (m.offset != expected)
      throw FormatError(path + ": manifest offsets for tensor " + m.name + " overlap or leave gaps");
    expected += 8 * m.numel();
  }
  return h;
}

}  // namespace detail

/// Reads and validates only the preamble and JSON header.
inline CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path + "'");
  return detail::parse_header(path, in, size);
}

struct LoadedCheckpoint {
  Parameters params;
  CheckpointMeta meta;
  std::uint16_t version = 0;
};

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::error_code ec;
  const std::uint64_t size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path + "'");
  const CheckpointHeader h = detail::parse_header(path, in, size);

  LoadedCheckpoint out;
  out.version = h.version;
  out.meta = h.meta;
  out.params = zero_parameters(h.shape);
  if (h.manifest.size() != out.params.tensors.size())
    throw FormatError(path + ": manifest does not match the network shape");
  const std::uint64_t available = size - h.payload_offset;
  std::vector<unsigned char> buf;
  for (std::size_t i = 0; i < h.manifest.size(); ++i) {
    const ManifestEntry& m = h.manifest[i];
    Tensor& t = out.params.tensors[i];
    if (m.name != t.name || m.rows != t.value.rows() || m.cols != t.value.cols())
      throw FormatError(path + ": tensor " + m.name + " does not match the network shape");
    const std::uint64_t bytes = 8 * m.numel();
    if (m.offset + bytes > available)
      throw CorruptionError(path + ": payload truncated inside tensor " + m.name);
    buf.resize(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw CorruptionError(path + ": short read inside tensor " + m.name);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c, k += 8) {
        const std::uint64_t bits = detail::get_le(buf.data() + k, 8);
        std::memcpy(&t.value(r, c), &bits, 8);
      }
    }
  }
  const std::uint64_t used = h.manifest.empty() ? 0 : h.manifest.back().offset + 8 * h.manifest.back().numel();
  if (used != available) throw CorruptionError(path + ": " + std::to_string(available - used) + " trailing bytes");
  return out;
}

}  // namespace ssrg
