// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvinr/common.hpp"
#include "tvinr/feature_coreset.hpp"
#include "tvinr/model.hpp"
#include "tvinr/tesseract.hpp"

namespace tvinr::nn {

using FloatModel = InrModel<encoding::TesseractEncoder<float>>;

struct CheckpointMeta {
  int epoch = 0;
  std::vector<double> loss_history;
  std::string dataset_hash;
  std::optional<coreset::FeatureBoundingBox> fbb;
  std::vector<std::string> occupancy_files;  // relative to the checkpoint
  nlohmann::json extra = nlohmann::json::object();
};

template <class Encoder>
struct Checkpoint {
  InrModel<Encoder> model;
  CheckpointMeta meta;
};

/// FNV-1a over the packed coreset records.
inline std::string coreset_hash(const coreset::Coreset& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 0x100000001b3ull;
  };
  for (const auto& s : c.samples) {
    mix(s.coords.data(), sizeof(float) * 4);
    mix(&s.value, sizeof(float));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr char kCheckpointMagic[8] = {'T', 'V', 'I', 'N', 'R', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> b) : buf_(std::move(b)) {}
  template <class T>
  T pod(const char* what) {
    T v;
    need(sizeof(T), what);
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n)
      throw FormatError("checkpoint truncated at offset " + std::to_string(pos_) + " while reading " + what);
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

template <class Scalar>
void write_f32_block(Writer& w, std::span<const Scalar> v) {
  w.pod(static_cast<std::uint64_t>(v.size()));
  for (const auto x : v) w.pod(static_cast<float>(x));
}

template <class Scalar>
void read_f32_block(Reader& r, std::span<Scalar> v, const char* what) {
  const auto at = r.offset();
  const auto n = r.pod<std::uint64_t>(what);
  if (n != v.size())
    throw FormatError(std::string("checkpoint ") + what + " block size mismatch at offset " + std::to_string(at));
  std::vector<float> tmp(v.size());
  r.bytes(tmp.data(), tmp.size() * sizeof(float), what);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(tmp[i]);
}

}  // namespace detail

template <class Scalar>
nlohmann::json encoder_to_json(const encoding::TesseractEncoder<Scalar>& enc) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : enc.levels()) levels.push_back({l.res_t, l.res_x, l.res_y, l.res_z});
  return {{"fold", enc.fold()},
          {"embedding_size", enc.embedding_size()},
          {"levels", levels},
          {"key_times", enc.key_times()},
          {"linearization", enc.linearization() == encoding::Linearization::morton ? "morton" : "row_major"}};
}

template <class Scalar>
encoding::TesseractEncoder<Scalar> encoder_from_json(const nlohmann::json& j) {
  std::vector<encoding::LevelConfig> levels;
  int l = 1;
  for (const auto& r : j.at("levels"))
    levels.push_back({l++, r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>(), r.at(2).get<std::int64_t>(),
                      r.at(3).get<std::int64_t>()});
  const auto lin = j.value("linearization", std::string("row_major")) == "morton" ? encoding::Linearization::morton
                                                                                  : encoding::Linearization::row_major;
  return encoding::TesseractEncoder<Scalar>(std::move(levels), j.at("fold").get<std::int64_t>(),
                                            j.at("embedding_size").get<std::int64_t>(),
                                            j.at("key_times").get<std::vector<double>>(), lin);
}

inline nlohmann::json meta_to_json(const CheckpointMeta& m) {
  nlohmann::json j{{"epoch", m.epoch},
                   {"loss_history", m.loss_history},
                   {"dataset_hash", m.dataset_hash},
                   {"occupancy_files", m.occupancy_files},
                   {"extra", m.extra}};
  if (m.fbb) j["fbb"] = coreset::fbb_to_json(*m.fbb);
  return j;
}

inline CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  m.epoch = j.at("epoch").get<int>();
  m.loss_history = j.at("loss_history").get<std::vector<double>>();
  m.dataset_hash = j.at("dataset_hash").get<std::string>();
  m.occupancy_files = j.at("occupancy_files").get<std::vector<std::string>>();
  m.extra = j.value("extra", nlohmann::json::object());
  if (j.contains("fbb")) m.fbb = coreset::fbb_from_json(j.at("fbb"));
  return m;
}

/// Layout: magic, u32 version, u32 reserved, u64 JSON length, JSON header
/// (encoder, MLP shape, metadata), then f32 embedding and MLP blocks, each
/// prefixed by a u64 element count.
template <class Scalar>
std::vector<char> serialize_checkpoint(const InrModel<encoding::TesseractEncoder<Scalar>>& model, const CheckpointMeta& meta) {
  const nlohmann::json header{{"encoder", encoder_to_json(model.encoder)},
                              {"mlp",
                               {{"input_dim", model.mlp.input_dim()},
                                {"hidden_layers", model.mlp.config().hidden_layers},
                                {"neurons_per_layer", model.mlp.config().neurons_per_layer}}},
                              {"meta", meta_to_json(meta)}};
  const std::string text = header.dump();
  detail::Writer w;
  w.bytes(kCheckpointMagic, 8);
  w.pod(kCheckpointVersion);
  w.pod(std::uint32_t{0});
  w.pod(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  detail::write_f32_block(w, model.encoder.params());
  detail::write_f32_block(w, model.mlp.params());
  return w.data();
}

template <class Scalar>
void save_checkpoint(const InrModel<encoding::TesseractEncoder<Scalar>>& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

template <class Scalar = float>
Checkpoint<encoding::TesseractEncoder<Scalar>> parse_checkpoint(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  char magic[8];
  r.bytes(magic, 8, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError("not a tvinr checkpoint (bad magic at offset 0)");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at offset 8");
  r.pod<std::uint32_t>("reserved");
  const auto hdr_at = r.offset();
  const auto len = r.pod<std::uint64_t>("header length");
  if (len > (std::uint64_t{1} << 30)) throw FormatError("implausible header length at offset " + std::to_string(hdr_at));
  std::string text(static_cast<std::size_t>(len), '\0');
  r.bytes(text.data(), text.size(), "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt checkpoint header at offset " + std::to_string(hdr_at + 8) + ": " + e.what());
  }
  Checkpoint<encoding::TesseractEncoder<Scalar>> ck;
  try {
    ck.model.encoder = encoder_from_json<Scalar>(header.at("encoder"));
    const auto& m = header.at("mlp");
    const MlpConfig cfg{m.at("hidden_layers").get<int>(), m.at("neurons_per_layer").get<int>()};
    ck.model.mlp = Mlp<Scalar>(m.at("input_dim").get<std::size_t>(), cfg);
    ck.meta = meta_from_json(header.at("meta"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what());
  }
  if (ck.model.mlp.input_dim() != ck.model.encoder.output_dim())
    throw FormatError("checkpoint MLP input does not match the encoder output");
  detail::read_f32_block(r, ck.model.encoder.params(), "embedding");
  detail::read_f32_block(r, ck.model.mlp.params(), "mlp");
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint at offset " + std::to_string(r.offset()));
  return ck;
}

template <class Scalar = float>
Checkpoint<encoding::TesseractEncoder<Scalar>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint<Scalar>(std::move(bytes));
}

}  // namespace tvinr::nn
