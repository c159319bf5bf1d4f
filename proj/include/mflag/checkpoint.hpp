// Versioned binary checkpoint: magic, version, JSON header (config,
// vocabulary, tensor table, metadata), then float32 little-endian tensors.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mflag/corpus.hpp"
#include "mflag/model.hpp"
#include "mflag/vocab.hpp"

namespace mflag {

inline constexpr char kCheckpointMagic[8] = {'M', 'F', 'L', 'A', 'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
struct Checkpoint {
  Seq2Seq<T> model;
  Vocabulary vocab;
  nlohmann::json meta = nlohmann::json::object();  // variant name, inject flag, ...

  bool inject_enabled() const { return meta.value("inject", false); }
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
  nlohmann::json tensors = nlohmann::json::array();
  ck.model.for_each_param([&](const std::string& name, const Param<T>& p) {
    tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  });
  const nlohmann::json header = {{"config", ck.model.config},
                                 {"vocab", ck.vocab.tokens()},
                                 {"tensors", tensors},
                                 {"parameter_count", ck.model.parameter_count()},
                                 {"meta", ck.meta}};
  const std::string text = header.dump();
  auto out = detail::open_out(path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  ck.model.for_each_param([&](const std::string&, const Param<T>& p) {
    std::vector<float> buf(static_cast<std::size_t>(p.value.size()));
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p.value.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  });
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

/// Reads just the JSON header.
inline nlohmann::json read_checkpoint_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw Error(path.string() + ": not a checkpoint");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kCheckpointVersion) throw Error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (std::uint64_t{1} << 32)) throw Error(path.string() + ": corrupt header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(path.string() + ": truncated header");
  return nlohmann::json::parse(text);
}

template <typename T = float>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Checkpoint<T> ck;
  try {
    const auto header = read_checkpoint_header(in, path);
    const auto cfg = header.at("config").get<ModelConfig>();
    ck.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (ck.vocab.size() != cfg.vocab_size) throw Error(path.string() + ": vocabulary size does not match config");
    ck.meta = header.value("meta", nlohmann::json::object());
    ck.model = Seq2Seq<T>(cfg, 0);
    const auto& tensors = header.at("tensors");
    std::size_t i = 0;
    ck.model.for_each_param([&](const std::string& name, Param<T>& p) {
      if (i >= tensors.size()) throw Error(path.string() + ": missing tensor " + name);
      const auto& t = tensors[i++];
      if (t.at("name").get<std::string>() != name || t.at("rows").get<Eigen::Index>() != p.value.rows() ||
          t.at("cols").get<Eigen::Index>() != p.value.cols()) {
        throw Error(path.string() + ": tensor " + name + " has incompatible shape or order");
      }
      std::vector<float> buf(static_cast<std::size_t>(p.value.size()));
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!in) throw Error(path.string() + ": truncated tensor data for " + name);
      for (std::size_t k = 0; k < buf.size(); ++k) p.value.data()[k] = static_cast<T>(buf[k]);
    });
    if (i != tensors.size()) throw Error(path.string() + ": unexpected extra tensors");
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": bad checkpoint header: " + e.what());
  }
  return ck;
}

}  // namespace mflag
