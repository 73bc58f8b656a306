#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dyfulm/model.hpp"

namespace dyfulm {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");
static_assert(std::numeric_limits<double>::is_iec559, "checkpoint blobs assume IEEE-754 doubles");

// manifest at `path` (JSON), raw float64 blob at `path`.bin; offsets are byte
// positions inside the blob, starting after its 8-byte magic
inline constexpr char kBlobMagic[8] = {'D', 'Y', 'F', 'U', 'L', 'M', '0', '1'};

inline std::string blob_path(const std::string& manifest_path) { return manifest_path + ".bin"; }

inline void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["config"] = {{"model", model.config()}};
  nlohmann::json tensors = nlohmann::json::array();

  std::ofstream blob(blob_path(path), std::ios::binary);
  if (!blob) throw std::runtime_error("checkpoint: cannot write " + blob_path(path));
  blob.write(kBlobMagic, sizeof(kBlobMagic));
  std::uint64_t offset = sizeof(kBlobMagic);
  for (const auto& [name, t] : model.named_params()) {
    const std::uint64_t length = static_cast<std::uint64_t>(t.numel()) * sizeof(double);
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"dtype", "f64"},
                       {"offset", offset},
                       {"length", length}});
    blob.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(length));
    offset += length;
  }
  blob.flush();
  if (!blob) throw std::runtime_error("checkpoint: short write to " + blob_path(path));
  manifest["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << manifest.dump(1) << '\n';
  if (!out) throw std::runtime_error("checkpoint: short write to " + path);
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: " + path + " is not valid JSON: " + e.what());
  }
  if (manifest.value("format_version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported format_version in " + path);

  const ModelConfig cfg = manifest.at("config").at("model").get<ModelConfig>();
  Model model(cfg, 0);

  struct Entry {
    std::vector<int> shape;
    std::uint64_t offset = 0, length = 0;
  };
  std::unordered_map<std::string, Entry> entries;
  for (const auto& t : manifest.at("tensors")) {
    Entry e;
    e.shape = t.at("shape").get<std::vector<int>>();
    e.offset = t.at("offset").get<std::uint64_t>();
    e.length = t.at("length").get<std::uint64_t>();
    if (t.value("dtype", "") != "f64")
      throw std::runtime_error("checkpoint: unsupported dtype for tensor " +
                               t.value("name", std::string("?")));
    entries[t.at("name").get<std::string>()] = std::move(e);
  }
  if (entries.size() != model.named_params().size())
    throw std::runtime_error("checkpoint: manifest lists " + std::to_string(entries.size()) +
                             " tensors but the config builds " +
                             std::to_string(model.named_params().size()));

  std::ifstream blob(blob_path(path), std::ios::binary | std::ios::ate);
  if (!blob) throw std::runtime_error("checkpoint: cannot open " + blob_path(path));
  const std::uint64_t blob_size = static_cast<std::uint64_t>(blob.tellg());
  blob.seekg(0);
  char magic[sizeof(kBlobMagic)];
  if (!blob.read(magic, sizeof(magic)) || std::memcmp(magic, kBlobMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + blob_path(path));

  for (auto& [name, t] : model.named_params()) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    const Entry& e = it->second;
    if (e.shape != t.shape())
      throw std::runtime_error("checkpoint: tensor " + name + " has shape " + shape_str(e.shape) +
                               " but the config expects " + shape_str(t.shape()));
    if (e.length != static_cast<std::uint64_t>(t.numel()) * sizeof(double))
      throw std::runtime_error("checkpoint: tensor " + name + " length disagrees with its shape");
    if (e.offset < sizeof(kBlobMagic) || e.offset + e.length > blob_size)
      throw std::runtime_error("checkpoint: tensor " + name + " lies outside the blob (truncated file?)");
    blob.seekg(static_cast<std::streamoff>(e.offset));
    Tensor dst = t;
    if (!blob.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(e.length)))
      throw std::runtime_error("checkpoint: short read for tensor " + name);
  }
  return model;
}

}  // namespace dyfulm
