#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdanse {

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian float64; big-endian hosts are unsupported");

// Single-file tensor container:
//
//   bytes 0..7   magic "PDNSBIN1"
//   bytes 8..15  manifest length, little-endian uint64
//   manifest     UTF-8 JSON: {"schema_version", "meta", "tensors":[{name,shape}...]}
//   payload      float64 tensors concatenated in manifest order
//
// Writing is deterministic (nlohmann::json serializes object keys sorted), so
// regenerating from the same seed produces byte-identical files.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  std::int64_t element_count() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct Container {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;

  const NamedTensor& find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw std::runtime_error("container: missing tensor '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return true;
    }
    return false;
  }
};

inline constexpr char kContainerMagic[8] = {'P', 'D', 'N', 'S', 'B', 'I', 'N', '1'};
inline constexpr int kContainerSchemaVersion = 1;

inline void write_container(const std::filesystem::path& path, const nlohmann::json& meta,
                            const std::vector<NamedTensor>& tensors) {
  nlohmann::json manifest;
  manifest["schema_version"] = kContainerSchemaVersion;
  manifest["meta"] = meta;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : tensors) {
    if (t.element_count() != static_cast<std::int64_t>(t.data.size())) {
      throw std::runtime_error("write_container: shape/data mismatch for '" + t.name + "'");
    }
    list.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  manifest["tensors"] = list;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_container: cannot open " + path.string());
  out.write(kContainerMagic, 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write_container: write failed for " + path.string());
}

inline Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_container: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kContainerMagic)) {
    throw std::runtime_error("read_container: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("read_container: truncated manifest in " + path.string());

  nlohmann::json manifest = nlohmann::json::parse(text);
  if (manifest.at("schema_version").get<int>() != kContainerSchemaVersion) {
    throw std::runtime_error("read_container: unsupported schema version");
  }
  Container c;
  c.meta = manifest.at("meta");
  for (const auto& entry : manifest.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    t.data.resize(static_cast<std::size_t>(t.element_count()));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_container: truncated payload in " + path.string());
    c.tensors.push_back(std::move(t));
  }
  return c;
}

}  // namespace pdanse
