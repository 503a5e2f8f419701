#pragma once

// Self-describing binary container shared by the corpus cache and model
// checkpoints: an 8-byte magic, a u32 format version, a JSON metadata
// block, then a raw little-endian double payload described by the JSON.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace stance::container {

using nlohmann::json;

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

inline std::uint32_t read_u32(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

inline std::uint64_t read_u64(std::istream& in) {
  char buf[8];
  in.read(buf, 8);
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

struct Reader {
  std::uint32_t version = 0;
  json meta;
  std::ifstream in;
};

inline void write_container(const std::string& path, const char magic[8],
                            std::uint32_t version, const json& meta,
                            const std::vector<const double*>& blocks,
                            const std::vector<std::size_t>& block_sizes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(magic, 8);
  write_u32(out, version);
  std::string meta_str = meta.dump();
  write_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i)
    out.write(reinterpret_cast<const char*>(blocks[i]),
              static_cast<std::streamsize>(block_sizes[i] * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Reader open_container(const std::string& path, const char magic[8],
                             std::uint32_t expected_version) {
  Reader r;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw std::runtime_error("cannot open " + path);
  char got[8];
  r.in.read(got, 8);
  if (!r.in || std::memcmp(got, magic, 8) != 0)
    throw std::runtime_error(path + ": not a " + std::string(magic, 8) +
                             " file");
  r.version = read_u32(r.in);
  if (r.version != expected_version)
    throw std::runtime_error(path + ": format version " +
                             std::to_string(r.version) + ", expected " +
                             std::to_string(expected_version));
  std::uint64_t len = read_u64(r.in);
  std::string meta_str(len, '\0');
  r.in.read(meta_str.data(), static_cast<std::streamsize>(len));
  if (!r.in) throw std::runtime_error(path + ": truncated metadata");
  r.meta = json::parse(meta_str);
  return r;
}

inline void read_block(Reader& r, double* dst, std::size_t count,
                       const std::string& what) {
  r.in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!r.in) throw std::runtime_error("truncated payload reading " + what);
}

}  // namespace stance::container
