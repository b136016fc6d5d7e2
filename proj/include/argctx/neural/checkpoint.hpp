#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   "ARGCTXCK"                      8-byte magic
//   u32 version                     currently 1
//   u64 header length, bytes        UTF-8 JSON (config echo and metadata)
//   u64 block count
//   per block:
//     u32 name length, name bytes
//     u8  trainable flag
//     u64 rows, u64 cols
//     rows*cols f64 values, column-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'G', 'C', 'T', 'X', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(UInt));
}

template <class UInt>
UInt get_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) throw DataError("checkpoint: unexpected end of file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw DataError("checkpoint: implausible field length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: unexpected end of file");
  return s;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const std::string& header, const ParameterSet& params) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_le<std::uint64_t>(out, params.size());
  for (const auto& b : params.blocks()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    detail::put_le<std::uint8_t>(out, b.trainable ? 1 : 0);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(b.value.rows()));
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(b.value.cols()));
    const double* data = b.value.data();
    for (Eigen::Index i = 0; i < b.value.size(); ++i) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(data[i]));
  }
  if (!out) throw DataError("checkpoint: write failed");
}

struct Checkpoint {
  std::string header;
  ParameterSet params;
};

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.header = detail::get_bytes(in, detail::get_le<std::uint64_t>(in));
  const auto n = detail::get_le<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string name = detail::get_bytes(in, detail::get_le<std::uint32_t>(in));
    const bool trainable = detail::get_le<std::uint8_t>(in) != 0;
    const auto rows = detail::get_le<std::uint64_t>(in);
    const auto cols = detail::get_le<std::uint64_t>(in);
    if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw DataError("checkpoint: implausible block shape");
    const auto idx = ck.params.add(std::move(name), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), trainable);
    double* data = ck.params[idx].data();
    for (Eigen::Index i = 0; i < ck.params[idx].size(); ++i) data[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const std::string& header, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, header, params);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace argctx::nn
