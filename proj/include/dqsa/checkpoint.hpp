#pragma once

// Binary parameter checkpoint. Layout (all integers little-endian):
//
//   bytes 0..7    magic "DQSACKPT"
//   u32           schema version (1)
//   u32 x 4       K, input width, LSTM width, head width
//   u64           config hash
//   u32           number of arrays
//   per array:    u16 name length, name bytes (ASCII), u32 rows, u32 cols,
//                 rows*cols IEEE-754 binary64 values, row-major
//
// See docs/checkpoint_format.md.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dqsa/error.hpp"
#include "dqsa/nn.hpp"

namespace dqsa::nn {

inline constexpr std::array<char, 8> kCheckpointMagic = {'D', 'Q', 'S', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams params;
  std::uint64_t config_hash = 0;
};

namespace detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t b = 0; b < sizeof(U); ++b)
    bytes[b] = static_cast<char>((value >> (8 * b)) & 0xffU);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw IoError("checkpoint: truncated file");
  U value = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) value |= static_cast<U>(bytes[b]) << (8 * b);
  return value;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const NetworkParams& params, std::uint64_t config_hash) {
  using detail::put_le;
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  const auto& s = params.shape();
  for (int v : {s.num_channels, s.input_width, s.lstm_width, s.head_width})
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  put_le<std::uint64_t>(os, config_hash);
  put_le<std::uint32_t>(os, kParamCount);
  const auto values = params.values();
  for (int p = 0; p < kParamCount; ++p) {
    const auto name = kParamNames[static_cast<std::size_t>(p)];
    const auto& slice = params.slice(static_cast<Param>(p));
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(slice.rows));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(slice.cols));
    for (std::size_t k = 0; k < slice.size(); ++k)
      put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(values[slice.offset + k]));
  }
  if (!os) throw IoError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  using detail::get_le;
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw IoError("checkpoint: bad magic");
  if (const auto version = get_le<std::uint32_t>(is); version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported schema version " + std::to_string(version));
  NetworkShape shape;
  shape.num_channels = static_cast<int>(get_le<std::uint32_t>(is));
  shape.input_width = static_cast<int>(get_le<std::uint32_t>(is));
  shape.lstm_width = static_cast<int>(get_le<std::uint32_t>(is));
  shape.head_width = static_cast<int>(get_le<std::uint32_t>(is));
  Checkpoint ck{NetworkParams(shape), get_le<std::uint64_t>(is)};
  const auto count = get_le<std::uint32_t>(is);
  if (count != kParamCount) throw IoError("checkpoint: unexpected array count");
  auto values = ck.params.values();
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name(get_le<std::uint16_t>(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw IoError("checkpoint: truncated array name");
    int p = 0;
    while (p < kParamCount && kParamNames[static_cast<std::size_t>(p)] != name) ++p;
    if (p == kParamCount) throw IoError("checkpoint: unknown array '" + name + "'");
    const auto& slice = ck.params.slice(static_cast<Param>(p));
    const auto rows = get_le<std::uint32_t>(is);
    const auto cols = get_le<std::uint32_t>(is);
    if (rows != static_cast<std::uint32_t>(slice.rows) || cols != static_cast<std::uint32_t>(slice.cols))
      throw IoError("checkpoint: array '" + name + "' has inconsistent dimensions");
    for (std::size_t k = 0; k < slice.size(); ++k)
      values[slice.offset + k] = std::bit_cast<double>(get_le<std::uint64_t>(is));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const NetworkParams& params,
                            std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(os, params, config_hash);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace dqsa::nn
