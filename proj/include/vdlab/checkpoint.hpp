#pragma once

// Binary field checkpoints:
//   "BOLAB1" | int32 dim | int32 resolution | int32 components | float64 time |
//   components x resolution^dim float64 samples (row-major, component-major)
// All numbers little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "vdlab/grid.hpp"

namespace vdlab {

inline constexpr char checkpoint_magic[6] = {'B', 'O', 'L', 'A', 'B', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!is) throw ConfigError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

struct Checkpoint {
  PeriodicField field;
  double time = 0.0;
};

inline void write_checkpoint(std::ostream& os, const PeriodicField& f, double time) {
  os.write(checkpoint_magic, sizeof(checkpoint_magic));
  detail::put_le<std::int32_t>(os, f.grid().dim);
  detail::put_le<std::int32_t>(os, f.grid().n);
  detail::put_le<std::int32_t>(os, f.components());
  detail::put_le<double>(os, time);
  for (double v : f.values()) detail::put_le<double>(os, v);
  if (!os) throw Error("failed writing checkpoint");
}

// The torus period is not stored; `length` is supplied by the reader.
inline Checkpoint read_checkpoint(std::istream& is, double length = two_pi) {
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, checkpoint_magic, sizeof(magic)) != 0) throw ConfigError("not a BOLAB1 checkpoint");
  const int dim = detail::get_le<std::int32_t>(is);
  const int n = detail::get_le<std::int32_t>(is);
  const int comps = detail::get_le<std::int32_t>(is);
  const double t = detail::get_le<double>(is);
  Checkpoint cp{PeriodicField(Grid::make(dim, n, length), comps), t};
  for (double& v : cp.field.values()) v = detail::get_le<double>(is);
  return cp;
}

inline void save_checkpoint(const std::string& path, const PeriodicField& f, double time) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_checkpoint(os, f, time);
}

inline Checkpoint load_checkpoint(const std::string& path, double length = two_pi) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open checkpoint " + path);
  return read_checkpoint(is, length);
}

}  // namespace vdlab
