#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bmix/field.hpp"
#include "bmix/grid.hpp"

namespace bmix {

// Binary field format, little-endian throughout:
//   magic "BMIX", version u32, then d, M, L as f64, then M^d complex-f64
//   pairs in row-major site order. Version 2 (many-body checkpoints)
//   extends the header by N1, N2 as f64 before the amplitudes.
inline constexpr char kFieldMagic[4] = {'B', 'M', 'I', 'X'};
inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::uint32_t kManyBodyVersion = 2;

namespace detail {

inline void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline double get_f64(std::istream& is) {
  double v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

inline void write_header(std::ostream& os, std::uint32_t version, const GridSpec& g) {
  os.write(kFieldMagic, 4);
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  put_f64(os, static_cast<double>(g.d));
  put_f64(os, static_cast<double>(g.m));
  put_f64(os, g.box);
}

inline std::uint32_t read_header(std::istream& is, GridSpec& g) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFieldMagic, 4) != 0)
    throw std::runtime_error("field file: bad magic");
  std::uint32_t version;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  g.d = static_cast<int>(get_f64(is));
  g.m = static_cast<int>(get_f64(is));
  g.box = get_f64(is);
  if (!is) throw std::runtime_error("field file: truncated header");
  g.validate();
  return version;
}

inline void write_amplitudes(std::ostream& os, const std::vector<cx>& v) {
  for (const auto& z : v) {
    put_f64(os, z.real());
    put_f64(os, z.imag());
  }
}

inline void read_amplitudes(std::istream& is, std::vector<cx>& v) {
  for (auto& z : v) {
    const double re = get_f64(is);
    const double im = get_f64(is);
    z = cx{re, im};
  }
  if (!is) throw std::runtime_error("field file: truncated amplitudes");
}

}  // namespace detail

inline void write_field(const std::string& path, const Field& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  detail::write_header(os, kFieldVersion, f.grid);
  detail::write_amplitudes(os, f.values);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Field read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  GridSpec g;
  const auto version = detail::read_header(is, g);
  if (version != kFieldVersion)
    throw std::runtime_error("field file: unexpected version");
  Field f(g);
  detail::read_amplitudes(is, f.values);
  return f;
}

}  // namespace bmix
