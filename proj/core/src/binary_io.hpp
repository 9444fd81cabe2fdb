#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include <Eigen/Core>

#include "axisforge/error.hpp"

namespace axisforge::detail {

template <class T>
T swap_bytes(T v) {
  auto b = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(b.begin(), b.end());
  return std::bit_cast<T>(b);
}

// Little-endian on disk regardless of host order.
template <class T>
void put(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) v = swap_bytes(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(ErrorCode::IoError, "truncated file");
  if constexpr (std::endian::native == std::endian::big) v = swap_bytes(v);
  return v;
}

inline void put_f64(std::ostream& os, double d) { put(os, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get<std::uint64_t>(is)); }

inline void put_f32s(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put(os, std::bit_cast<std::uint32_t>(static_cast<float>(v[i])));
}

inline Eigen::VectorXd get_f32s(std::istream& is, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = std::bit_cast<float>(get<std::uint32_t>(is));
  return v;
}

}  // namespace axisforge::detail
