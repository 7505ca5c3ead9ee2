#pragma once

// Flat binary matrix dumps for cross-language diffing: row-major,
// little-endian complex64 (float re, float im) pairs, plus a JSON sidecar.

#include "cwss/types.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwss {

namespace detail {

inline void put_le32(std::vector<char>& out, float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xffu));
}

inline float get_le32(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(u);
}

}  // namespace detail

inline std::vector<char> encode_complex64(const CMatrix& m) {
  std::vector<char> out;
  out.reserve(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      detail::put_le32(out, static_cast<float>(m(i, j).real()));
      detail::put_le32(out, static_cast<float>(m(i, j).imag()));
    }
  return out;
}

inline CMatrix decode_complex64(const std::vector<char>& bytes, Eigen::Index rows, Eigen::Index cols) {
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8)
    throw std::invalid_argument("decode_complex64: byte count does not match shape");
  CMatrix m(rows, cols);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j, p += 8) m(i, j) = cplx(detail::get_le32(p), detail::get_le32(p + 4));
  return m;
}

inline nlohmann::json matrix_sidecar(const CMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "complex64"}};
}

/// Writes `<stem>.bin` and `<stem>.json`.
inline void export_matrix(const std::filesystem::path& stem, const CMatrix& m) {
  const auto bytes = encode_complex64(m);
  std::filesystem::path bin = stem, side = stem;
  bin += ".bin";
  side += ".json";
  std::ofstream b(bin, std::ios::binary);
  b.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream s(side);
  s << matrix_sidecar(m).dump(2) << '\n';
  if (!b || !s) throw std::runtime_error("export_matrix: write failed for " + stem.string());
}

inline CMatrix import_matrix(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, side = stem;
  bin += ".bin";
  side += ".json";
  std::ifstream s(side);
  if (!s) throw std::runtime_error("import_matrix: missing sidecar " + side.string());
  const auto meta = nlohmann::json::parse(s);
  if (meta.at("dtype") != "complex64") throw std::runtime_error("import_matrix: unsupported dtype");
  std::ifstream b(bin, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  return decode_complex64(bytes, meta.at("rows").get<Eigen::Index>(), meta.at("cols").get<Eigen::Index>());
}

}  // namespace cwss
