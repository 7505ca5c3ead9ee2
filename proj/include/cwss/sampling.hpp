#pragma once

// Random row-subsampling model of the analog-to-information converter.

#include "cwss/model.hpp"
#include "cwss/types.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace cwss {

/// M x N selection operator: row i of the dense form has a single 1 at
/// column selected_rows[i]. Rows are kept in ascending order.
class MeasurementMatrix {
 public:
  MeasurementMatrix(int n, std::vector<int> selected_rows)
      : n_(n), rows_(std::move(selected_rows)) {
    if (n_ < 1) throw std::invalid_argument("MeasurementMatrix: n must be positive");
    if (rows_.empty() || static_cast<int>(rows_.size()) > n_)
      throw std::invalid_argument("MeasurementMatrix: need 1 <= m <= n");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i] < 0 || rows_[i] >= n_)
        throw std::invalid_argument("MeasurementMatrix: row index out of range");
      if (i > 0 && rows_[i] <= rows_[i - 1])
        throw std::invalid_argument("MeasurementMatrix: rows must be strictly ascending");
    }
  }

  int m() const { return static_cast<int>(rows_.size()); }
  int n() const { return n_; }
  const std::vector<int>& selected_rows() const { return rows_; }

  RMatrix dense() const {
    RMatrix phi = RMatrix::Zero(m(), n_);
    for (int i = 0; i < m(); ++i) phi(i, rows_[static_cast<std::size_t>(i)]) = 1.0;
    return phi;
  }

 private:
  int n_;
  std::vector<int> rows_;
};

/// m = round(rate * n) clipped to [1, n].
inline int rows_for_rate(double rate, int n) {
  if (!(rate > 0.0) || rate > 1.0) throw std::invalid_argument("sub-sampling rate must lie in (0, 1]");
  const long m = std::lround(rate * n);
  return static_cast<int>(std::clamp<long>(m, 1, n));
}

/// Uniform draw of m distinct rows out of n. The draw is a prefix of one seeded
/// shuffle, so for a fixed seed the selection for m is contained in the one for m + 1.
inline MeasurementMatrix make_subsampling_matrix(int m, int n, std::uint64_t seed) {
  if (n < 1 || m < 1 || m > n) throw std::invalid_argument("make_subsampling_matrix: need 1 <= m <= n");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 5));
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return MeasurementMatrix(n, std::move(idx));
}

struct CompressiveFrame {
  int index = 0;
  CVector samples;
};

inline CompressiveFrame compress_frame(const MeasurementMatrix& phi, const NyquistFrame& x) {
  if (x.samples.size() != phi.n())
    throw std::invalid_argument("compress_frame: frame length does not match n");
  CompressiveFrame y{x.index, CVector(phi.m())};
  for (int i = 0; i < phi.m(); ++i) y.samples[i] = x.samples[phi.selected_rows()[static_cast<std::size_t>(i)]];
  return y;
}

inline std::vector<CompressiveFrame> compress_frames(const MeasurementMatrix& phi,
                                                     const std::vector<NyquistFrame>& frames) {
  std::vector<CompressiveFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(compress_frame(phi, f));
  return out;
}

inline nlohmann::json to_json(const MeasurementMatrix& phi) {
  return {{"m", phi.m()}, {"n", phi.n()}, {"rows", phi.selected_rows()}};
}

inline MeasurementMatrix measurement_from_json(const nlohmann::json& j) {
  MeasurementMatrix phi(j.at("n").get<int>(), j.at("rows").get<std::vector<int>>());
  if (phi.m() != j.at("m").get<int>()) throw std::invalid_argument("measurement json: m disagrees with rows");
  return phi;
}

}  // namespace cwss
