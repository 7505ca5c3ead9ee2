#pragma once

// Total-variation operator over the 2N x T PSD matrix, stored by column-major vec.

#include "cwss/types.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace cwss {

/// V = [V1; V2; V3; V4], each block (n2*t) x (n2*t).
///   V1: backward frequency difference p_i - p_{i-1}; the first bin of each
///       column keeps only its +1.
///   V2: temporal difference p_{i+n2} - p_i; last-column rows keep only -1.
///   V3: forward frequency difference p_i - p_{i+1}; the last bin of each
///       column keeps only its +1.
///   V4: temporal difference p_i - p_{i+n2}; last-column rows keep only +1.
/// Frequency differences never cross from one sensing period to the next.
class TvOperator {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  TvOperator(int n2, int t, std::vector<Sparse> blocks) : n2_(n2), t_(t), blocks_(std::move(blocks)) {
    if (blocks_.size() != 4) throw std::invalid_argument("TvOperator: need four blocks");
    const Eigen::Index len = static_cast<Eigen::Index>(n2_) * t_;
    v_.resize(4 * len, len);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t b = 0; b < 4; ++b) {
      if (blocks_[b].rows() != len || blocks_[b].cols() != len)
        throw std::invalid_argument("TvOperator: block shape mismatch");
      for (Eigen::Index r = 0; r < len; ++r)
        for (Sparse::InnerIterator it(blocks_[b], r); it; ++it)
          trip.emplace_back(static_cast<Eigen::Index>(b) * len + r, it.col(), it.value());
    }
    v_.setFromTriplets(trip.begin(), trip.end());
  }

  int n2() const { return n2_; }
  int periods() const { return t_; }
  Eigen::Index rows() const { return v_.rows(); }
  Eigen::Index cols() const { return v_.cols(); }
  const Sparse& matrix() const { return v_; }
  const Sparse& block(int i) const { return blocks_.at(static_cast<std::size_t>(i)); }

  RVector apply(const RVector& p) const {
    if (p.size() != cols()) throw std::invalid_argument("TvOperator::apply: length mismatch");
    return v_ * p;
  }

  /// Coordinate triplets, 0-based, one "row,col,val" line each.
  void dump_csv(std::ostream& os) const {
    os << "row,col,val\n";
    for (Eigen::Index r = 0; r < v_.rows(); ++r)
      for (Sparse::InnerIterator it(v_, r); it; ++it) os << r << ',' << it.col() << ',' << it.value() << '\n';
  }

 private:
  int n2_;
  int t_;
  std::vector<Sparse> blocks_;
  Sparse v_;
};

inline TvOperator build_tv_operator(int n2, int t) {
  if (n2 < 2 || n2 % 2 != 0) throw std::invalid_argument("build_tv_operator: n2 must be even and >= 2");
  if (t < 1) throw std::invalid_argument("build_tv_operator: t must be >= 1");
  const int len = n2 * t;
  using Trip = Eigen::Triplet<double>;
  std::vector<std::vector<Trip>> trips(4);
  for (int i = 0; i < len; ++i) {
    const bool first_bin = i % n2 == 0;
    const bool last_bin = i % n2 == n2 - 1;
    const bool last_period = i + n2 >= len;

    trips[0].emplace_back(i, i, 1.0);
    if (!first_bin) trips[0].emplace_back(i, i - 1, -1.0);

    trips[1].emplace_back(i, i, -1.0);
    if (!last_period) trips[1].emplace_back(i, i + n2, 1.0);

    trips[2].emplace_back(i, i, 1.0);
    if (!last_bin) trips[2].emplace_back(i, i + 1, -1.0);

    trips[3].emplace_back(i, i, 1.0);
    if (!last_period) trips[3].emplace_back(i, i + n2, -1.0);
  }
  std::vector<TvOperator::Sparse> blocks;
  for (auto& tr : trips) {
    TvOperator::Sparse b(len, len);
    b.setFromTriplets(tr.begin(), tr.end());
    blocks.push_back(std::move(b));
  }
  return TvOperator(n2, t, std::move(blocks));
}

/// Four-neighbour absolute-difference sum over the matrix; neighbours outside
/// the matrix are dropped.
inline double total_variation_sum(const RMatrix& p) {
  double sum = 0.0;
  const Eigen::Index rows = p.rows();
  const Eigen::Index cols = p.cols();
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = p(i, j);
      if (i > 0) sum += std::abs(v - p(i - 1, j));
      if (i + 1 < rows) sum += std::abs(v - p(i + 1, j));
      if (j > 0) sum += std::abs(v - p(i, j - 1));
      if (j + 1 < cols) sum += std::abs(v - p(i, j + 1));
    }
  return sum;
}

/// ||V p||_1.
inline double total_variation_operator_norm(const TvOperator& v, const RVector& p_vec) {
  if (p_vec.size() != v.cols())
    throw std::invalid_argument("total_variation_operator_norm: length mismatch");
  return v.apply(p_vec).lpNorm<1>();
}

inline RVector vec(const RMatrix& p) { return Eigen::Map<const RVector>(p.data(), p.size()); }

inline RMatrix unvec(const RVector& p, Eigen::Index rows) {
  return Eigen::Map<const RMatrix>(p.data(), rows, p.size() / rows);
}

}  // namespace cwss
