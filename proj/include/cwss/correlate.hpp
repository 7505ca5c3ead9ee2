#pragma once

// Autocorrelation estimation and the linear maps linking the Nyquist and
// compressive autocorrelation vectors to the PSD.
//
// Index convention: the construction formulas are stated with 1-based
// indices. Everything here stores 0-based; phi(0, c) is the entry
// phi_{1, c+1}. Autocorrelation vectors of half length L are laid out as
//   values[0] = 0, values[L + j] = r(j) for -L < j < L.

#include "cwss/sampling.hpp"
#include "cwss/types.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cwss {

struct AutocorrVector {
  int half_len = 0;
  CVector values;

  cplx lag(int j) const { return values[half_len + j]; }
};

enum class Estimator { biased, unbiased };

inline AutocorrVector layout_from_lags(const std::vector<cplx>& nonneg_lags) {
  const int L = static_cast<int>(nonneg_lags.size());
  AutocorrVector r{L, CVector::Zero(2 * L)};
  for (int j = 0; j < L; ++j) {
    r.values[L + j] = nonneg_lags[static_cast<std::size_t>(j)];
    if (j > 0) r.values[L - j] = std::conj(nonneg_lags[static_cast<std::size_t>(j)]);
  }
  return r;
}

/// Lag-product estimate averaged over frames. Works for any frame type with a
/// `samples` vector (Nyquist or compressive streams).
template <class Frame>
AutocorrVector estimate_autocorr(const std::vector<Frame>& frames, int half_len, Estimator est) {
  if (frames.empty()) throw std::invalid_argument("estimate_autocorr: no frames");
  if (half_len < 1) throw std::invalid_argument("estimate_autocorr: half_len must be positive");
  std::vector<cplx> lags(static_cast<std::size_t>(half_len), cplx(0.0));
  for (const auto& f : frames) {
    if (f.samples.size() != half_len)
      throw std::invalid_argument("estimate_autocorr: frame length differs from half_len");
    for (int j = 0; j < half_len; ++j) {
      cplx acc = 0.0;
      for (int s = j; s < half_len; ++s) acc += f.samples[s] * std::conj(f.samples[s - j]);
      const double norm = est == Estimator::biased ? half_len : half_len - j;
      lags[static_cast<std::size_t>(j)] += acc / norm;
    }
  }
  for (auto& v : lags) v /= static_cast<double>(frames.size());
  return layout_from_lags(lags);
}

/// Compressive autocorrelation matched to the link matrix: entry q holds an
/// estimate of r_x(s_q - s_0), averaged over every pair of retained samples
/// whose Nyquist positions differ by that lag.
inline AutocorrVector estimate_anchored_autocorr(const std::vector<CompressiveFrame>& frames,
                                                 const MeasurementMatrix& phi) {
  if (frames.empty()) throw std::invalid_argument("estimate_anchored_autocorr: no frames");
  const int m = phi.m();
  const auto& rows = phi.selected_rows();
  std::vector<std::vector<std::pair<int, int>>> pairs(static_cast<std::size_t>(phi.n()));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b <= a; ++b)
      pairs[static_cast<std::size_t>(rows[static_cast<std::size_t>(a)] - rows[static_cast<std::size_t>(b)])]
          .emplace_back(a, b);

  std::vector<cplx> lags(static_cast<std::size_t>(m), cplx(0.0));
  for (const auto& f : frames) {
    if (f.samples.size() != m)
      throw std::invalid_argument("estimate_anchored_autocorr: frame length differs from m");
    for (int q = 0; q < m; ++q) {
      const auto& list = pairs[static_cast<std::size_t>(rows[static_cast<std::size_t>(q)] - rows[0])];
      cplx acc = 0.0;
      for (const auto& [a, b] : list) acc += f.samples[a] * std::conj(f.samples[b]);
      lags[static_cast<std::size_t>(q)] += acc / static_cast<double>(list.size());
    }
  }
  for (auto& v : lags) v /= static_cast<double>(frames.size());
  return layout_from_lags(lags);
}

/// Average of x x^H over frames.
template <class Frame>
CMatrix sample_covariance(const std::vector<Frame>& frames) {
  if (frames.empty()) throw std::invalid_argument("sample_covariance: no frames");
  const auto len = frames.front().samples.size();
  CMatrix r = CMatrix::Zero(len, len);
  for (const auto& f : frames) r.noalias() += f.samples * f.samples.adjoint();
  return r / static_cast<double>(frames.size());
}

/// hankel(a, b): first column a, last row b (b[0] is overridden by a.back()).
inline CMatrix hankel(const CVector& a, const CVector& b) {
  const Eigen::Index rows = a.size();
  const Eigen::Index cols = b.size();
  CMatrix h(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      h(i, j) = i + j < rows ? a[i + j] : b[i + j - rows + 1];
  return h;
}

/// toeplitz(c, r): first column c, first row r (r[0] is overridden by c[0]).
inline CMatrix toeplitz(const CVector& c, const CVector& r) {
  CMatrix t(c.size(), r.size());
  for (Eigen::Index i = 0; i < c.size(); ++i)
    for (Eigen::Index j = 0; j < r.size(); ++j) t(i, j) = i >= j ? c[i - j] : r[j - i];
  return t;
}

/// Row 0 zero; row i >= 1 copies row M - i of phi.
inline CMatrix build_phi_bar(const CMatrix& phi) {
  const Eigen::Index m = phi.rows();
  CMatrix bar = CMatrix::Zero(m, phi.cols());
  for (Eigen::Index i = 1; i < m; ++i) bar.row(i) = phi.row(m - i);
  return bar;
}

inline CMatrix build_phi_bar(const MeasurementMatrix& phi) {
  return build_phi_bar(CMatrix(phi.dense().cast<cplx>()));
}

struct BlockMatrices {
  CMatrix phi1, phi2, phi3, phi4;
};

/// The four N x N hankel/toeplitz factors, all built from the first row of phi.
inline BlockMatrices build_block_matrices(const CMatrix& phi) {
  const Eigen::Index n = phi.cols();
  const auto first = [&](Eigen::Index c) { return phi(0, c); };
  CVector zeros = CVector::Zero(n);

  CVector b1 = CVector::Zero(n);
  for (Eigen::Index k = 1; k < n; ++k) b1[k] = std::conj(first(k - 1));

  CVector a2(n);
  for (Eigen::Index k = 0; k < n; ++k) a2[k] = std::conj(first(k));
  CVector b2 = CVector::Zero(n);
  b2[0] = std::conj(first(n - 1));

  CVector r3 = CVector::Zero(n);
  for (Eigen::Index k = 1; k < n; ++k) r3[k] = first(n - k);

  CVector c4(n);
  for (Eigen::Index k = 0; k < n; ++k) c4[k] = first(k);
  CVector r4 = CVector::Zero(n);
  r4[0] = first(0);

  return {hankel(zeros, b1), hankel(a2, b2), toeplitz(zeros, r3), toeplitz(c4, r4)};
}

struct LinkMatrix {
  CMatrix a;  // 2M x 2N
  CMatrix phibar_phi1, phibar_phi2, phi_phi3, phi_phi4;
};

/// A = [[phibar phi1, phibar phi2], [phi phi3, phi phi4]], so that r_y = A r_x.
inline LinkMatrix build_link_matrix(const CMatrix& phi) {
  const Eigen::Index m = phi.rows();
  const Eigen::Index n = phi.cols();
  const CMatrix bar = build_phi_bar(phi);
  const BlockMatrices blk = build_block_matrices(phi);
  LinkMatrix link;
  link.phibar_phi1 = bar * blk.phi1;
  link.phibar_phi2 = bar * blk.phi2;
  link.phi_phi3 = phi * blk.phi3;
  link.phi_phi4 = phi * blk.phi4;
  link.a.resize(2 * m, 2 * n);
  link.a << link.phibar_phi1, link.phibar_phi2, link.phi_phi3, link.phi_phi4;
  return link;
}

inline LinkMatrix build_link_matrix(const MeasurementMatrix& phi) {
  return build_link_matrix(CMatrix(phi.dense().cast<cplx>()));
}

/// Psi[k, l] = exp(+2 pi i k l / two_n) / two_n.
inline CMatrix build_idft(int two_n) {
  if (two_n < 2 || two_n % 2 != 0) throw std::invalid_argument("build_idft: size must be even and >= 2");
  CMatrix psi(two_n, two_n);
  for (int k = 0; k < two_n; ++k)
    for (int l = 0; l < two_n; ++l)
      psi(k, l) = std::polar(1.0 / two_n, 2.0 * std::numbers::pi * ((static_cast<long>(k) * l) % two_n) / two_n);
  return psi;
}

/// Forward DFT, the inverse of build_idft.
inline CMatrix build_dft(int two_n) {
  if (two_n < 2 || two_n % 2 != 0) throw std::invalid_argument("build_dft: size must be even and >= 2");
  CMatrix f(two_n, two_n);
  for (int k = 0; k < two_n; ++k)
    for (int l = 0; l < two_n; ++l)
      f(k, l) = std::polar(1.0, -2.0 * std::numbers::pi * ((static_cast<long>(k) * l) % two_n) / two_n);
  return f;
}

/// Psi * diag((-1)^l). Maps a PSD on bins l / 2N (cycles per sample) onto the
/// lag-centered autocorrelation layout: row k carries lag k - N.
inline CMatrix build_lag_idft(int two_n) {
  CMatrix psi = build_idft(two_n);
  for (int l = 1; l < two_n; l += 2) psi.col(l) = -psi.col(l);
  return psi;
}

/// Nyquist autocorrelation vector of a PSD in the standard layout. Entry 0
/// (lag -N, not observable from N samples) is zero.
inline AutocorrVector nyquist_autocorr_from_psd(const RVector& psd) {
  const int two_n = static_cast<int>(psd.size());
  AutocorrVector r{two_n / 2, build_lag_idft(two_n) * psd.cast<cplx>()};
  r.values[0] = 0.0;
  return r;
}

struct DictionaryBundle {
  CMatrix a;    // 2M x 2N
  CMatrix psi;  // 2N x 2N
  CMatrix d;    // A * Psi

  int m() const { return static_cast<int>(d.rows() / 2); }
  int n() const { return static_cast<int>(d.cols() / 2); }
};

inline DictionaryBundle build_dictionary(const LinkMatrix& link, const CMatrix& psi) {
  if (link.a.cols() != psi.rows())
    throw std::invalid_argument("build_dictionary: A columns do not match Psi rows");
  return {link.a, psi, link.a * psi};
}

/// Dictionary for a row-subsampling operator on the lag-centered grid.
inline DictionaryBundle build_sensing_dictionary(const MeasurementMatrix& phi) {
  return build_dictionary(build_link_matrix(phi), build_lag_idft(2 * phi.n()));
}

/// T-period operator: vec(D P) = B vec(P) under column-major vec, i.e.
/// B = I_T (x) D applied block by block.
class StackedOperator {
 public:
  StackedOperator(CMatrix d, int t_periods) : d_(std::move(d)), t_(t_periods) {
    if (t_ < 1) throw std::invalid_argument("StackedOperator: t_periods must be >= 1");
  }

  Eigen::Index rows() const { return d_.rows() * t_; }
  Eigen::Index cols() const { return d_.cols() * t_; }
  int periods() const { return t_; }
  const CMatrix& block() const { return d_; }

  CVector apply(const CVector& x) const {
    if (x.size() != cols()) throw std::invalid_argument("StackedOperator::apply: length mismatch");
    CVector y(rows());
    for (int t = 0; t < t_; ++t)
      y.segment(t * d_.rows(), d_.rows()).noalias() = d_ * x.segment(t * d_.cols(), d_.cols());
    return y;
  }

  CVector adjoint(const CVector& y) const {
    if (y.size() != rows()) throw std::invalid_argument("StackedOperator::adjoint: length mismatch");
    CVector x(cols());
    for (int t = 0; t < t_; ++t)
      x.segment(t * d_.cols(), d_.cols()).noalias() = d_.adjoint() * y.segment(t * d_.rows(), d_.rows());
    return x;
  }

  CMatrix dense() const {
    CMatrix b = CMatrix::Zero(rows(), cols());
    for (int t = 0; t < t_; ++t) b.block(t * d_.rows(), t * d_.cols(), d_.rows(), d_.cols()) = d_;
    return b;
  }

 private:
  CMatrix d_;
  int t_;
};

inline StackedOperator build_stacked_operator(const CMatrix& d, int t_periods) {
  return StackedOperator(d, t_periods);
}

}  // namespace cwss
