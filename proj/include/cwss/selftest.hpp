#pragma once

// Release-gate checks run by `cwss selftest`: a second, entrywise construction
// of the link matrix, TV operator vs neighbour-sum agreement, l1 vs exhaustive
// l0 supports on a small grid, and adjoint identities.

#include "cwss/correlate.hpp"
#include "cwss/sampling.hpp"
#include "cwss/solve.hpp"
#include "cwss/tvops.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cwss {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using TvBuilder = std::function<TvOperator(int, int)>;

/// A(i, j) from closed-form entries of the factors, one scalar sum per entry.
inline CMatrix link_matrix_entrywise(const CMatrix& phi) {
  const Eigen::Index m = phi.rows();
  const Eigen::Index n = phi.cols();
  const auto f = [&](Eigen::Index c) { return phi(0, c); };
  const auto bar = [&](Eigen::Index i, Eigen::Index k) { return i == 0 ? cplx(0.0) : phi(m - i, k); };
  CMatrix a = CMatrix::Zero(2 * m, 2 * n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      cplx left = 0.0, right = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k + j >= n) left += bar(i, k) * std::conj(f(k + j - n));
        if (k + j < n) right += bar(i, k) * std::conj(f(k + j));
      }
      a(i, j) = left;
      a(i, j + n) = right;
    }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      cplx left = 0.0, right = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k < j) left += phi(i, k) * f(n - (j - k));
        if (k >= j) right += phi(i, k) * f(k - j);
      }
      a(m + i, j) = left;
      a(m + i, j + n) = right;
    }
  return a;
}

namespace detail {

/// Small-integer complex entries keep every product and sum exact, so the two
/// constructions can be compared with ==.
inline CMatrix integer_phi(int m, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> v(-3, 3);
  CMatrix phi(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) phi(i, j) = cplx(v(rng), v(rng));
  return phi;
}

}  // namespace detail

inline CheckResult check_link_oracle(int pairs = 50, std::uint64_t seed = 7) {
  std::mt19937_64 rng(mix_seed(seed, 21));
  std::uniform_int_distribution<int> pick_n(1, 32);
  int mismatches = 0;
  for (int p = 0; p < pairs; ++p) {
    const int n = pick_n(rng);
    const int m = std::uniform_int_distribution<int>(1, n)(rng);
    const MeasurementMatrix sel = make_subsampling_matrix(m, n, rng());
    const CMatrix phis[2] = {sel.dense().cast<cplx>(), detail::integer_phi(m, n, rng)};
    for (const CMatrix& phi : phis)
      if (build_link_matrix(phi).a != link_matrix_entrywise(phi)) ++mismatches;
  }
  return {"link matrix: block assembly == entrywise", mismatches == 0,
          std::to_string(2 * pairs - mismatches) + "/" + std::to_string(2 * pairs) + " exact"};
}

/// Integer P with zero first/last frequency rows and zero last column; on that
/// support the operator and the neighbour sum agree exactly.
inline RMatrix tv_test_matrix(int n2, int t, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> v(-9, 9);
  RMatrix p = RMatrix::Zero(n2, t);
  for (int j = 0; j + 1 < t; ++j)
    for (int i = 1; i + 1 < n2; ++i) p(i, j) = v(rng);
  return p;
}

inline CheckResult check_tv_equivalence(const TvBuilder& builder, int instances = 100, std::uint64_t seed = 7) {
  std::mt19937_64 rng(mix_seed(seed, 22));
  const std::pair<int, int> shapes[] = {{8, 2}, {16, 4}};
  int failures = 0, total = 0;
  for (auto [n2, t] : shapes) {
    const TvOperator v = builder(n2, t);
    if (total_variation_operator_norm(v, RVector::Zero(n2 * t)) != 0.0 ||
        total_variation_sum(RMatrix::Zero(n2, t)) != 0.0)
      ++failures;
    for (int k = 0; k < instances; ++k, ++total) {
      const RMatrix p = tv_test_matrix(n2, t, rng);
      if (total_variation_operator_norm(v, vec(p)) != total_variation_sum(p)) ++failures;
    }
  }
  return {"TV operator == neighbour sum", failures == 0,
          std::to_string(total - std::min(failures, total)) + "/" + std::to_string(total) + " exact"};
}

/// Indices whose magnitude exceeds rel * max|p|.
inline std::vector<int> support_of(const RVector& p, double rel = 1e-3) {
  std::vector<int> s;
  const double peak = p.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return s;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (std::abs(p[i]) > rel * peak) s.push_back(static_cast<int>(i));
  return s;
}

struct L0AgreementStats {
  int instances = 0;
  int agree = 0;
};

/// Noiseless 2-sparse nonnegative PSDs on a 2N = 16 grid with M in [5, 8].
inline L0AgreementStats l0_lasso_agreement(int instances, std::uint64_t seed) {
  constexpr int n = 8;
  std::mt19937_64 rng(mix_seed(seed, 23));
  std::uniform_int_distribution<int> pick_m(5, n);
  std::uniform_int_distribution<int> pick_bin(0, 2 * n - 1);
  std::uniform_real_distribution<double> level(0.5, 1.0);
  SolverConfig cfg;
  cfg.mu_factor = 1e-6;
  cfg.max_iter = 50000;
  L0AgreementStats st;
  for (int k = 0; k < instances; ++k) {
    const MeasurementMatrix phi = make_subsampling_matrix(pick_m(rng), n, rng());
    const DictionaryBundle bundle = build_sensing_dictionary(phi);
    RVector p0 = RVector::Zero(2 * n);
    const int a = pick_bin(rng);
    int b = pick_bin(rng);
    while (b == a) b = pick_bin(rng);
    p0[a] = level(rng);
    p0[b] = level(rng);
    const CVector r = bundle.d * p0.cast<cplx>();
    const auto l0 = l0_oracle(bundle.d, r, 2, 1e-9 * r.norm());
    const SolveResult res = solve_lasso_cwss(bundle, AutocorrVector{n, r}, cfg);
    ++st.instances;
    if (l0 && support_of(res.p_hat.col(0)) == l0->support) ++st.agree;
  }
  return st;
}

inline CheckResult check_l0_lasso(int instances = 20, std::uint64_t seed = 7) {
  const L0AgreementStats st = l0_lasso_agreement(instances, seed);
  return {"l1 support == exhaustive l0 support (2N = 16)", st.agree * 100 >= 95 * st.instances,
          std::to_string(st.agree) + "/" + std::to_string(st.instances) + " agree"};
}

inline CheckResult check_adjoints(std::uint64_t seed = 7) {
  std::mt19937_64 rng(mix_seed(seed, 24));
  std::normal_distribution<double> g(0.0, 1.0);
  const auto crand = [&](Eigen::Index len) {
    CVector v(len);
    for (Eigen::Index i = 0; i < len; ++i) v[i] = cplx(g(rng), g(rng));
    return v;
  };
  const auto rrand = [&](Eigen::Index len) {
    RVector v(len);
    for (Eigen::Index i = 0; i < len; ++i) v[i] = g(rng);
    return v;
  };
  double worst = 0.0;
  const auto rel = [&](cplx lhs, cplx rhs) {
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  };

  const MeasurementMatrix phi = make_subsampling_matrix(6, 16, rng());
  const DictionaryBundle bundle = build_sensing_dictionary(phi);
  const StackedOperator b(bundle.d, 3);
  const CVector x = crand(b.cols()), y = crand(b.rows());
  rel(y.dot(b.apply(x)), b.adjoint(y).dot(x));

  const BlockDiagonal bd(lift_real(bundle.d), 3);
  const RVector xr = rrand(bd.cols()), yr = rrand(bd.rows());
  rel(yr.dot(bd.apply(xr)), bd.adjoint(yr).dot(xr));

  const RVector p = rrand(bundle.d.cols());
  worst = std::max(worst, (lift_real(bundle.d) * p - split_real(bundle.d * p.cast<cplx>())).norm());

  const TvOperator v = build_tv_operator(32, 3);
  const RVector pv = rrand(v.cols()), qv = rrand(v.rows());
  rel(qv.dot(v.apply(pv)), (v.matrix().transpose() * qv).dot(pv));

  std::ostringstream os;
  os << "max rel err " << worst;
  return {"adjoint identities", worst < 1e-12, os.str()};
}

inline std::vector<CheckResult> run_selftest(const TvBuilder& tv_builder = build_tv_operator) {
  return {check_link_oracle(), check_tv_equivalence(tv_builder), check_l0_lasso(), check_adjoints()};
}

}  // namespace cwss
