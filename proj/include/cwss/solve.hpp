#pragma once

// Constrained-L1 recovery:
//   minimize ||W p||_1  subject to  ||b - B p||_2 <= mu
// solved by ADMM on the splitting z = W p, w = B p (w confined to the mu-ball
// around b), with over-relaxation and residual balancing. LASSO recovery uses
// W = I; total-variation recovery uses W = V.

#include "cwss/correlate.hpp"
#include "cwss/tvops.hpp"
#include "cwss/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace cwss {

inline constexpr double kDefaultMuFactor = 0.05;

struct SolverConfig {
  std::optional<double> mu;  // unset: mu_factor * ||b||_2
  double mu_factor = kDefaultMuFactor;
  int max_iter = 10000;
  double primal_tol = 1e-6;
  double dual_tol = 1e-6;
  double penalty_rho = 1.0;
  bool nonneg_constraint = false;
  double constraint_slack_tol = 1e-6;
  double relaxation = 1.6;

  void validate() const {
    if (mu && !(*mu >= 0.0)) throw std::invalid_argument("SolverConfig: mu must be >= 0");
    if (!(mu_factor >= 0.0)) throw std::invalid_argument("SolverConfig: mu_factor must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
    if (!(primal_tol > 0.0) || !(dual_tol > 0.0) || !(constraint_slack_tol > 0.0))
      throw std::invalid_argument("SolverConfig: tolerances must be positive");
    if (!(penalty_rho > 0.0)) throw std::invalid_argument("SolverConfig: penalty_rho must be positive");
    if (!(relaxation > 0.0) || !(relaxation < 2.0))
      throw std::invalid_argument("SolverConfig: relaxation must lie in (0, 2)");
  }

  double radius(double measurement_norm) const { return mu ? *mu : mu_factor * measurement_norm; }
};

struct SolveResult {
  RMatrix p_hat;  // 2N x T (a single column for LASSO)
  int iterations = 0;
  double primal_residual = 0.0;  // relative
  double dual_residual = 0.0;    // relative
  double objective = 0.0;        // ||W p_hat||_1
  double constraint_residual = 0.0;  // ||b - B p_hat||_2
  double mu = 0.0;
  bool converged = false;
};

/// Real operator made of `copies` repetitions of `block` on the diagonal.
struct BlockDiagonal {
  RMatrix block;
  int copies = 1;

  BlockDiagonal(RMatrix b, int c = 1) : block(std::move(b)), copies(c) {
    if (copies < 1) throw std::invalid_argument("BlockDiagonal: copies must be >= 1");
  }

  Eigen::Index rows() const { return block.rows() * copies; }
  Eigen::Index cols() const { return block.cols() * copies; }

  RVector apply(const RVector& x) const {
    RVector y(rows());
    for (int t = 0; t < copies; ++t)
      y.segment(t * block.rows(), block.rows()).noalias() = block * x.segment(t * block.cols(), block.cols());
    return y;
  }

  RVector adjoint(const RVector& y) const {
    RVector x(cols());
    for (int t = 0; t < copies; ++t)
      x.segment(t * block.cols(), block.cols()).noalias() =
          block.transpose() * y.segment(t * block.rows(), block.rows());
    return x;
  }

  RMatrix gram() const {
    const RMatrix g = block.transpose() * block;
    RMatrix full = RMatrix::Zero(cols(), cols());
    for (int t = 0; t < copies; ++t) full.block(t * block.cols(), t * block.cols(), block.cols(), block.cols()) = g;
    return full;
  }
};

/// [Re D; Im D]: acting on a real vector, reproduces D p split into parts.
inline RMatrix lift_real(const CMatrix& d) {
  RMatrix out(2 * d.rows(), d.cols());
  out << d.real(), d.imag();
  return out;
}

/// Per-period real/imaginary split of a stacked complex vector, matching
/// BlockDiagonal(lift_real(D), T).
inline RVector split_real(const CVector& r, int periods = 1) {
  const Eigen::Index len = r.size() / periods;
  RVector out(2 * r.size());
  for (int t = 0; t < periods; ++t) {
    out.segment(2 * t * len, len) = r.segment(t * len, len).real();
    out.segment(2 * t * len + len, len) = r.segment(t * len, len).imag();
  }
  return out;
}

using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline SparseOp sparse_identity(Eigen::Index n) {
  SparseOp id(n, n);
  id.setIdentity();
  return id;
}

namespace detail {

inline RVector soft_threshold(const RVector& x, double kappa) {
  return x.unaryExpr([kappa](double v) { return v > kappa ? v - kappa : (v < -kappa ? v + kappa : 0.0); });
}

}  // namespace detail

inline SolveResult solve_constrained_l1(const BlockDiagonal& b_op, const SparseOp& w_op, const RVector& b,
                                        const SolverConfig& config) {
  config.validate();
  const Eigen::Index n = b_op.cols();
  if (w_op.cols() != n) throw std::invalid_argument("solve_constrained_l1: W and B column counts differ");
  if (b.size() != b_op.rows()) throw std::invalid_argument("solve_constrained_l1: measurement length mismatch");
  if (!b.allFinite()) throw std::invalid_argument("solve_constrained_l1: measurement is not finite");

  const double b_norm = b.norm();
  SolveResult result;
  result.mu = config.radius(b_norm);
  if (result.mu >= b_norm) {
    result.p_hat = RMatrix::Zero(n, 1);
    result.constraint_residual = b_norm;
    result.converged = true;
    return result;
  }

  // Work on a rescaled copy: unit measurement norm and unit largest column of B.
  double beta = b_op.block.colwise().norm().maxCoeff();
  if (!(beta > 0.0)) beta = 1.0;
  const BlockDiagonal bs(b_op.block / beta, b_op.copies);
  const RVector bt = b / b_norm;
  const double mu = result.mu / b_norm;
  const bool nonneg = config.nonneg_constraint;

  RMatrix k = bs.gram();
  k += RMatrix(w_op.transpose() * w_op);
  if (nonneg) k.diagonal().array() += 1.0;
  Eigen::LLT<RMatrix> llt(k);
  if (llt.info() != Eigen::Success) {
    k.diagonal().array() += 1e-10 * std::max(1.0, k.diagonal().maxCoeff());
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw std::runtime_error("solve_constrained_l1: normal matrix is singular");
  }
  const RMatrix k_inv = llt.solve(RMatrix::Identity(n, n));

  const double alpha = config.relaxation;
  double rho = config.penalty_rho;
  RVector p = RVector::Zero(n);
  RVector z = RVector::Zero(w_op.rows()), u = z, z_old = z;
  RVector w = RVector::Zero(bs.rows()), v = w, w_old = w;
  RVector x = RVector::Zero(nonneg ? n : 0), s = x, x_old = x;
  RVector wp, bp, rhs;

  const auto project_ball = [&](const RVector& y) -> RVector {
    RVector d = y - bt;
    const double dn = d.norm();
    if (dn > mu) d *= mu / dn;
    return bt + d;
  };

  constexpr int kCheckEvery = 10;
  constexpr int kAdaptEvery = 100;
  constexpr double kTiny = 1e-300;
  int it = 0;
  for (; it < config.max_iter; ++it) {
    rhs = w_op.transpose() * (z - u);
    rhs += bs.adjoint(w - v);
    if (nonneg) rhs += x - s;
    p.noalias() = k_inv * rhs;
    wp = w_op * p;
    bp = bs.apply(p);

    z_old = z;
    w_old = w;
    const RVector wh = alpha * wp + (1.0 - alpha) * z;
    const RVector bh = alpha * bp + (1.0 - alpha) * w;
    z = detail::soft_threshold(wh + u, 1.0 / rho);
    w = project_ball(bh + v);
    u += wh - z;
    v += bh - w;
    if (nonneg) {
      x_old = x;
      const RVector xh = alpha * p + (1.0 - alpha) * x;
      x = (xh + s).cwiseMax(0.0);
      s += xh - x;
    }

    if ((it + 1) % kCheckEvery != 0 && it + 1 != config.max_iter) continue;

    double r_pri2 = (wp - z).squaredNorm() + (bp - w).squaredNorm();
    double ax2 = wp.squaredNorm() + bp.squaredNorm();
    double zz2 = z.squaredNorm() + w.squaredNorm();
    RVector dual = w_op.transpose() * (z - z_old);
    dual += bs.adjoint(w - w_old);
    RVector aty = w_op.transpose() * u;
    aty += bs.adjoint(v);
    if (nonneg) {
      r_pri2 += (p - x).squaredNorm();
      ax2 += p.squaredNorm();
      zz2 += x.squaredNorm();
      dual += x - x_old;
      aty += s;
    }
    // Dual normalization is floored at 1: the L1 subgradient has entries
    // bounded by one, so the dual scale is at least of that order.
    result.primal_residual = std::sqrt(r_pri2) / std::max(std::sqrt(std::max(ax2, zz2)), kTiny);
    result.dual_residual = rho * dual.norm() / std::max(rho * aty.norm(), 1.0);
    const bool feasible = (bt - bp).norm() <= mu + config.constraint_slack_tol &&
                          (!nonneg || p.minCoeff() >= -config.primal_tol * std::max(p.cwiseAbs().maxCoeff(), 1.0));
    if (result.primal_residual <= config.primal_tol && result.dual_residual <= config.dual_tol && feasible) {
      result.converged = true;
      ++it;
      break;
    }
    // Penalty updates are spaced out further than the checks; rebalancing on
    // every check can keep rho oscillating without settling.
    if ((it + 1) % kAdaptEvery != 0) continue;
    const double ratio = result.primal_residual / std::max(result.dual_residual, kTiny);
    if (ratio > 5.0 || ratio < 0.2) {
      const double scale = std::clamp(std::sqrt(ratio), 0.1, 10.0);
      rho *= scale;
      u /= scale;
      v /= scale;
      s /= scale;
    }
  }
  result.iterations = it;

  if (nonneg) p = p.cwiseMax(0.0);
  const RVector p_out = p * (b_norm / beta);
  result.p_hat = p_out;
  result.objective = (w_op * p_out).lpNorm<1>();
  result.constraint_residual = (b - b_op.apply(p_out)).norm();
  return result;
}

/// Complex operator and measurement; p stays real.
inline SolveResult solve_constrained_l1(const CMatrix& b_op, const SparseOp& w_op, const CVector& b,
                                        const SolverConfig& config) {
  return solve_constrained_l1(BlockDiagonal(lift_real(b_op)), w_op, split_real(b), config);
}

/// minimize ||p||_1 s.t. ||r_y - D p||_2 <= mu.
inline SolveResult solve_lasso_cwss(const DictionaryBundle& bundle, const AutocorrVector& r_y,
                                    const SolverConfig& config) {
  if (r_y.values.size() != bundle.d.rows())
    throw std::invalid_argument("solve_lasso_cwss: r_y length does not match 2M");
  return solve_constrained_l1(BlockDiagonal(lift_real(bundle.d)), sparse_identity(bundle.d.cols()),
                              split_real(r_y.values), config);
}

/// Stacks per-period compressive autocorrelation vectors into vec(R).
inline CVector stack_measurements(const std::vector<AutocorrVector>& columns) {
  if (columns.empty()) throw std::invalid_argument("stack_measurements: no columns");
  const Eigen::Index len = columns.front().values.size();
  CVector out(len * static_cast<Eigen::Index>(columns.size()));
  for (std::size_t t = 0; t < columns.size(); ++t) {
    if (columns[t].values.size() != len) throw std::invalid_argument("stack_measurements: ragged columns");
    out.segment(static_cast<Eigen::Index>(t) * len, len) = columns[t].values;
  }
  return out;
}

/// minimize ||V vec(P)||_1 s.t. ||vec(R) - B vec(P)||_2 <= mu; P returned as 2N x T.
inline SolveResult solve_tvm_cwss(const DictionaryBundle& bundle, const TvOperator& v, const CVector& r_stack,
                                  const SolverConfig& config) {
  const int t = v.periods();
  if (v.n2() != bundle.d.cols()) throw std::invalid_argument("solve_tvm_cwss: V grid does not match 2N");
  if (r_stack.size() != bundle.d.rows() * t)
    throw std::invalid_argument("solve_tvm_cwss: stacked measurement length does not match 2TM");
  SolveResult res =
      solve_constrained_l1(BlockDiagonal(lift_real(bundle.d), t), v.matrix(), split_real(r_stack, t), config);
  res.p_hat = unvec(res.p_hat.col(0), bundle.d.cols());
  return res;
}

inline nlohmann::json to_json(const SolveResult& r) {
  std::vector<double> flat(r.p_hat.data(), r.p_hat.data() + r.p_hat.size());
  return {{"p_hat", flat},
          {"rows", r.p_hat.rows()},
          {"cols", r.p_hat.cols()},
          {"iterations", r.iterations},
          {"primal_residual", r.primal_residual},
          {"dual_residual", r.dual_residual},
          {"objective", r.objective},
          {"constraint_residual", r.constraint_residual},
          {"mu", r.mu},
          {"converged", r.converged}};
}

inline nlohmann::json to_json(const SolverConfig& c) {
  nlohmann::json j = {{"mu_factor", c.mu_factor},
                      {"max_iter", c.max_iter},
                      {"primal_tol", c.primal_tol},
                      {"dual_tol", c.dual_tol},
                      {"penalty_rho", c.penalty_rho},
                      {"nonneg_constraint", c.nonneg_constraint},
                      {"constraint_slack_tol", c.constraint_slack_tol},
                      {"relaxation", c.relaxation}};
  j["mu"] = c.mu ? nlohmann::json(*c.mu) : nlohmann::json(nullptr);
  return j;
}

inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
  static const char* const known[] = {"mu",       "mu_factor",         "max_iter",
                                      "primal_tol", "dual_tol",        "penalty_rho",
                                      "nonneg_constraint", "constraint_slack_tol", "relaxation"};
  if (!j.is_object()) throw std::invalid_argument("SolverConfig: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw std::invalid_argument("SolverConfig: unknown key '" + key + "'");
  SolverConfig c;
  if (j.contains("mu") && !j.at("mu").is_null()) c.mu = j.at("mu").get<double>();
  c.mu_factor = j.value("mu_factor", c.mu_factor);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.primal_tol = j.value("primal_tol", c.primal_tol);
  c.dual_tol = j.value("dual_tol", c.dual_tol);
  c.penalty_rho = j.value("penalty_rho", c.penalty_rho);
  c.nonneg_constraint = j.value("nonneg_constraint", c.nonneg_constraint);
  c.constraint_slack_tol = j.value("constraint_slack_tol", c.constraint_slack_tol);
  c.relaxation = j.value("relaxation", c.relaxation);
  c.validate();
  return c;
}

// Exhaustive sparsest-support search ----------------------------------------

struct L0Solution {
  RVector p;
  std::vector<int> support;
  double residual = 0.0;
};

/// Sparsest real p with ||b - D p||_2 <= tol over supports of size
/// 0..max_support, least squares on each support. Ties go to the smaller
/// residual, then the lexicographically first support. std::nullopt when no
/// support qualifies.
inline std::optional<L0Solution> l0_oracle(const CMatrix& d, const CVector& b, int max_support, double tol) {
  const int cols = static_cast<int>(d.cols());
  if (cols > 20) throw std::invalid_argument("l0_oracle: exhaustive search limited to 20 columns");
  if (b.size() != d.rows()) throw std::invalid_argument("l0_oracle: measurement length mismatch");
  const RMatrix dr = lift_real(d);
  const RVector br = split_real(b);

  if (br.norm() <= tol) return L0Solution{RVector::Zero(cols), {}, br.norm()};

  for (int k = 1; k <= std::min(max_support, cols); ++k) {
    std::optional<L0Solution> best;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      RMatrix sub(dr.rows(), k);
      for (int i = 0; i < k; ++i) sub.col(i) = dr.col(idx[static_cast<std::size_t>(i)]);
      const RVector coef = sub.colPivHouseholderQr().solve(br);
      const double res = (br - sub * coef).norm();
      if (res <= tol && (!best || res < best->residual)) {
        L0Solution cand{RVector::Zero(cols), idx, res};
        for (int i = 0; i < k; ++i) cand.p[idx[static_cast<std::size_t>(i)]] = coef[i];
        best = std::move(cand);
      }
      int pos = k - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == cols - k + pos) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (int i = pos + 1; i < k; ++i) idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i - 1)] + 1;
    }
    if (best) return best;
  }
  return std::nullopt;
}

// Measurement-count bounds --------------------------------------------------

struct BoundsReport {
  double n = 0, s = 0, k = 0, delta = 0, t = 0, c = 1;
  double m_lasso = 0;
  double m_tvm = 0;
  double ratio = 0;
};

/// m_lasso = T C S ln(n / S);
/// m_tvm   = C ((T - 1) delta ln(n / delta) + K ln(n / 2K)).
inline BoundsReport measurement_bounds(double n, double s, double k, double delta, double t, double c = 1.0) {
  if (!(n > 0) || !(s > 0) || !(k > 0) || !(delta > 0) || !(t >= 1) || !(c > 0))
    throw std::invalid_argument("measurement_bounds: inputs must be positive and T >= 1");
  if (s > n) throw std::invalid_argument("measurement_bounds: S must not exceed n");
  if (delta > s) throw std::invalid_argument("measurement_bounds: delta must not exceed S");
  if (2 * k > n) throw std::invalid_argument("measurement_bounds: 2K must not exceed n");
  BoundsReport r{n, s, k, delta, t, c};
  r.m_lasso = t * c * s * std::log(n / s);
  r.m_tvm = c * ((t - 1) * delta * std::log(n / delta) + k * std::log(n / (2 * k)));
  r.ratio = r.m_lasso > 0 ? r.m_tvm / r.m_lasso : std::numeric_limits<double>::quiet_NaN();
  return r;
}

inline nlohmann::json to_json(const BoundsReport& r) {
  return {{"n", r.n},         {"s", r.s},       {"k", r.k},         {"delta", r.delta}, {"t", r.t},
          {"c", r.c},         {"m_lasso", r.m_lasso}, {"m_tvm", r.m_tvm}, {"ratio", r.ratio}};
}

// Restricted-isometry probe -------------------------------------------------

/// Monte Carlo lower bound on the restricted isometry constant of order s:
/// the largest | ||A v||^2 - 1 | seen over random unit vectors with at most s
/// nonzeros. Each trial draws one column permutation and one coefficient
/// vector and evaluates every prefix of length 1..s, so for a fixed seed the
/// value is nondecreasing in s.
inline double rip_probe(const CMatrix& a, int s, int trials, std::uint64_t seed) {
  const int cols = static_cast<int>(a.cols());
  if (s < 1 || s > cols) throw std::invalid_argument("rip_probe: need 1 <= s <= cols");
  if (trials < 1) throw std::invalid_argument("rip_probe: trials must be >= 1");
  std::mt19937_64 rng(mix_seed(seed, 11));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<int> perm(static_cast<std::size_t>(cols));
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    for (int i = 0; i < cols; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i + 1 < cols; ++i) {
      std::uniform_int_distribution<int> pick(i, cols - 1);
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    // Draw coefficients for every column so the stream does not depend on s.
    CVector g(cols);
    for (int k = 0; k < cols; ++k) {
      const double re = gauss(rng);
      g[k] = cplx(re, gauss(rng));
    }
    CVector av = CVector::Zero(a.rows());
    double norm2 = 0.0;
    for (int k = 0; k < s; ++k) {
      av += g[k] * a.col(perm[static_cast<std::size_t>(k)]);
      norm2 += std::norm(g[k]);
      worst = std::max(worst, std::abs(av.squaredNorm() / norm2 - 1.0));
    }
  }
  return worst;
}

}  // namespace cwss
