#pragma once

// Recovery routines for block-sparse signals: regular and penalized l1
// minimization (LP or SOCP depending on the block norms), a thresholding
// matching-pursuit iteration driven by a contrast certificate, a group-Lasso
// baseline, and evaluators for the accompanying worst-case error bounds.
// All routines are pure given their arguments and safe to call concurrently.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "block_model.hpp"
#include "conditions.hpp"
#include "cone_program.hpp"
#include "ipm.hpp"
#include "synthesis.hpp"

namespace bsr {

// One observation y = A x + u + xi of a signal x under the fixed
// representation structure; the noise model is optional and only consulted
// by calibration helpers, not by the solvers themselves.
struct Observation {
  Eigen::VectorXd y;
  Eigen::MatrixXd A;
  RepresentationStructure rs;
  std::optional<NoiseModel> noise;

  void validate() const {
    if (A.rows() != y.size())
      throw std::invalid_argument("Observation: y length must match A rows");
    if (A.cols() != rs.n())
      throw std::invalid_argument("Observation: A column count must equal n");
    if (noise) noise->validate(static_cast<int>(A.rows()));
  }
};

// Worst-case recovery error bound at exponent p, together with the
// parameters it was evaluated from. kappa >= varkappa always holds; for the
// plain regular bound the two coincide.
struct ErrorBound {
  PExp p = PExp::one();
  double value = 0.0;
  double kappa = 0.0;
  double varkappa = 0.0;
  double rho = 0.0;
  int s = 1;
  double tail = 0.0;  // upper bound on the mass outside the top s blocks
};

// The regular bound uses the certificate's kappa alone; the refined variants
// combine the q = 1 level (varkappa) with the level at the certificate's own
// q, which tightens the constant whenever varkappa < kappa.
enum class BoundVariant { regular, regular_refined, penalized };

namespace detail {

inline double lp_root(double base, PExp p) {
  if (p.is_inf()) return 1.0;
  return std::pow(base, 1.0 / p.value());
}

// Interpolation exponent q(p-1)/(p(q-1)) for 1 <= p <= q, with its limits:
// 0 at p = 1 and (p-1)/p at q = inf.
inline double interpolation_exponent(PExp p, PExp q) {
  if (!p.is_inf() && p.value() == 1.0) return 0.0;
  if (q.is_inf()) return p.is_inf() ? 1.0 : (p.value() - 1.0) / p.value();
  return q.value() * (p.value() - 1.0) / (p.value() * (q.value() - 1.0));
}

}  // namespace detail

namespace detail {

// The level the bound at exponent p rests on: the certificate's own (kappa,
// q) when p <= q, otherwise the always-stored q = inf column scan. Keeps
// q = 1 certificates (the synthesis default) usable at every p.
inline std::pair<double, PExp> level_for(const Certificate& cert, PExp p) {
  if (p <= cert.q) return {cert.kappa, cert.q};
  if (!std::isfinite(cert.kappa_inf))
    throw std::invalid_argument(
        "error_bound: no stored level covers the requested p");
  return {cert.kappa_inf, PExp::inf()};
}

}  // namespace detail

// Evaluates the worst-case L_p error bound certified by `cert` for a
// recovery run at radius rho, assuming the signal's mass outside its top s
// blocks is at most `tail`. When p exceeds the certificate's q the stored
// q = inf level stands in. The refined and penalized variants additionally
// use the stored q = 1 level; the penalized variant needs the penalty
// weight lambda >= 2s.
inline ErrorBound error_bound(const Certificate& cert, PExp p, double rho,
                              double tail, BoundVariant variant,
                              std::optional<double> lambda = std::nullopt) {
  if (rho < 0.0) throw std::invalid_argument("error_bound: rho must be >= 0");
  if (tail < 0.0)
    throw std::invalid_argument("error_bound: tail must be >= 0");
  const int s = cert.s;
  const auto [kappa, q] = detail::level_for(cert, p);
  ErrorBound out;
  out.p = p;
  out.rho = rho;
  out.s = s;
  out.tail = tail;
  const double base = rho + tail / (2.0 * s);

  if (variant == BoundVariant::regular) {
    if (!(kappa < 0.5))
      throw std::invalid_argument(
          "error_bound: condition violated, no bound (kappa >= 1/2)");
    out.kappa = kappa;
    out.varkappa = kappa;
    out.value =
        4.0 * detail::lp_root(2.0 * s, p) / (1.0 - 2.0 * kappa) * base;
    return out;
  }

  const double varkappa = cert.kappa1;
  if (!std::isfinite(varkappa))
    throw std::invalid_argument(
        "error_bound: certificate carries no q = 1 level");
  if (!(varkappa < 0.5))
    throw std::invalid_argument(
        "error_bound: condition violated, no bound (varkappa >= 1/2)");
  if (kappa < varkappa)
    throw std::invalid_argument("error_bound: kappa must be >= varkappa");
  out.kappa = kappa;
  out.varkappa = varkappa;
  const double expo = detail::interpolation_exponent(p, q);

  if (variant == BoundVariant::regular_refined) {
    out.value = 4.0 * detail::lp_root(2.0 * s, p) *
                std::pow(1.0 + kappa - varkappa, expo) /
                (1.0 - 2.0 * varkappa) * base;
    return out;
  }

  if (!lambda)
    throw std::invalid_argument(
        "error_bound: penalized variant needs lambda");
  if (*lambda < 2.0 * s)
    throw std::invalid_argument("error_bound: lambda must be at least 2s");
  out.value = 4.0 * detail::lp_root(*lambda, p) / (1.0 - 2.0 * varkappa) *
              std::pow(1.0 + kappa * *lambda / (2.0 * s) - varkappa, expo) *
              base;
  return out;
}

// One logged step of an iterative recovery routine. alpha is the certified
// L1 error radius; the err_ fields are filled only when the true signal was
// supplied, NaN otherwise.
struct IterationRecord {
  int k = 0;
  double alpha = 0.0;
  double err_l1 = std::numeric_limits<double>::quiet_NaN();
  double err_l2 = std::numeric_limits<double>::quiet_NaN();
  double err_linf = std::numeric_limits<double>::quiet_NaN();
};

struct RecoveryResult {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd w_hat;  // B x_hat
  std::string routine;
  optim::SolveReport solve;
  std::vector<IterationRecord> iterations;  // matching pursuit only
  std::optional<ErrorBound> bound;
  bool premise_warning = false;
};

namespace detail {

inline std::vector<optim::LinExpr> representation_entries(
    const RepresentationStructure& rs, int k, int zbase) {
  std::vector<optim::LinExpr> entries;
  entries.reserve(rs.block_dims[k]);
  for (int i = 0; i < rs.block_dims[k]; ++i) {
    const int row = rs.offsets[k] + i;
    if (rs.b_is_identity)
      entries.push_back(optim::LinExpr::variable(zbase + row));
    else
      entries.push_back(optim::dot(rs.B.row(row), zbase));
  }
  return entries;
}

inline std::vector<optim::LinExpr> residual_entries(
    const RepresentationStructure& rs, int k, const Eigen::MatrixXd& HtA,
    const Eigen::VectorXd& Hty, int zbase) {
  std::vector<optim::LinExpr> entries;
  entries.reserve(rs.block_dims[k]);
  for (int i = 0; i < rs.block_dims[k]; ++i) {
    const int row = rs.offsets[k] + i;
    entries.push_back(optim::dot(-HtA.row(row), zbase, Hty[row]));
  }
  return entries;
}

inline void check_contrast(const Observation& obs, const Eigen::MatrixXd& H) {
  if (H.rows() != obs.A.rows())
    throw std::invalid_argument("recovery: H row count must equal m");
  if (H.cols() != obs.rs.N())
    throw std::invalid_argument("recovery: H column count must equal N");
}

// Adds the zero-radius fit system M z = t as orthonormalized full-row-rank
// equality rows; M is typically rank deficient (N rows built from an m < N
// contrast), which would leave the interior-point KKT system singular up to
// regularization. Returns false when the system is inconsistent, i.e. the
// program is infeasible.
inline bool add_zero_radius_fit(optim::ConeProgram& cp,
                                const Eigen::MatrixXd& M,
                                const Eigen::VectorXd& t, int zbase) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > kRankTol * std::max(1.0, smax)) ++rank;
  const Eigen::VectorXd proj =
      svd.matrixU().leftCols(rank).transpose() * t;
  const double outside =
      (t - svd.matrixU().leftCols(rank) * proj).norm();
  if (outside > 1e-8 * (1.0 + t.norm())) return false;
  const Eigen::MatrixXd rows = svd.matrixV().leftCols(rank).transpose();
  for (int i = 0; i < rank; ++i)
    cp.add_eq(optim::dot(rows.row(i), zbase), proj[i] / sv(i), "fit");
  return true;
}

}  // namespace detail

// Regular l1 recovery: minimizes the total block mass of Bz subject to the
// fitted residual staying within rho in the blockwise sup norm,
// max_k ||(H'(y - Az))[k]||_(k) <= rho. Infeasibility (possible for
// rank-deficient contrasts) is reported through the solve status, with an
// empty x_hat.
inline RecoveryResult recover_regular(const Observation& obs,
                                      const Eigen::MatrixXd& H, double rho,
                                      const optim::SolveOptions& sopt = {}) {
  obs.validate();
  detail::check_contrast(obs, H);
  if (rho < 0.0)
    throw std::invalid_argument("recover_regular: rho must be >= 0");
  const auto& rs = obs.rs;
  const int n = rs.n();

  optim::ConeProgram cp;
  const int zbase = cp.add_vars(n);
  optim::LinExpr objective;
  for (int k = 0; k < rs.K(); ++k)
    objective.add(cp.block_norm_epigraph(
                      detail::representation_entries(rs, k, zbase),
                      rs.block_norms[k], "mass"),
                  1.0);
  const Eigen::MatrixXd HtA = H.transpose() * obs.A;
  const Eigen::VectorXd Hty = H.transpose() * obs.y;
  RecoveryResult out;
  out.routine = "regular_l1";
  if (rho == 0.0) {
    // A zero radius pins the residual to an affine subspace; a reduced
    // equality system keeps the interior-point iterates away from the
    // degenerate two-sided inequalities this would otherwise create.
    if (!detail::add_zero_radius_fit(cp, HtA, Hty, zbase)) {
      out.solve.status = optim::SolveStatus::infeasible;
      out.solve.message = "fit constraints are inconsistent at rho = 0";
      return out;
    }
  } else {
    for (int k = 0; k < rs.K(); ++k)
      cp.bound_block_norm(detail::residual_entries(rs, k, HtA, Hty, zbase),
                          rs.block_norms[k], optim::LinExpr(rho), "fit");
  }
  cp.minimize(objective);

  out.solve = optim::solve(cp, sopt);
  if (out.solve.status == optim::SolveStatus::infeasible) return out;
  if (out.solve.status != optim::SolveStatus::optimal)
    throw std::runtime_error(
        std::string("recover_regular: solver failure (") +
        optim::to_string(out.solve.status) + ": " + out.solve.message + ")");
  out.x_hat = out.solve.primal.head(n);
  out.w_hat = rs.b_is_identity ? out.x_hat
                               : Eigen::VectorXd(rs.B * out.x_hat);
  return out;
}

// Penalized l1 recovery: minimizes L1(Bz) + lambda * max_k
// ||(H'(y - Az))[k]||_(k). Always feasible; lambda must be positive, with
// lambda = 2s matching the regular recovery's guarantees.
inline RecoveryResult recover_penalized(const Observation& obs,
                                        const Eigen::MatrixXd& H,
                                        double lambda,
                                        const optim::SolveOptions& sopt = {}) {
  obs.validate();
  detail::check_contrast(obs, H);
  if (!(lambda > 0.0))
    throw std::invalid_argument("recover_penalized: lambda must be > 0");
  const auto& rs = obs.rs;
  const int n = rs.n();

  optim::ConeProgram cp;
  const int zbase = cp.add_vars(n);
  const int tau = cp.add_var();
  optim::LinExpr objective = optim::LinExpr::variable(tau, lambda);
  for (int k = 0; k < rs.K(); ++k)
    objective.add(cp.block_norm_epigraph(
                      detail::representation_entries(rs, k, zbase),
                      rs.block_norms[k], "mass"),
                  1.0);
  const Eigen::MatrixXd HtA = H.transpose() * obs.A;
  const Eigen::VectorXd Hty = H.transpose() * obs.y;
  for (int k = 0; k < rs.K(); ++k)
    cp.bound_block_norm(detail::residual_entries(rs, k, HtA, Hty, zbase),
                        rs.block_norms[k], optim::LinExpr::variable(tau),
                        "fit");
  cp.minimize(objective);

  RecoveryResult out;
  out.routine = "penalized_l1";
  out.solve = optim::solve(cp, sopt);
  if (out.solve.status != optim::SolveStatus::optimal)
    throw std::runtime_error(
        std::string("recover_penalized: solver failure (") +
        optim::to_string(out.solve.status) + ": " + out.solve.message + ")");
  out.x_hat = out.solve.primal.head(n);
  out.w_hat = rs.b_is_identity ? out.x_hat
                               : Eigen::VectorXd(rs.B * out.x_hat);
  return out;
}

// Thresholding matching pursuit driven by a contrast whose block norm
// matrix is entrywise at most gamma_bar. Each sweep shrinks the fitted
// correlations by the certified radius and tightens that radius by the
// contraction alpha <- 2 s gamma_bar alpha + 2 s rho + upsilon; the iterates
// carry a certified L1 error of alpha_k throughout. Requires l2 or linf
// block norms and s * gamma_bar < 1; without the stronger premise
// 2 s gamma_bar < 1 the radius no longer contracts and the result is
// flagged. upsilon is the caller's upper bound on the signal's mass outside
// its top s blocks.
inline RecoveryResult nebmp(
    const Observation& obs, const Eigen::MatrixXd& H, double gamma_bar,
    double rho, int s, double upsilon, int iters,
    const std::optional<Eigen::VectorXd>& x_true = std::nullopt) {
  obs.validate();
  detail::check_contrast(obs, H);
  const auto& rs = obs.rs;
  for (BlockNorm r : rs.block_norms)
    if (r == BlockNorm::l1)
      throw std::invalid_argument(
          "nebmp: block norms must be l2 or linf");
  if (!rs.b_full_row_rank(kRankTol))
    throw std::invalid_argument("nebmp: B must have full row rank");
  if (s < 1 || s > rs.K())
    throw std::invalid_argument("nebmp: s out of range");
  if (gamma_bar <= 0.0)
    throw std::invalid_argument("nebmp: gamma_bar must be positive");
  if (rho < 0.0 || upsilon < 0.0)
    throw std::invalid_argument("nebmp: rho and upsilon must be >= 0");
  if (iters < 0) throw std::invalid_argument("nebmp: iters must be >= 0");
  if (s * gamma_bar >= 1.0)
    throw std::invalid_argument(
        "nebmp: s * gamma_bar must be < 1 for the radius to be defined");

  RecoveryResult out;
  out.routine = "nebmp";
  out.premise_warning = 2.0 * s * gamma_bar >= 1.0;

  const int n = rs.n();
  const int N = rs.N();
  Eigen::MatrixXd Bplus;
  if (!rs.b_is_identity) Bplus = right_pseudo_inverse(rs.B);
  std::optional<Eigen::VectorXd> w_true;
  if (x_true) {
    if (x_true->size() != n)
      throw std::invalid_argument("nebmp: x_true length must equal n");
    w_true = rs.b_is_identity ? *x_true : Eigen::VectorXd(rs.B * *x_true);
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(N);
  double alpha = (Lsp(rs, H.transpose() * obs.y, s, PExp::one()) +
                  s * rho + upsilon) /
                 (1.0 - s * gamma_bar);

  const auto log_step = [&](int k) {
    IterationRecord rec;
    rec.k = k;
    rec.alpha = alpha;
    if (w_true) {
      const Eigen::VectorXd d = w - *w_true;
      rec.err_l1 = Lp(rs, d, PExp::one());
      rec.err_l2 = Lp(rs, d, PExp::two());
      rec.err_linf = Lp(rs, d, PExp::inf());
    }
    out.iterations.push_back(rec);
  };
  log_step(0);

  Eigen::VectorXd delta(N);
  for (int k = 1; k <= iters; ++k) {
    const Eigen::VectorXd g = H.transpose() * (obs.y - obs.A * v);
    const double threshold = gamma_bar * alpha + rho;
    delta.setZero();
    for (int j = 0; j < rs.K(); ++j) {
      const auto gj = g.segment(rs.offsets[j], rs.block_dims[j]);
      if (rs.block_norms[j] == BlockNorm::l2) {
        const double nrm = gj.norm();
        if (nrm > threshold)
          delta.segment(rs.offsets[j], rs.block_dims[j]) =
              gj * ((nrm - threshold) / nrm);
      } else {
        for (int i = 0; i < rs.block_dims[j]; ++i) {
          const double gi = gj[i];
          const double mag = std::abs(gi) - threshold;
          if (mag > 0.0)
            delta[rs.offsets[j] + i] = (gi >= 0.0 ? mag : -mag);
        }
      }
    }
    v += rs.b_is_identity ? delta : Eigen::VectorXd(Bplus * delta);
    w = rs.b_is_identity ? v : Eigen::VectorXd(rs.B * v);
    alpha = 2.0 * s * gamma_bar * alpha + 2.0 * s * rho + upsilon;
    log_step(k);
  }

  out.x_hat = v;
  out.w_hat = w;
  out.solve.status = optim::SolveStatus::optimal;
  out.solve.iterations = iters;
  out.solve.primal_objective = alpha;
  out.solve.message = "thresholding matching pursuit";
  return out;
}

// Suggested group-Lasso weights lambda_k = c (sigma/m)(sqrt(n_k) +
// 2 sqrt(ln K)). A documented stand-in for the reference tuning this
// baseline is usually run with; c rescales all weights uniformly.
inline Eigen::VectorXd group_lasso_lambdas(const RepresentationStructure& rs,
                                           double sigma, int m,
                                           double c = 1.0) {
  if (sigma < 0.0 || m <= 0 || c <= 0.0)
    throw std::invalid_argument("group_lasso_lambdas: bad parameters");
  Eigen::VectorXd lambdas(rs.K());
  const double common = 2.0 * std::sqrt(std::log(double(rs.K())));
  for (int k = 0; k < rs.K(); ++k)
    lambdas[k] =
        c * sigma / double(m) * (std::sqrt(double(rs.block_dims[k])) + common);
  return lambdas;
}

// Group-Lasso baseline: minimizes (1/m)||Az - y||_2^2 + 2 sum_k
// lambda_k ||z[k]||_2 by proximal gradient steps (blockwise
// soft-thresholding) until the gradient map norm falls below 1e-7. B must
// be the identity and all blocks l2.
inline RecoveryResult group_lasso(const Observation& obs,
                                  const Eigen::VectorXd& lambdas) {
  obs.validate();
  const auto& rs = obs.rs;
  if (!rs.b_is_identity)
    throw std::invalid_argument("group_lasso: B must be the identity");
  if (!rs.has_uniform_norm() || rs.uniform_norm() != BlockNorm::l2)
    throw std::invalid_argument("group_lasso: blocks must carry the l2 norm");
  if (lambdas.size() != rs.K())
    throw std::invalid_argument("group_lasso: one lambda per block required");
  if ((lambdas.array() < 0.0).any())
    throw std::invalid_argument("group_lasso: lambdas must be >= 0");

  const int n = rs.n();
  const double m = double(obs.A.rows());
  const double smax =
      Eigen::JacobiSVD<Eigen::MatrixXd>(obs.A).singularValues()(0);
  const double L = 2.0 / m * smax * smax;
  const double eta = L > 0.0 ? 1.0 / L : 1.0;

  const auto objective = [&](const Eigen::VectorXd& z) {
    double val = (obs.A * z - obs.y).squaredNorm() / m;
    for (int k = 0; k < rs.K(); ++k)
      val += 2.0 * lambdas[k] *
             z.segment(rs.offsets[k], rs.block_dims[k]).norm();
    return val;
  };

  constexpr int kMaxIter = 100000;
  constexpr double kStationarity = 1e-7;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  RecoveryResult out;
  out.routine = "group_lasso";
  out.solve.status = optim::SolveStatus::max_iter;
  out.solve.message = "proximal gradient";
  out.solve.best_objective_trace.push_back(objective(z));
  for (int it = 1; it <= kMaxIter; ++it) {
    const Eigen::VectorXd grad =
        2.0 / m * (obs.A.transpose() * (obs.A * z - obs.y));
    const Eigen::VectorXd u = z - eta * grad;
    Eigen::VectorXd z_next(n);
    for (int k = 0; k < rs.K(); ++k) {
      const auto uk = u.segment(rs.offsets[k], rs.block_dims[k]);
      const double nrm = uk.norm();
      const double cut = 2.0 * eta * lambdas[k];
      if (nrm > cut)
        z_next.segment(rs.offsets[k], rs.block_dims[k]) =
            uk * ((nrm - cut) / nrm);
      else
        z_next.segment(rs.offsets[k], rs.block_dims[k]).setZero();
    }
    const double map_norm = (z - z_next).norm() / eta;
    z = z_next;
    out.solve.iterations = it;
    out.solve.best_objective_trace.push_back(objective(z));
    if (map_norm <= kStationarity) {
      out.solve.status = optim::SolveStatus::optimal;
      break;
    }
  }
  out.solve.primal = z;
  out.solve.primal_objective = out.solve.best_objective_trace.back();
  out.x_hat = z;
  out.w_hat = z;
  return out;
}

}  // namespace bsr
