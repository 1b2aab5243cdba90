#pragma once

// Contrast-matrix construction: closed-form incoherence contrasts, LP and
// subgradient minimization of the certifiable kappa, joint contrast and
// noise-radius synthesis, noise-radius evaluation, and nullspace-based upper
// bounds on the certifiable sparsity. All functions are pure given their
// arguments, so independent calls are safe to run concurrently; the sparsity
// scan visits levels in a fixed order, so its output is deterministic.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "block_model.hpp"
#include "conditions.hpp"
#include "cone_program.hpp"
#include "gauss.hpp"
#include "ipm.hpp"
#include "rng.hpp"
#include "subgradient.hpp"

namespace bsr {

// Additive observation error: a bounded term from the ellipsoid
// U = {Ev : ||v||_2 <= 1} plus a Gaussian term D eta with eta standard
// normal; epsilon is the acceptable failure probability of the noise bound.
struct NoiseModel {
  Eigen::MatrixXd E;
  Eigen::MatrixXd D;
  double epsilon = 0.05;

  static NoiseModel none(int m) {
    NoiseModel nm;
    nm.E = Eigen::MatrixXd::Zero(m, m);
    nm.D = Eigen::MatrixXd::Zero(m, m);
    nm.epsilon = 0.5;
    return nm;
  }
  static NoiseModel gaussian(int m, double sigma, double epsilon) {
    NoiseModel nm;
    nm.E = Eigen::MatrixXd::Zero(m, m);
    nm.D = sigma * Eigen::MatrixXd::Identity(m, m);
    nm.epsilon = epsilon;
    return nm;
  }

  void validate(int m) const {
    if (E.rows() != m || E.cols() != m || D.rows() != m || D.cols() != m)
      throw std::invalid_argument("NoiseModel: E and D must be m x m");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("NoiseModel: epsilon must lie in (0, 1)");
  }
};

// Safe per-column noise radius: the largest over columns h of
// ||E'h||_2 + z(eps/2N) ||D'h||_2, where z is the upper-tail standard
// normal quantile. The eps/(2N) split is a two-sided union bound over the
// N columns.
inline double rho_epsilon(const Eigen::MatrixXd& H, const NoiseModel& noise) {
  noise.validate(static_cast<int>(H.rows()));
  const int N = static_cast<int>(H.cols());
  if (N == 0) return 0.0;
  const double z = upper_quantile(noise.epsilon / (2.0 * N));
  double rho = 0.0;
  for (int i = 0; i < N; ++i) {
    const double bounded = (noise.E.transpose() * H.col(i)).norm();
    const double gaussian = (noise.D.transpose() * H.col(i)).norm();
    rho = std::max(rho, bounded + z * gaussian);
  }
  return rho;
}

enum class IncoherenceMode { MI, MBI };

// Closed-form contrast from mutual (block-)incoherence:
// H = (1+mu)^{-1} [A[1] C_1^{-1}, ..., A[K] C_K^{-1}]. MI applies the same
// formula on the all-singleton partition. The certificate is built at the
// largest sparsity level s with mu s / (1 + mu) < 1/2 (clamped to [1, K]);
// when even s = 1 certifies nothing the kappa_warning flag is set.
inline Certificate contrast_incoherence(const Eigen::MatrixXd& A,
                                        const RepresentationStructure& rs,
                                        IncoherenceMode mode) {
  RepresentationStructure part;
  if (mode == IncoherenceMode::MI) {
    part = RepresentationStructure::identity(
        std::vector<int>(A.cols(), 1), BlockNorm::l2);
  } else {
    if (!rs.b_is_identity)
      throw std::invalid_argument(
          "contrast_incoherence: representation matrix must be the identity");
    part = rs;
  }
  const auto rep = mutual_block_incoherence(A, part);
  if (rep.mu_infinite)
    throw std::invalid_argument(
        "contrast_incoherence: incoherence is infinite, no contrast exists");
  const int K = part.K();
  int s_max;
  if (rep.mu == 0.0) {
    s_max = K;
  } else {
    s_max = static_cast<int>((1.0 + rep.mu) / (2.0 * rep.mu));
    while (s_max >= 1 && 2.0 * rep.mu * s_max >= 1.0 + rep.mu) --s_max;
    s_max = std::min(s_max, K);
  }
  const Eigen::MatrixXd H = incoherence_contrast(A, part, rep);
  auto cert = certificate_from_contrast(
      A, H, part, std::max(s_max, 1), PExp::inf(),
      mode == IncoherenceMode::MI ? "incoherence contrast (singleton)"
                                  : "incoherence contrast (block)");
  return cert;
}

struct SynthesisOptions {
  optim::SolveOptions solver;
  int subgradient_iterations = 1200;
};

namespace detail {

// The synthesis problems over a general representation matrix reduce to the
// identity case: V = I - H' (A B+), with the extra affine requirement
// Qz' H = 0 (Qz an orthonormal basis of the range of A (I - B+ B)) so the
// residual identity is exactly solvable.
struct SynthesisGeometry {
  Eigen::MatrixXd Atil;  // m x N
  Eigen::MatrixXd Qz;    // m x rank, empty when no constraint is needed
};

inline SynthesisGeometry synthesis_geometry(const Eigen::MatrixXd& A,
                                            const RepresentationStructure& rs) {
  if (A.cols() != rs.n())
    throw std::invalid_argument("synthesis: A column count must equal n");
  if (!rs.b_full_row_rank(kRankTol))
    throw std::invalid_argument("synthesis: B must have full row rank");
  SynthesisGeometry g;
  if (rs.b_is_identity) {
    g.Atil = A;
    return g;
  }
  const Eigen::MatrixXd Bplus = right_pseudo_inverse(rs.B);
  g.Atil = A * Bplus;
  const Eigen::MatrixXd Z =
      A - A * (Bplus * rs.B);  // columns outside the row space of B
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
  qr.setThreshold(kRankTol);
  const int rank = static_cast<int>(qr.rank());
  if (rank > 0)
    g.Qz = qr.householderQ() * Eigen::MatrixXd::Identity(Z.rows(), rank);
  return g;
}

inline Eigen::MatrixXd project_constraints(const SynthesisGeometry& g,
                                           const Eigen::MatrixXd& H) {
  if (g.Qz.size() == 0) return H;
  return H - g.Qz * (g.Qz.transpose() * H);
}

// w entry expression: the i-th row of I - H'Atil as an affine function of
// the column-stacked H variables starting at hbase.
inline optim::LinExpr v_entry(const Eigen::MatrixXd& Atil, int hbase, int i,
                              int j) {
  const int m = static_cast<int>(Atil.rows());
  optim::LinExpr e(i == j ? 1.0 : 0.0);
  for (int t = 0; t < m; ++t) e.add(hbase + i * m + t, -Atil(t, j));
  return e;
}

inline void add_h_constraints(optim::ConeProgram& cp,
                              const SynthesisGeometry& g, int hbase, int N) {
  if (g.Qz.size() == 0) return;
  const int m = static_cast<int>(g.Atil.rows());
  for (int i = 0; i < N; ++i)
    for (int r = 0; r < g.Qz.cols(); ++r) {
      optim::LinExpr e;
      for (int t = 0; t < m; ++t) e.add(hbase + i * m + t, g.Qz(t, r));
      cp.add_eq(e, 0.0, "range");
    }
}

inline Eigen::MatrixXd extract_h(const Eigen::VectorXd& primal, int hbase,
                                 int m, int N) {
  Eigen::MatrixXd H(m, N);
  for (int i = 0; i < N; ++i) H.col(i) = primal.segment(hbase + i * m, m);
  return H;
}

}  // namespace detail

// Minimizes the certified kappa at sparsity s over all contrasts H: the
// objective is the largest column sum-of-top-s of the block norm matrix of
// I - H'Atil. Piecewise linear for block norms 1 and inf, solved as one LP;
// for l2 blocks a projected subgradient method warm-started at the
// incoherence contrast is used and the result is certified post hoc.
inline Certificate synthesize_kappa(const Eigen::MatrixXd& A,
                                    const RepresentationStructure& rs, int s,
                                    BlockNorm r,
                                    const SynthesisOptions& opt = {}) {
  if (s < 1 || s > rs.K())
    throw std::invalid_argument("synthesize_kappa: s out of range");
  RepresentationStructure rsr = rs;
  rsr.block_norms.assign(rs.K(), r);
  const auto geom = detail::synthesis_geometry(A, rs);
  const int m = static_cast<int>(A.rows());
  const int N = rs.N();
  const int K = rs.K();

  if (r == BlockNorm::l2) {
    // Subgradient path. Warm start: incoherence contrast when defined, the
    // row-space projector otherwise.
    Eigen::MatrixXd H0;
    const auto rs_id =
        RepresentationStructure::identity(rs.block_dims, BlockNorm::l2);
    const auto rep = mutual_block_incoherence(geom.Atil, rs_id);
    if (!rep.mu_infinite) {
      H0 = incoherence_contrast(geom.Atil, rs_id, rep);
    } else {
      H0 = (geom.Atil * geom.Atil.transpose())
               .completeOrthogonalDecomposition()
               .pseudoInverse() *
           geom.Atil;
    }
    H0 = detail::project_constraints(geom, H0);

    const auto unflatten = [&](const Eigen::VectorXd& x) {
      return Eigen::MatrixXd(
          Eigen::Map<const Eigen::MatrixXd>(x.data(), m, N));
    };
    auto oracle = [&](const Eigen::VectorXd& x, Eigen::VectorXd& gout) {
      const Eigen::MatrixXd H = detail::project_constraints(geom, unflatten(x));
      const Eigen::MatrixXd V =
          Eigen::MatrixXd::Identity(N, N) - H.transpose() * geom.Atil;
      Eigen::MatrixXd om(K, K);
      for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
          const auto blk = V.block(rsr.offsets[k], rsr.offsets[l],
                                   rsr.block_dims[k], rsr.block_dims[l]);
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
              blk.transpose() * blk);
          om(k, l) = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
        }
      int l_star = 0;
      double f = -1.0;
      for (int l = 0; l < K; ++l) {
        const double v = snorm(om.col(l), s, PExp::one());
        if (v > f) {
          f = v;
          l_star = l;
        }
      }
      const auto top = top_s_indices(om.col(l_star), s);
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, N);
      for (int k : top) {
        const auto blk = V.block(rsr.offsets[k], rsr.offsets[l_star],
                                 rsr.block_dims[k], rsr.block_dims[l_star]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            blk, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd u = svd.matrixU().col(0);
        const Eigen::VectorXd v = svd.matrixV().col(0);
        const Eigen::VectorXd av =
            geom.Atil.middleCols(rsr.offsets[l_star],
                                 rsr.block_dims[l_star]) *
          v;
        for (int ii = 0; ii < rsr.block_dims[k]; ++ii)
          G.col(rsr.offsets[k] + ii) -= u(ii) * av;
      }
      const Eigen::MatrixXd Gp = detail::project_constraints(geom, G);
      gout = Eigen::Map<const Eigen::VectorXd>(Gp.data(), m * N);
      return f;
    };
    const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(
        H0.data(), static_cast<Eigen::Index>(m) * N);
    const auto res = optim::subgradient_minimize(oracle, x0, {},
                                                 opt.subgradient_iterations);
    const Eigen::MatrixXd Hbest =
        detail::project_constraints(geom, unflatten(res.x_best));
    auto cert = certificate_from_contrast(
        A, Hbest, rsr, s, PExp::one(), "kappa synthesis (subgradient)");
    const auto check = verify_certificate(cert, A, rsr);
    if (!check.valid)
      throw std::runtime_error(
          "synthesize_kappa: subgradient result failed certification");
    return cert;
  }

  // LP path for block norms 1 and inf.
  optim::ConeProgram cp;
  const int hbase = cp.add_vars(m * N);
  std::vector<int> tv(static_cast<size_t>(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      tv[static_cast<size_t>(i) * N + j] =
          cp.abs_epigraph(detail::v_entry(geom.Atil, hbase, i, j), "absV");
  const int theta = cp.add_vars(K);
  const int ubase = cp.add_vars(K * K);
  const int tau = cp.add_var();

  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l) {
      const int u_kl = ubase + k * K + l;
      cp.add_ge(optim::LinExpr::variable(u_kl), 0.0, "u+");
      if (r == BlockNorm::linf) {
        // Block norm = max row sum: one row per representation row in k.
        for (int i = 0; i < rs.block_dims[k]; ++i) {
          optim::LinExpr e;
          for (int j = 0; j < rs.block_dims[l]; ++j)
            e.add(tv[static_cast<size_t>(rs.offsets[k] + i) * N +
                     rs.offsets[l] + j],
                  1.0);
          e.add(u_kl, -1.0).add(theta + l, -1.0);
          cp.add_le(e, 0.0, "rowsum");
        }
      } else {
        // Block norm = max column sum.
        for (int j = 0; j < rs.block_dims[l]; ++j) {
          optim::LinExpr e;
          for (int i = 0; i < rs.block_dims[k]; ++i)
            e.add(tv[static_cast<size_t>(rs.offsets[k] + i) * N +
                     rs.offsets[l] + j],
                  1.0);
          e.add(u_kl, -1.0).add(theta + l, -1.0);
          cp.add_le(e, 0.0, "colsum");
        }
      }
    }
  // Sum of the s largest block norms in column l, in epigraph form.
  for (int l = 0; l < K; ++l) {
    optim::LinExpr e = optim::LinExpr::variable(theta + l, double(s));
    for (int k = 0; k < K; ++k) e.add(ubase + k * K + l, 1.0);
    e.add(tau, -1.0);
    cp.add_le(e, 0.0, "topsum");
  }
  detail::add_h_constraints(cp, geom, hbase, N);
  cp.minimize(optim::LinExpr::variable(tau));

  const auto report = optim::solve(cp, opt.solver);
  if (report.status != optim::SolveStatus::optimal)
    throw std::runtime_error(std::string("synthesize_kappa: solver failure (") +
                             optim::to_string(report.status) + ")");
  const Eigen::MatrixXd H = detail::extract_h(report.primal, hbase, m, N);
  return certificate_from_contrast(A, H, rsr, s, PExp::one(),
                                   r == BlockNorm::linf
                                       ? "kappa synthesis (LP, linf blocks)"
                                       : "kappa synthesis (LP, l1 blocks)");
}

struct ScanResult {
  int s_star = 0;  // largest s with certified kappa1 < 1/2; 0 when none
  std::vector<Certificate> certificates;  // one per tried s, ascending
};

// Scans s = 1, 2, ... and stops at the first level whose optimal kappa1
// reaches 1/2; the optimal value is nondecreasing in s, so nothing beyond
// the first failure can certify. A level counts as certified only when its
// kappa1 clears 1/2 by more than the solver accuracy. Levels are visited in
// ascending order, so repeated runs produce identical results.
inline ScanResult max_certifiable_s(const Eigen::MatrixXd& A,
                                    const RepresentationStructure& rs,
                                    BlockNorm r,
                                    const SynthesisOptions& opt = {}) {
  ScanResult out;
  for (int s = 1; s <= rs.K(); ++s) {
    auto cert = synthesize_kappa(A, rs, s, r, opt);
    const double kappa1 = cert.kappa1;
    out.certificates.push_back(std::move(cert));
    if (kappa1 >= 0.5 - 1e-7) break;
    out.s_star = s;
  }
  // Sanity ceiling for underdetermined problems with equal blocks: no
  // certificate can exist beyond 3 sqrt(m) / (2 sqrt(d)).
  const bool equal = std::all_of(
      rs.block_dims.begin(), rs.block_dims.end(),
      [&](int dk) { return dk == rs.block_dims.front(); });
  if (rs.b_is_identity && equal && 2 * A.rows() <= A.cols()) {
    const double ceiling = 1.5 * std::sqrt(double(A.rows())) /
                           std::sqrt(double(rs.block_dims.front()));
    if (double(out.s_star) > ceiling + 1e-9)
      throw std::logic_error(
          "max_certifiable_s: certified level exceeds the proven ceiling");
  }
  return out;
}

struct RhoSynthesis {
  bool feasible = false;
  Certificate certificate;
  std::string message;
};

// Joint synthesis for l_inf blocks at q = inf: minimizes the noise radius
// rho over contrasts H whose residual block norms all stay within kappa/s,
// subject to the per-column noise constraints
// ||E'h_i||_2 + z(eps/2N) ||D'h_i||_2 <= rho. One SOCP; infeasibility (the
// kappa budget is too small for this A and s) is reported, not thrown.
inline RhoSynthesis synthesize_rho(const Eigen::MatrixXd& A,
                                   const RepresentationStructure& rs, int s,
                                   double kappa, const NoiseModel& noise,
                                   const SynthesisOptions& opt = {}) {
  if (!rs.has_uniform_norm() || rs.uniform_norm() != BlockNorm::linf)
    throw std::invalid_argument(
        "synthesize_rho: blocks must carry the l_inf norm");
  if (s < 1 || s > rs.K())
    throw std::invalid_argument("synthesize_rho: s out of range");
  if (kappa < 0.0)
    throw std::invalid_argument("synthesize_rho: kappa must be nonnegative");
  noise.validate(static_cast<int>(A.rows()));
  const auto geom = detail::synthesis_geometry(A, rs);
  const int m = static_cast<int>(A.rows());
  const int N = rs.N();
  const int K = rs.K();
  const bool has_E = noise.E.norm() > 0.0;
  const bool has_D = noise.D.norm() > 0.0;
  const double z = upper_quantile(noise.epsilon / (2.0 * N));

  optim::ConeProgram cp;
  const int hbase = cp.add_vars(m * N);
  const int rho = cp.add_var();
  std::vector<int> tv(static_cast<size_t>(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      tv[static_cast<size_t>(i) * N + j] =
          cp.abs_epigraph(detail::v_entry(geom.Atil, hbase, i, j), "absV");
  // Every block row sum within kappa/s, backed off by the solver feasibility
  // slack so emitted certificates verify with nonnegative margin.
  const double cap = kappa / s - std::min(1e-7, 0.5 * kappa / s);
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < K; ++l) {
      optim::LinExpr e;
      for (int j = 0; j < rs.block_dims[l]; ++j)
        e.add(tv[static_cast<size_t>(i) * N + rs.offsets[l] + j], 1.0);
      cp.add_le(e, cap, "cap");
    }
  cp.add_ge(optim::LinExpr::variable(rho), 0.0, "rho+");
  for (int i = 0; i < N; ++i) {
    optim::LinExpr budget;
    if (has_E) {
      const int a = cp.add_var();
      std::vector<optim::LinExpr> rows;
      rows.reserve(m);
      for (int t = 0; t < m; ++t)
        rows.push_back(optim::dot(noise.E.col(t).transpose(), hbase + i * m));
      cp.add_soc(optim::LinExpr::variable(a), rows, "Eh");
      budget.add(a, 1.0);
    }
    if (has_D) {
      const int b = cp.add_var();
      std::vector<optim::LinExpr> rows;
      rows.reserve(m);
      for (int t = 0; t < m; ++t)
        rows.push_back(optim::dot(noise.D.col(t).transpose(), hbase + i * m));
      cp.add_soc(optim::LinExpr::variable(b), rows, "Dh");
      budget.add(b, z);
    }
    if (has_E || has_D) {
      budget.add(rho, -1.0);
      cp.add_le(budget, 0.0, "noise");
    }
  }
  detail::add_h_constraints(cp, geom, hbase, N);
  cp.minimize(optim::LinExpr::variable(rho));

  const auto report = optim::solve(cp, opt.solver);
  RhoSynthesis out;
  if (report.status == optim::SolveStatus::infeasible) {
    out.message = "infeasible: the kappa budget does not admit any contrast";
    return out;
  }
  if (report.status != optim::SolveStatus::optimal)
    throw std::runtime_error(std::string("synthesize_rho: solver failure (") +
                             optim::to_string(report.status) + ")");
  Eigen::MatrixXd H = detail::extract_h(report.primal, hbase, m, N);
  if (kappa == 0.0) {
    // A zero budget forces V = 0 exactly; the interior-point iterate meets
    // that only to solver accuracy, so re-project H onto the affine set
    // Atil' H = I (plus the range constraint for general B).
    Eigen::MatrixXd M = geom.Atil.transpose();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Identity(N, N);
    if (geom.Qz.size() > 0) {
      const int rz = static_cast<int>(geom.Qz.cols());
      M.conservativeResize(N + rz, Eigen::NoChange);
      M.bottomRows(rz) = geom.Qz.transpose();
      rhs.conservativeResize(N + rz, Eigen::NoChange);
      rhs.bottomRows(rz).setZero();
    }
    H -= M.completeOrthogonalDecomposition().solve(M * H - rhs).eval();
  }
  out.feasible = true;
  out.certificate = certificate_from_contrast(
      A, H, rs, s, PExp::inf(), "joint contrast and noise-radius synthesis");
  out.certificate.kappa = kappa;
  out.certificate.kappa_warning = kappa >= 0.5;
  // The stored radius is evaluated exactly for the emitted contrast, so the
  // certificate is self-consistent regardless of solver slack.
  out.certificate.rho = rho_epsilon(H, noise);
  out.certificate.epsilon = noise.epsilon;
  return out;
}

// Non-certified Monte-Carlo estimate of the noise radius for block norms
// where the per-column union bound does not apply: the empirical
// (1 - epsilon) quantile over Gaussian draws of
// max_k [ sup_{u in U} mag_k(H'u) + mag_k(H'D eta) ]. The bounded part uses
// the exact induced norm when tractable and the sqrt(d) Euclidean bound for
// l1 blocks.
inline double rho_monte_carlo(const Eigen::MatrixXd& H,
                              const RepresentationStructure& rs,
                              const NoiseModel& noise, int draws = 10000,
                              std::uint64_t seed = 0) {
  noise.validate(static_cast<int>(H.rows()));
  if (H.cols() != rs.N())
    throw std::invalid_argument("rho_monte_carlo: H column count must be N");
  if (draws < 1) throw std::invalid_argument("rho_monte_carlo: draws < 1");
  const int K = rs.K();
  const Eigen::MatrixXd HtE = H.transpose() * noise.E;
  Eigen::VectorXd bounded(K);
  for (int k = 0; k < K; ++k) {
    const auto rows = HtE.middleRows(rs.offsets[k], rs.block_dims[k]);
    switch (rs.block_norms[k]) {
      case BlockNorm::l2:
        bounded[k] = operator_norm(rows, BlockNorm::l2, BlockNorm::l2);
        break;
      case BlockNorm::linf:
        bounded[k] = operator_norm(rows, BlockNorm::l2, BlockNorm::linf);
        break;
      case BlockNorm::l1:
        bounded[k] = std::sqrt(double(rs.block_dims[k])) *
                     operator_norm(rows, BlockNorm::l2, BlockNorm::l2);
        break;
    }
  }
  const Eigen::MatrixXd HtD = H.transpose() * noise.D;
  Rng rng(seed);
  std::vector<double> vals(draws);
  for (int t = 0; t < draws; ++t) {
    const Eigen::VectorXd v = HtD * rng.normal_vector(static_cast<int>(noise.D.cols()));
    double worst = 0.0;
    for (int k = 0; k < K; ++k)
      worst = std::max(
          bounded[k] +
              vector_norm(v.segment(rs.offsets[k], rs.block_dims[k]),
                          rs.block_norms[k]),
          worst);
    vals[t] = worst;
  }
  std::sort(vals.begin(), vals.end());
  const int idx = std::min<int>(
      draws - 1,
      static_cast<int>(std::ceil((1.0 - noise.epsilon) * draws)) - 1);
  return vals[std::max(idx, 0)];
}

struct GoodnessBound {
  std::optional<int> s_bar;  // violation at s_bar + 1; empty when none found
  Eigen::VectorXd witness;   // kernel vector realizing the violation
};

namespace detail {

// One falsifier evaluation: maximize the mass of (Bx)_I over the kernel,
// normalized by the total mass, via alternating sign/coordinate LPs under a
// polyhedral block norm. Returns the best ratio seen and its kernel
// coefficients.
struct FalsifierEval {
  double ratio = 0.0;
  Eigen::VectorXd coeffs;
};

inline FalsifierEval falsify_support(
    const Eigen::MatrixXd& W, const RepresentationStructure& rs_exact,
    const RepresentationStructure& rs_lp, int s,
    const std::vector<int>& support, const optim::SolveOptions& sopt) {
  const int dn = static_cast<int>(W.cols());
  FalsifierEval best;

  Eigen::MatrixXd WI(0, dn);
  for (int k : support) {
    const int at = static_cast<int>(WI.rows());
    WI.conservativeResize(at + rs_lp.block_dims[k], dn);
    WI.bottomRows(rs_lp.block_dims[k]) =
        W.middleRows(rs_lp.offsets[k], rs_lp.block_dims[k]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(WI.transpose() * WI);
  if (es.eigenvalues().maxCoeff() <= 1e-18) return best;
  Eigen::VectorXd c = es.eigenvectors().col(dn - 1);
  Eigen::VectorXd w = W * c;

  for (int round = 0; round < 8; ++round) {
    // Freeze the linearization of the objective at the current w.
    optim::ConeProgram cp;
    const int cbase = cp.add_vars(dn);
    optim::LinExpr total;
    for (int k = 0; k < rs_lp.K(); ++k) {
      std::vector<optim::LinExpr> entries;
      for (int j = 0; j < rs_lp.block_dims[k]; ++j)
        entries.push_back(optim::dot(W.row(rs_lp.offsets[k] + j), cbase));
      total.add(cp.block_norm_epigraph(entries, rs_lp.block_norms[k], "mag"),
                1.0);
    }
    cp.add_le(total, 1.0, "mass");
    optim::LinExpr objective;
    for (int k : support) {
      if (rs_lp.block_norms[k] == BlockNorm::l1) {
        for (int j = 0; j < rs_lp.block_dims[k]; ++j) {
          const int i = rs_lp.offsets[k] + j;
          const double sign = w[i] >= 0.0 ? 1.0 : -1.0;
          objective.add(optim::dot(W.row(i), cbase), sign);
        }
      } else {
        int jbest = 0;
        for (int j = 1; j < rs_lp.block_dims[k]; ++j)
          if (std::abs(w[rs_lp.offsets[k] + j]) >
              std::abs(w[rs_lp.offsets[k] + jbest]))
            jbest = j;
        const int i = rs_lp.offsets[k] + jbest;
        const double sign = w[i] >= 0.0 ? 1.0 : -1.0;
        objective.add(optim::dot(W.row(i), cbase), sign);
      }
    }
    cp.minimize(objective.negated());
    const auto report = optim::solve(cp, sopt);
    if (report.status != optim::SolveStatus::optimal) break;
    const Eigen::VectorXd c_new = report.primal.head(dn);
    const Eigen::VectorXd w_new = W * c_new;
    const double mass = Lp(rs_exact, w_new, PExp::one());
    if (mass <= 1e-12) break;
    const double ratio = Lsp(rs_exact, w_new, s, PExp::one()) / mass;
    c = c_new;
    w = w_new;
    if (ratio > best.ratio + 1e-12) {
      best.ratio = ratio;
      best.coeffs = c_new;
    } else {
      break;
    }
  }
  // The seed direction itself may already violate; check it too.
  {
    const double mass = Lp(rs_exact, w, PExp::one());
    if (mass > 1e-12) {
      const double ratio = Lsp(rs_exact, w, s, PExp::one()) / mass;
      if (ratio > best.ratio) {
        best.ratio = ratio;
        best.coeffs = c;
      }
    }
  }
  return best;
}

}  // namespace detail

// Searches the kernel of A for a vector whose top-s block mass reaches half
// of its total mass, which would disprove exact recovery at sparsity s. The
// support search is greedy seeding by kernel energy plus 2-swap local
// search, at most `budget` supports per level; for l2 blocks the LP runs on
// the l_inf surrogate and the witness is re-checked under exact l2
// magnitudes. A bound is returned only when a witness is found.
inline GoodnessBound goodness_upper_bound(const Eigen::MatrixXd& A,
                                          const RepresentationStructure& rs,
                                          BlockNorm r, int budget = 200,
                                          const SynthesisOptions& opt = {}) {
  if (!rs.b_full_row_rank(kRankTol))
    throw std::invalid_argument("goodness_upper_bound: B must have full row rank");
  // Violations are recognized up to solver accuracy: an optimum of exactly
  // 1/2 (attained, e.g., by duplicated-column kernels) comes back from the
  // interior-point solver a hair below it.
  constexpr double kViolation = 0.5 - 1e-7;
  GoodnessBound out;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(kRankTol);
  if (lu.dimensionOfKernel() == 0) return out;
  const Eigen::MatrixXd Z = lu.kernel();
  Eigen::MatrixXd W = rs.b_is_identity ? Z : Eigen::MatrixXd(rs.B * Z);
  if (W.norm() <= 1e-14) return out;
  // Restrict coefficients to the row space of W so the LPs have no free
  // null directions.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinV);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-12 * svd.singularValues()(0)) ++rank;
  const Eigen::MatrixXd Vr = svd.matrixV().leftCols(rank);
  const Eigen::MatrixXd Wr = W * Vr;

  RepresentationStructure rs_exact = rs;
  rs_exact.block_norms.assign(rs.K(), r);
  RepresentationStructure rs_lp = rs_exact;
  if (r == BlockNorm::l2)
    rs_lp.block_norms.assign(rs.K(), BlockNorm::linf);

  const int K = rs.K();
  Eigen::VectorXd energy(K);
  for (int k = 0; k < K; ++k)
    energy[k] =
        W.middleRows(rs.offsets[k], rs.block_dims[k]).squaredNorm();

  for (int s = 1; s <= K; ++s) {
    std::map<std::vector<int>, double> seen;
    auto evaluate = [&](std::vector<int> support)
        -> std::pair<double, Eigen::VectorXd> {
      std::sort(support.begin(), support.end());
      auto it = seen.find(support);
      if (it != seen.end()) return {it->second, {}};
      const auto ev = detail::falsify_support(Wr, rs_exact, rs_lp, s, support,
                                              opt.solver);
      seen.emplace(support, ev.ratio);
      return {ev.ratio, ev.coeffs};
    };

    std::vector<int> order(K);
    for (int k = 0; k < K; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return energy[a] > energy[b]; });
    std::vector<int> current(order.begin(), order.begin() + s);
    auto [best_ratio, best_c] = evaluate(current);
    if (best_ratio >= kViolation) {
      out.s_bar = s - 1;
      out.witness = Z * (Vr * best_c);
      return out;
    }
    bool improved = true;
    while (improved && static_cast<int>(seen.size()) < budget) {
      improved = false;
      for (int pos = 0; pos < s && static_cast<int>(seen.size()) < budget;
           ++pos) {
        for (int cand = 0; cand < K; ++cand) {
          if (std::find(current.begin(), current.end(), cand) !=
              current.end())
            continue;
          std::vector<int> trial = current;
          trial[pos] = cand;
          auto [ratio, cvec] = evaluate(trial);
          if (ratio >= kViolation) {
            out.s_bar = s - 1;
            out.witness = Z * (Vr * cvec);
            return out;
          }
          if (ratio > best_ratio + 1e-12) {
            best_ratio = ratio;
            current = trial;
            improved = true;
          }
          if (static_cast<int>(seen.size()) >= budget) break;
        }
      }
    }
  }
  return out;
}

}  // namespace bsr
