#pragma once

// Verifiable certificates for the block recovery condition: residual
// matrices V with V B + H'A = B, the K x K matrix Omega of induced block
// norms of V, the column scan nu_hat, certificate verification and
// transformations, mutual block-incoherence, and brute-force restricted
// isometry checks.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "block_model.hpp"

namespace bsr {

// Centralized tolerances.
constexpr double kResidualIdentityTol = 1e-8;  // relative Frobenius
constexpr double kRankTol = 1e-10;
constexpr double kNormAgreeTol = 1e-9;

// Norm applied to H'Ax in the recovery condition: the blockwise max
// magnitude for contrast certificates, or the plain Euclidean norm for the
// restricted-isometry pairs.
enum class FitNorm { linf_blocks, l2 };

struct Certificate {
  Eigen::MatrixXd H;
  Eigen::MatrixXd V;      // empty for verification-only certificates
  Eigen::MatrixXd omega;  // K x K; empty when V is
  int s = 1;
  PExp q = PExp::inf();
  double kappa = 0.0;
  BlockNorm r = BlockNorm::l2;
  FitNorm fit_norm = FitNorm::linf_blocks;
  std::optional<double> rho;      // noise radius the contrast was sized for
  std::optional<double> epsilon;  // confidence level behind rho
  // Column-scan values stored at construction for the error-bound machinery:
  // kappa1 at q=1 and kappa_inf = s * (largest Omega entry column scan).
  double kappa1 = std::numeric_limits<double>::quiet_NaN();
  double kappa_inf = std::numeric_limits<double>::quiet_NaN();
  bool derived_by_rescaling = false;
  bool kappa_warning = false;  // kappa >= 1/2: no recovery guarantee follows
  std::string provenance;

  bool has_residual_matrix() const { return V.size() > 0; }
};

// Right pseudo-inverse B+ = B'(BB')^{-1} of a full-row-rank matrix.
inline Eigen::MatrixXd right_pseudo_inverse(const Eigen::MatrixXd& B) {
  const Eigen::MatrixXd gram = B * B.transpose();
  return gram.ldlt().solve(B).transpose();
}

// V = (B - H'A) B+, the canonical solution of V B + H'A = B; reduces to
// I - H'A when B is the identity.
inline Eigen::MatrixXd residual_V(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& H,
                                  const RepresentationStructure& rs) {
  if (A.rows() != H.rows())
    throw std::invalid_argument("residual_V: A and H row counts differ");
  if (H.cols() != rs.N())
    throw std::invalid_argument("residual_V: H column count must equal N");
  if (A.cols() != rs.n())
    throw std::invalid_argument("residual_V: A column count must equal n");
  if (!rs.b_full_row_rank(kRankTol))
    throw std::invalid_argument("residual_V: B must have full row rank");
  if (rs.b_is_identity)
    return Eigen::MatrixXd::Identity(rs.N(), rs.N()) - H.transpose() * A;
  const Eigen::MatrixXd R = rs.B - H.transpose() * A;
  return R * right_pseudo_inverse(rs.B);
}

// Omega[k][l] = ||V^{kl}||_{(l),(k)}: the induced norm of block (k,l) from
// block l's norm into block k's norm.
inline Eigen::MatrixXd omega_matrix(const Eigen::MatrixXd& V,
                                    const RepresentationStructure& rs) {
  if (V.rows() != rs.N() || V.cols() != rs.N())
    throw std::invalid_argument("omega_matrix: V must be N x N");
  const int K = rs.K();
  Eigen::MatrixXd om(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l)
      om(k, l) = operator_norm(V.block(rs.offsets[k], rs.offsets[l],
                                       rs.block_dims[k], rs.block_dims[l]),
                               rs.block_norms[l], rs.block_norms[k]);
  return om;
}

// nu_hat_{s,q} = max over columns of Omega of the q-norm of the s largest
// entries.
inline double nu_hat_from_omega(const Eigen::MatrixXd& omega, int s, PExp q) {
  const int K = static_cast<int>(omega.cols());
  if (s < 1 || s > K)
    throw std::invalid_argument("nu_hat: s out of range");
  double best = 0.0;
  for (int l = 0; l < K; ++l)
    best = std::max(best, snorm(omega.col(l), s, q));
  return best;
}

inline double nu_hat(const Eigen::MatrixXd& V,
                     const RepresentationStructure& rs, int s, PExp q) {
  if (!rs.has_uniform_norm())
    throw std::invalid_argument("nu_hat: mixed block norms are not supported");
  return nu_hat_from_omega(omega_matrix(V, rs), s, q);
}

// Smallest certifiable kappa at (s, q): s^{1-1/q} nu_hat.
inline double kappa_min_from_omega(const Eigen::MatrixXd& omega, int s,
                                   PExp q) {
  return nu_hat_from_omega(omega, s, q) / pow_s_inv_minus_one(double(s), q);
}

// Builds the fully populated certificate for a contrast H: canonical V,
// Omega, and the tightest kappa certifiable at (s, q). The q=1 and q=inf
// column scans are stored alongside for the error-bound machinery.
inline Certificate certificate_from_contrast(const Eigen::MatrixXd& A,
                                             const Eigen::MatrixXd& H,
                                             const RepresentationStructure& rs,
                                             int s, PExp q,
                                             std::string provenance) {
  if (!rs.has_uniform_norm())
    throw std::invalid_argument(
        "certificate_from_contrast: mixed block norms are not supported");
  Certificate cert;
  cert.H = H;
  cert.V = residual_V(A, H, rs);
  cert.omega = omega_matrix(cert.V, rs);
  cert.s = s;
  cert.q = q;
  cert.r = rs.uniform_norm();
  cert.kappa = kappa_min_from_omega(cert.omega, s, q);
  cert.kappa1 = kappa_min_from_omega(cert.omega, s, PExp::one());
  cert.kappa_inf = kappa_min_from_omega(cert.omega, s, PExp::inf());
  cert.kappa_warning = cert.kappa >= 0.5;
  cert.provenance = std::move(provenance);
  return cert;
}

struct VerifyResult {
  bool valid = false;
  double kappa_min = std::numeric_limits<double>::quiet_NaN();
  double margin = std::numeric_limits<double>::quiet_NaN();
};

// Checks the residual identity, the stored Omega, and the sufficient
// inequality nu_hat <= s^{1/q-1} kappa at the certificate's own (s, q).
inline VerifyResult verify_certificate(const Certificate& cert,
                                       const Eigen::MatrixXd& A,
                                       const RepresentationStructure& rs) {
  if (!cert.has_residual_matrix())
    throw std::invalid_argument(
        "verify_certificate: certificate has no residual matrix to check");
  if (cert.H.rows() != A.rows() || cert.H.cols() != rs.N() ||
      cert.V.rows() != rs.N() || cert.V.cols() != rs.N() ||
      A.cols() != rs.n())
    throw std::invalid_argument("verify_certificate: dimension mismatch");
  if (cert.omega.rows() != rs.K() || cert.omega.cols() != rs.K())
    throw std::invalid_argument("verify_certificate: omega must be K x K");

  const Eigen::MatrixXd resid =
      cert.V * rs.B + cert.H.transpose() * A - rs.B;
  const bool residual_ok =
      resid.norm() <= kResidualIdentityTol * std::max(1.0, rs.B.norm());

  const Eigen::MatrixXd om = omega_matrix(cert.V, rs);
  const bool omega_ok =
      (om - cert.omega).cwiseAbs().maxCoeff() <= kNormAgreeTol;

  VerifyResult out;
  out.kappa_min = kappa_min_from_omega(om, cert.s, cert.q);
  out.margin = cert.kappa - out.kappa_min;
  out.valid = residual_ok && omega_ok && out.margin >= -1e-12;
  return out;
}

// Moves a certificate to smaller sparsity and/or larger q: H is scaled by
// s^{1/q} s'^{-1/q'}, kappa by s^{1/q-1} / s'^{1/q'-1}, and V is replaced by
// the convex mix (1-c) I + c V, which keeps the residual identity exact for
// the scaled contrast. The new kappa is taken from the transformation, not
// re-proved from Omega.
inline Certificate rescale_certificate(const Certificate& cert, int s_new,
                                       PExp q_new) {
  if (s_new < 1 || s_new > cert.s)
    throw std::invalid_argument(
        "rescale_certificate: target sparsity must satisfy 1 <= s' <= s");
  if (!(cert.q <= q_new))
    throw std::invalid_argument("rescale_certificate: q may only increase");
  const double c =
      pow_s_inv(double(cert.s), cert.q) / pow_s_inv(double(s_new), q_new);
  Certificate out = cert;
  out.s = s_new;
  out.q = q_new;
  out.H = c * cert.H;
  out.kappa = cert.kappa * pow_s_inv_minus_one(double(cert.s), cert.q) /
              pow_s_inv_minus_one(double(s_new), q_new);
  if (cert.has_residual_matrix()) {
    const int N = static_cast<int>(cert.V.rows());
    out.V = (1.0 - c) * Eigen::MatrixXd::Identity(N, N) + c * cert.V;
  }
  out.derived_by_rescaling = true;
  out.kappa_warning = out.kappa >= 0.5;
  out.provenance = cert.provenance + " -> rescaled";
  return out;
}

// Finishes a rescaled certificate whose block structure is known: Omega and
// the stored column scans are recomputed from the new V.
inline Certificate rescale_certificate(const Certificate& cert, int s_new,
                                       PExp q_new,
                                       const RepresentationStructure& rs) {
  Certificate out = rescale_certificate(cert, s_new, q_new);
  if (out.has_residual_matrix()) {
    out.omega = omega_matrix(out.V, rs);
    out.kappa1 = kappa_min_from_omega(out.omega, out.s, PExp::one());
    out.kappa_inf = kappa_min_from_omega(out.omega, out.s, PExp::inf());
  }
  return out;
}

// Relaxes a certificate over l2 blocks to the same structure with l_inf
// blocks: same H and V, kappa grows by sqrt(d) with d the largest block.
// The recomputed Omega always satisfies the sufficient inequality at the
// relaxed kappa because ||M||_{inf,inf} <= sqrt(d) ||M||_{2,2}.
inline Certificate relax_to_linf_blocks(const Certificate& cert,
                                        const RepresentationStructure& rs) {
  if (cert.r != BlockNorm::l2)
    throw std::invalid_argument(
        "relax_to_linf_blocks: source certificate must use l2 blocks");
  int d = 1;
  for (int nk : rs.block_dims) d = std::max(d, nk);
  Certificate out = cert;
  out.r = BlockNorm::linf;
  out.kappa = std::sqrt(double(d)) * cert.kappa;
  if (cert.has_residual_matrix()) {
    RepresentationStructure relaxed = rs;
    relaxed.block_norms.assign(rs.K(), BlockNorm::linf);
    out.omega = omega_matrix(cert.V, relaxed);
    out.kappa1 = kappa_min_from_omega(out.omega, out.s, PExp::one());
    out.kappa_inf = kappa_min_from_omega(out.omega, out.s, PExp::inf());
  }
  out.derived_by_rescaling = true;
  out.kappa_warning = out.kappa >= 0.5;
  out.provenance = cert.provenance + " -> relaxed to linf blocks";
  return out;
}

struct IncoherenceReport {
  bool mu_infinite = false;
  double mu = 0.0;  // +infinity when mu_infinite
  // Present only when all blocks share one size and columns are unit norm.
  std::optional<double> nu;
  std::optional<double> mu_B;
  // Present when additionally 1 - (d-1) nu > 0.
  std::optional<double> chi;
  std::optional<double> mu_bar;
};

namespace detail {
inline Eigen::MatrixXd column_block(const Eigen::MatrixXd& A,
                                    const RepresentationStructure& rs, int k) {
  return A.middleCols(rs.offsets[k], rs.block_dims[k]);
}
}  // namespace detail

// Mutual block-incoherence of A under the given column partition: the
// largest spectral norm of C_k^{-1} A[k]'A[l] over k != l, infinite when
// some within-block Gram matrix C_k is singular. Sub-coherence nu and the
// normalized cross-coherence mu_B are reported when they are defined.
inline IncoherenceReport mutual_block_incoherence(
    const Eigen::MatrixXd& A, const RepresentationStructure& rs) {
  if (!rs.b_is_identity)
    throw std::invalid_argument(
        "mutual_block_incoherence: representation matrix must be the identity");
  if (!rs.has_uniform_norm() || rs.uniform_norm() != BlockNorm::l2)
    throw std::invalid_argument(
        "mutual_block_incoherence: blocks must carry the l2 norm");
  if (A.cols() != rs.n())
    throw std::invalid_argument(
        "mutual_block_incoherence: column count must match the partition");
  const int K = rs.K();
  IncoherenceReport rep;

  std::vector<Eigen::LDLT<Eigen::MatrixXd>> grams;
  grams.reserve(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd Ak = detail::column_block(A, rs, k);
    const Eigen::MatrixXd Ck = Ak.transpose() * Ak;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ck);
    if (es.eigenvalues().minCoeff() <=
        kRankTol * std::max(1.0, es.eigenvalues().maxCoeff())) {
      rep.mu_infinite = true;
      rep.mu = std::numeric_limits<double>::infinity();
    }
    grams.emplace_back(Ck);
  }
  if (!rep.mu_infinite) {
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXd Ak = detail::column_block(A, rs, k);
      for (int l = 0; l < K; ++l) {
        if (l == k) continue;
        const Eigen::MatrixXd cross =
            Ak.transpose() * detail::column_block(A, rs, l);
        rep.mu = std::max(
            rep.mu, operator_norm(grams[k].solve(cross), BlockNorm::l2,
                                  BlockNorm::l2));
      }
    }
  }

  const bool equal_dims = std::all_of(
      rs.block_dims.begin(), rs.block_dims.end(),
      [&](int dk) { return dk == rs.block_dims.front(); });
  const bool unit_columns =
      (A.colwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-8;
  if (equal_dims && unit_columns) {
    const int d = rs.block_dims.front();
    double nu = 0.0, mu_b = 0.0;
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXd Ak = detail::column_block(A, rs, k);
      const Eigen::MatrixXd Ck = Ak.transpose() * Ak;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          if (i != j) nu = std::max(nu, std::abs(Ck(i, j)));
      for (int l = k + 1; l < K; ++l) {
        const Eigen::MatrixXd cross =
            Ak.transpose() * detail::column_block(A, rs, l);
        mu_b = std::max(
            mu_b, operator_norm(cross, BlockNorm::l2, BlockNorm::l2) / d);
      }
    }
    rep.nu = nu;
    rep.mu_B = mu_b;
    const double denom = 1.0 - (d - 1) * nu;
    if (denom > 0.0) {
      rep.mu_bar = d * mu_b / denom;
      if (mu_b > 0.0) rep.chi = (denom + d * mu_b) / (2.0 * d * mu_b);
    }
  }
  return rep;
}

// The incoherence-based contrast: H = (1+mu)^{-1} [A[1] C_1^{-1}, ...,
// A[K] C_K^{-1}]. Requires finite mu.
inline Eigen::MatrixXd incoherence_contrast(const Eigen::MatrixXd& A,
                                            const RepresentationStructure& rs,
                                            const IncoherenceReport& rep) {
  if (rep.mu_infinite)
    throw std::invalid_argument(
        "incoherence_contrast: undefined for infinite incoherence");
  Eigen::MatrixXd H(A.rows(), rs.n());
  for (int k = 0; k < rs.K(); ++k) {
    const Eigen::MatrixXd Ak = detail::column_block(A, rs, k);
    H.middleCols(rs.offsets[k], rs.block_dims[k]) =
        Ak * (Ak.transpose() * Ak).ldlt().solve(
                 Eigen::MatrixXd::Identity(rs.block_dims[k], rs.block_dims[k]));
  }
  return H / (1.0 + rep.mu);
}

namespace detail {
inline double binomial_count(int K, int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * (K - i) / (i + 1);
  return c;
}
}  // namespace detail

// Exact smallest delta with (1-delta)||x||^2 <= ||A x_I||^2 <= (1+delta)
// ||x||^2 over all supports I of k blocks, by exhaustive enumeration.
inline double brip_brute_force(const Eigen::MatrixXd& A,
                               const RepresentationStructure& rs, int k) {
  if (k < 1 || k > rs.K())
    throw std::invalid_argument("brip_brute_force: k out of range");
  if (detail::binomial_count(rs.K(), k) > 1e5)
    throw std::invalid_argument(
        "brip_brute_force: combinatorial budget exceeded");
  double delta = 0.0;
  std::vector<int> pick;
  auto eval = [&]() {
    int cols = 0;
    for (int b : pick) cols += rs.block_dims[b];
    Eigen::MatrixXd M(A.rows(), cols);
    int at = 0;
    for (int b : pick) {
      M.middleCols(at, rs.block_dims[b]) = detail::column_block(A, rs, b);
      at += rs.block_dims[b];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.transpose() * M);
    delta = std::max(delta, std::max(es.eigenvalues().maxCoeff() - 1.0,
                                     1.0 - es.eigenvalues().minCoeff()));
  };
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(pick.size()) == k) {
      eval();
      return;
    }
    for (int b = start; b < rs.K(); ++b) {
      pick.push_back(b);
      self(self, b + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return delta;
}

// The two restricted-isometry certificates: (i) a scaled identity contrast
// measured in the Euclidean norm, (ii) the scaled sensing matrix itself
// measured blockwise. Both certify kappa = delta/(1-delta) at q=2 under
// BRIP(delta, 2s), which the caller is responsible for establishing.
inline std::pair<Certificate, Certificate> brip_certificate(
    const Eigen::MatrixXd& A, double delta, int s) {
  if (delta < 0.0 || delta >= 1.0)
    throw std::invalid_argument("brip_certificate: delta must be in [0, 1)");
  const double kappa = delta / (1.0 - delta);
  Certificate first;
  first.H = Eigen::MatrixXd::Identity(A.rows(), A.rows()) /
            (std::sqrt(double(s)) * std::sqrt(1.0 - delta));
  first.s = s;
  first.q = PExp::two();
  first.kappa = kappa;
  first.r = BlockNorm::l2;
  first.fit_norm = FitNorm::l2;
  first.kappa_warning = kappa >= 0.5;
  first.provenance = "restricted isometry, identity contrast";

  Certificate second;
  second.H = A / (1.0 - delta);
  second.s = s;
  second.q = PExp::two();
  second.kappa = kappa;
  second.r = BlockNorm::l2;
  second.fit_norm = FitNorm::linf_blocks;
  second.kappa_warning = kappa >= 0.5;
  second.provenance = "restricted isometry, sensing-matrix contrast";
  return {first, second};
}

}  // namespace bsr
