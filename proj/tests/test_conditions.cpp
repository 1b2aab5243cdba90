#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bsr/conditions.hpp"
#include "bsr/rng.hpp"
#include "oracles.hpp"

using bsr::BlockNorm;
using bsr::Certificate;
using bsr::PExp;
using bsr::RepresentationStructure;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Independent incoherence oracle: explicit inverses and singular values,
// no shared code with the implementation's solver path.
double mu_oracle(const MatrixXd& A, const RepresentationStructure& rs) {
  double mu = 0.0;
  for (int k = 0; k < rs.K(); ++k) {
    const MatrixXd Ak = A.middleCols(rs.offsets[k], rs.block_dims[k]);
    const MatrixXd Ckinv = (Ak.transpose() * Ak).inverse();
    for (int l = 0; l < rs.K(); ++l) {
      if (l == k) continue;
      const MatrixXd Al = A.middleCols(rs.offsets[l], rs.block_dims[l]);
      Eigen::JacobiSVD<MatrixXd> svd(Ckinv * Ak.transpose() * Al);
      mu = std::max(mu, svd.singularValues()(0));
    }
  }
  return mu;
}

// Independent isometry-defect oracle over all two-block supports.
double brip2_oracle(const MatrixXd& A, const RepresentationStructure& rs) {
  double delta = 0.0;
  for (int i = 0; i < rs.K(); ++i)
    for (int j = i + 1; j < rs.K(); ++j) {
      MatrixXd M(A.rows(), rs.block_dims[i] + rs.block_dims[j]);
      M << A.middleCols(rs.offsets[i], rs.block_dims[i]),
          A.middleCols(rs.offsets[j], rs.block_dims[j]);
      Eigen::JacobiSVD<MatrixXd> svd(M);
      const auto& w = svd.singularValues();
      delta = std::max(delta, std::max(w(0) * w(0) - 1.0,
                                       1.0 - w(w.size() - 1) * w(w.size() - 1)));
    }
  return delta;
}

// Checks the sparsity-capped norm inequality certified by a contrast on a
// batch of random vectors.
void check_q_condition(const MatrixXd& A, const RepresentationStructure& rs,
                       const Certificate& cert, std::uint64_t seed) {
  bsr::Rng rng(seed);
  const double s_inv_q = bsr::pow_s_inv(double(cert.s), cert.q);
  const double s_inv_q_m1 = bsr::pow_s_inv_minus_one(double(cert.s), cert.q);
  for (int trial = 0; trial < 1000; ++trial) {
    const VectorXd x = rng.normal_vector(rs.n());
    const VectorXd Bx = rs.b_is_identity ? x : VectorXd(rs.B * x);
    const double lhs = bsr::Lsp(rs, Bx, cert.s, cert.q);
    const double fit = bsr::Lp(rs, cert.H.transpose() * (A * x), PExp::inf());
    const double rhs =
        s_inv_q * fit + cert.kappa * s_inv_q_m1 * bsr::Lp(rs, Bx, PExp::one());
    REQUIRE(lhs <= rhs + 1e-9 * (1.0 + rhs));
  }
}

}  // namespace

TEST_CASE("residual matrix reduces to I - H'A for identity representation") {
  const auto rs = RepresentationStructure::identity({2, 1}, BlockNorm::l2);

  const MatrixXd A = MatrixXd::Random(4, 3);
  const MatrixXd V0 = bsr::residual_V(A, MatrixXd::Zero(4, 3), rs);
  REQUIRE((V0 - MatrixXd::Identity(3, 3)).norm() == 0.0);

  const auto rs3 = RepresentationStructure::identity({3}, BlockNorm::l2);
  const MatrixXd I3 = MatrixXd::Identity(3, 3);
  REQUIRE(bsr::residual_V(I3, I3, rs3).norm() == 0.0);

  const auto rs2 = RepresentationStructure::identity({1, 1}, BlockNorm::l2);
  MatrixXd D = MatrixXd::Zero(2, 2);
  D(0, 0) = 1.0;
  D(1, 1) = 2.0;
  const MatrixXd V = bsr::residual_V(D, MatrixXd::Identity(2, 2), rs2);
  REQUIRE(V(0, 0) == 0.0);
  REQUIRE(V(0, 1) == 0.0);
  REQUIRE(V(1, 0) == 0.0);
  REQUIRE(V(1, 1) == -1.0);
}

TEST_CASE("residual matrix solves the identity for general representations") {
  bsr::Rng rng(101);
  const MatrixXd B = rng.normal_matrix(4, 6);
  const auto rs = RepresentationStructure::with_matrix(B, {2, 2}, BlockNorm::l2);
  const MatrixXd A = rng.normal_matrix(8, 6);
  const MatrixXd V0 = 0.5 * rng.normal_matrix(4, 4);
  const MatrixXd target = (MatrixXd::Identity(4, 4) - V0) * B;
  const MatrixXd H =
      (A * (A.transpose() * A).ldlt().solve(target.transpose()));
  const MatrixXd V = bsr::residual_V(A, H, rs);
  REQUIRE((V * B + H.transpose() * A - B).norm() <= 1e-10 * B.norm());
  REQUIRE((V - V0).norm() <= 1e-10 * (1.0 + V0.norm()));
}

TEST_CASE("residual matrix rejects rank-deficient representations") {
  MatrixXd B(2, 3);
  B << 1, 2, 3, 2, 4, 6;
  RepresentationStructure rs;
  rs.B = B;
  rs.block_dims = {2};
  rs.block_norms = {BlockNorm::l2};
  rs.finalize();
  REQUIRE_THROWS_AS(bsr::residual_V(MatrixXd::Identity(3, 3),
                                    MatrixXd::Zero(3, 2), rs),
                    std::invalid_argument);
}

TEST_CASE("column scan of the block norm matrix") {
  const auto rs = RepresentationStructure::identity({2, 2}, BlockNorm::l2);
  REQUIRE(bsr::nu_hat(MatrixXd::Zero(4, 4), rs, 1, PExp::inf()) == 0.0);
  REQUIRE(bsr::nu_hat(MatrixXd::Identity(4, 4), rs, 1, PExp::inf()) == 1.0);

  const MatrixXd om1 = bsr::omega_matrix(MatrixXd::Identity(4, 4), rs);
  REQUIRE((om1 - MatrixXd::Identity(2, 2)).norm() == 0.0);

  bsr::Rng rng(7);
  const auto rs4 = RepresentationStructure::identity({2, 2, 2, 2}, BlockNorm::l2);
  const MatrixXd V = rng.normal_matrix(8, 8);
  const MatrixXd om = bsr::omega_matrix(V, rs4);
  double brute = 0.0;
  for (int l = 0; l < 4; ++l) {
    const auto pick = oracles::best_subset_norm(om.col(l), 2, PExp::one());
    brute = std::max(brute, pick);
  }
  REQUIRE(bsr::nu_hat(V, rs4, 2, PExp::one()) ==
          Catch::Approx(brute).epsilon(1e-12));

  RepresentationStructure mixed =
      RepresentationStructure::identity({2, 2}, BlockNorm::l2);
  mixed.block_norms[1] = BlockNorm::linf;
  REQUIRE_THROWS_AS(bsr::nu_hat(MatrixXd::Zero(4, 4), mixed, 1, PExp::inf()),
                    std::invalid_argument);
}

TEST_CASE("certificate verification on the identity sensing matrix") {
  const auto rs = RepresentationStructure::identity({1, 1, 1}, BlockNorm::l2);
  const MatrixXd I3 = MatrixXd::Identity(3, 3);

  Certificate good;
  good.H = I3;
  good.V = MatrixXd::Zero(3, 3);
  good.omega = MatrixXd::Zero(3, 3);
  good.s = 1;
  good.q = PExp::inf();
  good.kappa = 0.0;
  const auto res = bsr::verify_certificate(good, I3, rs);
  REQUIRE(res.valid);
  REQUIRE(res.kappa_min == 0.0);
  REQUIRE(res.margin == 0.0);

  Certificate bad;
  bad.H = MatrixXd::Zero(3, 3);
  bad.V = I3;
  bad.omega = I3;
  bad.s = 1;
  bad.q = PExp::inf();
  bad.kappa = 0.4;
  const auto res2 = bsr::verify_certificate(bad, I3, rs);
  REQUIRE_FALSE(res2.valid);
  REQUIRE(res2.kappa_min == Catch::Approx(1.0));
  REQUIRE(res2.margin == Catch::Approx(-0.6));

  Certificate empty;
  empty.H = I3;
  empty.s = 1;
  REQUIRE_THROWS_AS(bsr::verify_certificate(empty, I3, rs),
                    std::invalid_argument);

  Certificate wrong = good;
  wrong.H = MatrixXd::Identity(4, 4);
  REQUIRE_THROWS_AS(bsr::verify_certificate(wrong, I3, rs),
                    std::invalid_argument);
}

TEST_CASE("incoherence contrast certifies kappa = mu s / (1 + mu)") {
  const auto rs = RepresentationStructure::uniform(8, 2, BlockNorm::l2);
  bool found = false;
  for (std::uint64_t seed = 0; seed < 100 && !found; ++seed) {
    bsr::Rng rng(seed);
    MatrixXd A = rng.normal_matrix(8, 16);
    for (int j = 0; j < 16; ++j) A.col(j).normalize();
    const auto rep = bsr::mutual_block_incoherence(A, rs);
    if (rep.mu_infinite || rep.mu >= 1.0) continue;
    found = true;

    const MatrixXd H = bsr::incoherence_contrast(A, rs, rep);
    const auto cert =
        bsr::certificate_from_contrast(A, H, rs, 1, PExp::inf(), "incoherence");
    const auto res = bsr::verify_certificate(cert, A, rs);
    REQUIRE(res.valid);
    REQUIRE(cert.kappa ==
            Catch::Approx(rep.mu / (1.0 + rep.mu)).margin(1e-10));
    REQUIRE(cert.kappa < 0.5);
  }
  REQUIRE(found);
}

TEST_CASE("incoherence contrast meets the closed-form scan bound") {
  // Diagonal block scan entries equal mu/(1+mu) exactly, so the certified
  // kappa at q = inf is s mu / (1 + mu).
  bsr::Rng rng(23);
  const auto rs = RepresentationStructure::uniform(6, 2, BlockNorm::l2);
  const MatrixXd A = rng.normal_matrix(9, 12);
  const auto rep = bsr::mutual_block_incoherence(A, rs);
  REQUIRE_FALSE(rep.mu_infinite);
  const MatrixXd H = bsr::incoherence_contrast(A, rs, rep);
  for (int s = 1; s <= 4; ++s) {
    const auto cert =
        bsr::certificate_from_contrast(A, H, rs, s, PExp::inf(), "incoherence");
    REQUIRE(cert.kappa <= s * rep.mu / (1.0 + rep.mu) + 1e-8);
    REQUIRE(cert.kappa ==
            Catch::Approx(s * rep.mu / (1.0 + rep.mu)).margin(1e-9));
  }
}

TEST_CASE("certified contrasts satisfy the capped norm inequality") {
  bsr::Rng rng(31);

  SECTION("incoherence contrast, identity representation") {
    const auto rs = RepresentationStructure::uniform(5, 2, BlockNorm::l2);
    const MatrixXd A = rng.normal_matrix(8, 10);
    const auto rep = bsr::mutual_block_incoherence(A, rs);
    REQUIRE_FALSE(rep.mu_infinite);
    const MatrixXd H = bsr::incoherence_contrast(A, rs, rep);
    for (int s : {1, 2}) {
      for (PExp q : {PExp::one(), PExp::two(), PExp::inf()}) {
        const auto cert =
            bsr::certificate_from_contrast(A, H, rs, s, q, "incoherence");
        check_q_condition(A, rs, cert, 900 + s);
      }
    }
  }

  SECTION("compatible contrast, general representation") {
    const MatrixXd B = rng.normal_matrix(4, 6);
    const auto rs =
        RepresentationStructure::with_matrix(B, {2, 2}, BlockNorm::linf);
    const MatrixXd A = rng.normal_matrix(8, 6);
    const MatrixXd V0 = 0.4 * rng.normal_matrix(4, 4);
    const MatrixXd target = (MatrixXd::Identity(4, 4) - V0) * B;
    const MatrixXd H =
        A * (A.transpose() * A).ldlt().solve(target.transpose());
    const auto cert =
        bsr::certificate_from_contrast(A, H, rs, 2, PExp::two(), "manual");
    check_q_condition(A, rs, cert, 77);
  }
}

TEST_CASE("certified kappa grows with the sparsity level") {
  bsr::Rng rng(41);
  const auto rs = RepresentationStructure::identity({2, 3, 1, 2}, BlockNorm::l2);
  const MatrixXd om = bsr::omega_matrix(rng.normal_matrix(8, 8), rs);
  for (PExp q : {PExp::one(), PExp::two(), PExp::inf()}) {
    double prev = 0.0;
    for (int s = 1; s <= 4; ++s) {
      const double cur = bsr::kappa_min_from_omega(om, s, q);
      REQUIRE(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("certificate rescaling") {
  bsr::Rng rng(53);
  const auto rs = RepresentationStructure::uniform(4, 2, BlockNorm::l2);
  const MatrixXd A = rng.normal_matrix(6, 8);
  const MatrixXd H = 0.4 * rng.normal_matrix(6, 8);
  const auto cert =
      bsr::certificate_from_contrast(A, H, rs, 4, PExp::inf(), "manual");

  SECTION("identity transform") {
    const auto same = bsr::rescale_certificate(cert, 4, PExp::inf(), rs);
    REQUIRE((same.H - cert.H).norm() == 0.0);
    REQUIRE((same.V - cert.V).norm() == 0.0);
    REQUIRE(same.kappa == Catch::Approx(cert.kappa));
    REQUIRE(same.derived_by_rescaling);
  }

  SECTION("halving s at q = inf keeps H and halves kappa") {
    const auto half = bsr::rescale_certificate(cert, 2, PExp::inf(), rs);
    REQUIRE((half.H - cert.H).norm() == 0.0);
    REQUIRE(half.kappa == Catch::Approx(cert.kappa / 2.0));
    REQUIRE(half.s == 2);
  }

  SECTION("scaled residual matrix keeps the identity exact") {
    const auto cert2 =
        bsr::certificate_from_contrast(A, H, rs, 4, PExp::two(), "manual");
    const auto moved = bsr::rescale_certificate(cert2, 1, PExp::inf(), rs);
    REQUIRE((moved.V * rs.B + moved.H.transpose() * A - rs.B).norm() <=
            1e-12 * rs.B.norm());
  }

  SECTION("transform preserves the normalized level exactly") {
    for (int s_new : {1, 2, 4}) {
      for (PExp q_new : {PExp::two(), PExp::inf()}) {
        const auto cert2 =
            bsr::certificate_from_contrast(A, H, rs, 4, PExp::two(), "manual");
        const auto moved = bsr::rescale_certificate(cert2, s_new, q_new, rs);
        const double before =
            cert2.kappa * bsr::pow_s_inv_minus_one(4.0, PExp::two());
        const double after =
            moved.kappa * bsr::pow_s_inv_minus_one(double(s_new), q_new);
        REQUIRE(after == Catch::Approx(before).epsilon(1e-12));
      }
    }
  }

  SECTION("premise violations throw") {
    REQUIRE_THROWS_AS(bsr::rescale_certificate(cert, 5, PExp::inf(), rs),
                      std::invalid_argument);
    const auto cert2 =
        bsr::certificate_from_contrast(A, H, rs, 2, PExp::inf(), "manual");
    REQUIRE_THROWS_AS(bsr::rescale_certificate(cert2, 2, PExp::two(), rs),
                      std::invalid_argument);
  }
}

TEST_CASE("block norm relaxation from l2 to l_inf") {
  bsr::Rng rng(67);
  const auto rs = RepresentationStructure::uniform(4, 3, BlockNorm::l2);
  const MatrixXd A = rng.normal_matrix(8, 12);
  const MatrixXd H = 0.3 * rng.normal_matrix(8, 12);
  const auto cert =
      bsr::certificate_from_contrast(A, H, rs, 2, PExp::inf(), "manual");

  const auto relaxed = bsr::relax_to_linf_blocks(cert, rs);
  REQUIRE((relaxed.H - cert.H).norm() == 0.0);
  REQUIRE((relaxed.V - cert.V).norm() == 0.0);
  REQUIRE(relaxed.r == BlockNorm::linf);
  REQUIRE(relaxed.kappa == Catch::Approx(std::sqrt(3.0) * cert.kappa));

  const auto rs_inf = RepresentationStructure::uniform(4, 3, BlockNorm::linf);
  const auto res = bsr::verify_certificate(relaxed, A, rs_inf);
  REQUIRE(res.valid);
  check_q_condition(A, rs_inf, relaxed, 4242);

  REQUIRE_THROWS_AS(bsr::relax_to_linf_blocks(relaxed, rs_inf),
                    std::invalid_argument);
}

TEST_CASE("mutual block-incoherence basics") {
  const auto rs4 = RepresentationStructure::uniform(2, 2, BlockNorm::l2);
  const auto rep_id =
      bsr::mutual_block_incoherence(MatrixXd::Identity(4, 4), rs4);
  REQUIRE_FALSE(rep_id.mu_infinite);
  REQUIRE(rep_id.mu == 0.0);
  REQUIRE(rep_id.nu.has_value());
  REQUIRE(*rep_id.nu == 0.0);
  REQUIRE(rep_id.mu_B.has_value());
  REQUIRE(*rep_id.mu_B == 0.0);
  REQUIRE(rep_id.mu_bar.has_value());
  REQUIRE(*rep_id.mu_bar == 0.0);
  REQUIRE_FALSE(rep_id.chi.has_value());

  // Two copies of the same orthonormal block: the cross product equals the
  // identity, so mu >= 1.
  MatrixXd twin(4, 4);
  twin << MatrixXd::Identity(4, 2), MatrixXd::Identity(4, 2);
  const auto rep_twin = bsr::mutual_block_incoherence(twin, rs4);
  REQUIRE_FALSE(rep_twin.mu_infinite);
  REQUIRE(rep_twin.mu >= 1.0);

  // A rank-deficient block makes mu infinite, as a value rather than an
  // error.
  MatrixXd flat(4, 4);
  flat << MatrixXd::Identity(4, 2), MatrixXd::Identity(4, 1),
      MatrixXd::Identity(4, 1);
  const auto rep_flat = bsr::mutual_block_incoherence(flat, rs4);
  REQUIRE(rep_flat.mu_infinite);
  REQUIRE(std::isinf(rep_flat.mu));

  REQUIRE_THROWS_AS(
      bsr::mutual_block_incoherence(
          MatrixXd::Identity(4, 4),
          RepresentationStructure::uniform(2, 2, BlockNorm::linf)),
      std::invalid_argument);
}

TEST_CASE("mutual block-incoherence matches the singular value oracle") {
  bsr::Rng rng(73);
  const auto rs = RepresentationStructure::uniform(4, 2, BlockNorm::l2);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd A = rng.normal_matrix(6, 8);
    const auto rep = bsr::mutual_block_incoherence(A, rs);
    REQUIRE_FALSE(rep.mu_infinite);
    REQUIRE(rep.mu == Catch::Approx(mu_oracle(A, rs)).epsilon(1e-9));
  }
}

TEST_CASE("incoherence decreases with more observations") {
  const auto rs = RepresentationStructure::uniform(16, 4, BlockNorm::l2);
  double mean_small = 0.0, mean_large = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    bsr::Rng rng(1000 + trial);
    const MatrixXd A32 = rng.normal_matrix(32, 64) / std::sqrt(32.0);
    const MatrixXd A128 = rng.normal_matrix(128, 64) / std::sqrt(128.0);
    const auto r32 = bsr::mutual_block_incoherence(A32, rs);
    const auto r128 = bsr::mutual_block_incoherence(A128, rs);
    REQUIRE_FALSE(r32.mu_infinite);
    REQUIRE_FALSE(r128.mu_infinite);
    mean_small += r32.mu / 20.0;
    mean_large += r128.mu / 20.0;
  }
  REQUIRE(mean_large < mean_small);
}

TEST_CASE("restricted isometry brute force") {
  SECTION("orthonormal columns have zero defect") {
    bsr::Rng rng(83);
    const MatrixXd G = rng.normal_matrix(8, 6);
    const MatrixXd Q =
        Eigen::HouseholderQR<MatrixXd>(G).householderQ() *
        MatrixXd::Identity(8, 6);
    const auto rs = RepresentationStructure::uniform(3, 2, BlockNorm::l2);
    REQUIRE(bsr::brip_brute_force(Q, rs, 2) <= 1e-12);
  }

  SECTION("repeated columns across blocks force delta >= 1") {
    bsr::Rng rng(89);
    VectorXd a = rng.normal_vector(5);
    a.normalize();
    MatrixXd A(5, 2);
    A << a, a;
    const auto rs = RepresentationStructure::uniform(2, 1, BlockNorm::l2);
    REQUIRE(bsr::brip_brute_force(A, rs, 2) >= 1.0);
  }

  SECTION("exhaustive sweep agrees with the singular value oracle") {
    bsr::Rng rng(97);
    const auto rs = RepresentationStructure::uniform(6, 2, BlockNorm::l2);
    const MatrixXd A = rng.normal_matrix(8, 12) / std::sqrt(8.0);
    REQUIRE(bsr::brip_brute_force(A, rs, 2) ==
            Catch::Approx(brip2_oracle(A, rs)).epsilon(1e-10));
  }

  SECTION("combinatorial budget is enforced") {
    const auto rs = RepresentationStructure::uniform(30, 1, BlockNorm::l2);
    const MatrixXd A = MatrixXd::Random(5, 30);
    REQUIRE_THROWS_AS(bsr::brip_brute_force(A, rs, 10), std::invalid_argument);
  }
}

TEST_CASE("restricted isometry certificates") {
  const MatrixXd A = MatrixXd::Identity(4, 4);

  const auto [c1, c2] = bsr::brip_certificate(A, 0.0, 1);
  REQUIRE((c1.H - MatrixXd::Identity(4, 4)).norm() == 0.0);
  REQUIRE(c1.kappa == 0.0);
  REQUIRE(c1.fit_norm == bsr::FitNorm::l2);
  REQUIRE_FALSE(c1.has_residual_matrix());
  REQUIRE((c2.H - A).norm() == 0.0);
  REQUIRE(c2.fit_norm == bsr::FitNorm::linf_blocks);

  const auto [w1, w2] = bsr::brip_certificate(A, 0.5, 2);
  REQUIRE(w1.kappa == Catch::Approx(1.0));
  REQUIRE(w1.kappa_warning);
  REQUIRE(w2.kappa_warning);

  const auto [f1, f2] = bsr::brip_certificate(A, 0.2, 3);
  REQUIRE(f1.kappa == Catch::Approx(0.25));
  REQUIRE(f2.kappa == Catch::Approx(0.25));
  REQUIRE_FALSE(f1.kappa_warning);

  REQUIRE_THROWS_AS(bsr::brip_certificate(A, 1.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(bsr::brip_certificate(A, -0.1, 1), std::invalid_argument);
}

TEST_CASE("stored column scans match their definitions") {
  bsr::Rng rng(111);
  const auto rs = RepresentationStructure::uniform(5, 2, BlockNorm::l2);
  const MatrixXd A = rng.normal_matrix(7, 10);
  const MatrixXd H = 0.25 * rng.normal_matrix(7, 10);
  const auto cert =
      bsr::certificate_from_contrast(A, H, rs, 3, PExp::two(), "manual");
  REQUIRE(cert.kappa1 ==
          Catch::Approx(bsr::kappa_min_from_omega(cert.omega, 3, PExp::one())));
  REQUIRE(cert.kappa_inf ==
          Catch::Approx(bsr::kappa_min_from_omega(cert.omega, 3, PExp::inf())));
  REQUIRE(cert.kappa1 <= cert.kappa + 1e-12);
  REQUIRE(cert.kappa <= cert.kappa_inf + 1e-12);
}
