#pragma once

// Independent reference computations used to cross-check the library.
// Everything here is deliberately brute force and shares no code path with
// the implementation under test.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "bsr/block_model.hpp"

namespace oracles {

// Inverse of the upper tail of the standard normal via bisection on
// 0.5*erfc(z/sqrt(2)) = delta.
inline double upper_quantile(double delta) {
  double lo = -42.0, hi = 42.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double tail = 0.5 * std::erfc(mid / std::sqrt(2.0));
    (tail > delta ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// max ||M u||_theta over the vertices of the l_r unit ball, r in {1, inf}.
inline double operator_norm_vertices(const Eigen::MatrixXd& M,
                                     bsr::BlockNorm r, bsr::BlockNorm theta) {
  const int b = static_cast<int>(M.cols());
  double best = 0.0;
  if (r == bsr::BlockNorm::l1) {
    for (int j = 0; j < b; ++j)
      best = std::max(best, bsr::vector_norm(M.col(j), theta));
    return best;
  }
  // l_inf ball: 2^b sign vertices.
  for (long mask = 0; mask < (1L << b); ++mask) {
    Eigen::VectorXd u(b);
    for (int j = 0; j < b; ++j) u[j] = (mask >> j) & 1 ? 1.0 : -1.0;
    best = std::max(best, bsr::vector_norm(M * u, theta));
  }
  return best;
}

// Largest singular value through the spectrum of M^T M.
inline double sigma_max(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.transpose() * M);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// l_p norm of the best s-subset of magnitudes, by exhaustive subset search.
inline double best_subset_norm(const Eigen::VectorXd& mags, int s,
                               bsr::PExp p) {
  const int K = static_cast<int>(mags.size());
  double best = 0.0;
  std::vector<int> pick;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(pick.size()) == s) {
      Eigen::VectorXd sub(s);
      for (int i = 0; i < s; ++i) sub[i] = mags[pick[i]];
      best = std::max(best, bsr::vector_norm(sub, p));
      return;
    }
    for (int j = start; j < K; ++j) {
      pick.push_back(j);
      self(self, j + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return best;
}

// Minimum of c'x over {A_eq x = b_eq, A_le x <= b_le} by enumerating basic
// feasible points (all equalities active plus n - p inequality rows). Only
// meaningful for bounded problems whose optimum sits at a vertex; returns
// nothing when no feasible vertex exists.
struct LpVertexOracle {
  std::optional<double> value;
  Eigen::VectorXd argmin;
};

inline LpVertexOracle lp_vertex_min(const Eigen::VectorXd& c,
                                    const Eigen::MatrixXd& Aeq,
                                    const Eigen::VectorXd& beq,
                                    const Eigen::MatrixXd& Ale,
                                    const Eigen::VectorXd& ble) {
  const int n = static_cast<int>(c.size());
  const int p = static_cast<int>(Aeq.rows());
  const int q = static_cast<int>(Ale.rows());
  LpVertexOracle out;
  const int need = n - p;
  if (need < 0) return out;
  std::vector<int> pick;
  auto consider = [&]() {
    Eigen::MatrixXd S(n, n);
    Eigen::VectorXd rhs(n);
    S.topRows(p) = Aeq;
    rhs.head(p) = beq;
    for (int i = 0; i < need; ++i) {
      S.row(p + i) = Ale.row(pick[i]);
      rhs[p + i] = ble[pick[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) return;
    const Eigen::VectorXd x = lu.solve(rhs);
    if (p > 0 && (Aeq * x - beq).cwiseAbs().maxCoeff() > 1e-8) return;
    if (q > 0 && ((Ale * x - ble).maxCoeff() > 1e-8)) return;
    const double v = c.dot(x);
    if (!out.value || v < *out.value) {
      out.value = v;
      out.argmin = x;
    }
  };
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(pick.size()) == need) {
      consider();
      return;
    }
    for (int j = start; j < q; ++j) {
      pick.push_back(j);
      self(self, j + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace oracles
