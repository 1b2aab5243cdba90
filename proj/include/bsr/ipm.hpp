#pragma once

// Homogeneous self-dual interior-point method for programs with linear
// equalities, an orthant block, and second-order cones. Mehrotra
// predictor-corrector steps under Nesterov-Todd scaling; the symmetric
// quasi-definite KKT matrix is factored once per iteration with static
// regularization, and every solve is polished by iterative refinement
// against the unregularized matrix. Infeasibility and unboundedness are
// reported through Farkas-type certificates extracted from the embedding.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cone_program.hpp"

namespace bsr::optim {

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::unbounded:
      return "unbounded";
    case SolveStatus::max_iter:
      return "max_iter";
  }
  return "?";
}

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  std::ostream* trace = nullptr;  // per-iteration diagnostics when set
};

struct SolveReport {
  SolveStatus status = SolveStatus::max_iter;
  Eigen::VectorXd primal;  // x; improving-ray when unbounded
  Eigen::VectorXd dual;    // [y; z]; Farkas witness when infeasible
  Eigen::VectorXd slack;   // cone slacks s
  int eq_count = 0;        // split point of dual into y | z
  // dual_objective is defined as primal_objective - gap with gap = s'z >= 0,
  // so weak duality holds in every report, including truncated ones.
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::vector<double> best_objective_trace;  // running best primal objective
  std::string message;

  Eigen::VectorXd y() const { return dual.head(eq_count); }
  Eigen::VectorXd z() const { return dual.tail(dual.size() - eq_count); }
};

namespace detail {

constexpr double kInfStep = 1e300;

struct Cones {
  int l = 0;
  std::vector<int> soc_dim;
  std::vector<int> soc_off;  // offsets within the cone vector
  int m = 0;
  int degree = 0;  // barrier degree: l + number of cones

  static Cones make(int l, const std::vector<int>& dims) {
    Cones c;
    c.l = l;
    c.m = l;
    for (int q : dims) {
      c.soc_dim.push_back(q);
      c.soc_off.push_back(c.m);
      c.m += q;
    }
    c.degree = l + static_cast<int>(dims.size());
    return c;
  }
};

// Nesterov-Todd scaling point for the pair (s, z); W z = W^{-1} s = lambda.
struct Scaling {
  Eigen::VectorXd w;   // orthant sqrt(s_i/z_i)
  Eigen::VectorXd w2;  // orthant s_i/z_i
  struct Soc {
    double eta = 1.0;
    double eta2 = 1.0;
    Eigen::VectorXd wbar;
  };
  std::vector<Soc> soc;
  Eigen::VectorXd lambda;
  bool ok = true;

  static Scaling identity(const Cones& C) {
    Scaling sc;
    sc.w = Eigen::VectorXd::Ones(C.l);
    sc.w2 = Eigen::VectorXd::Ones(C.l);
    for (int q : C.soc_dim) {
      Soc s;
      s.wbar = Eigen::VectorXd::Zero(q);
      s.wbar[0] = 1.0;
      sc.soc.push_back(std::move(s));
    }
    sc.lambda = Eigen::VectorXd::Ones(C.m);
    return sc;
  }
};

inline Eigen::VectorXd wbar_apply(const Eigen::VectorXd& wbar,
                                  const Eigen::Ref<const Eigen::VectorXd>& v,
                                  double top_sign) {
  // top_sign +1: Wbar v; top_sign -1: Wbar^{-1} v.
  const int q = static_cast<int>(wbar.size());
  Eigen::VectorXd out(q);
  const double w0 = wbar[0];
  const double dotv = wbar.tail(q - 1).dot(v.tail(q - 1));
  out[0] = w0 * v[0] + top_sign * dotv;
  out.tail(q - 1) =
      v.tail(q - 1) +
      (top_sign * v[0] + dotv / (1.0 + w0)) * wbar.tail(q - 1);
  return out;
}

inline Scaling make_scaling(const Cones& C, const Eigen::VectorXd& s,
                            const Eigen::VectorXd& z) {
  Scaling sc;
  sc.w.resize(C.l);
  sc.w2.resize(C.l);
  sc.lambda.resize(C.m);
  for (int i = 0; i < C.l; ++i) {
    if (s[i] <= 0.0 || z[i] <= 0.0) {
      sc.ok = false;
      return sc;
    }
    sc.w2[i] = s[i] / z[i];
    sc.w[i] = std::sqrt(sc.w2[i]);
    sc.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    const auto sb = s.segment(off, q);
    const auto zb = z.segment(off, q);
    const double ress = sb[0] * sb[0] - sb.tail(q - 1).squaredNorm();
    const double resz = zb[0] * zb[0] - zb.tail(q - 1).squaredNorm();
    if (ress <= 0.0 || resz <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0) {
      sc.ok = false;
      return sc;
    }
    const double snorm = std::sqrt(ress);
    const double znorm = std::sqrt(resz);
    Eigen::VectorXd sbar = sb / snorm;
    Eigen::VectorXd zbar = zb / znorm;
    const double gamma =
        std::sqrt((1.0 + sbar.dot(zbar)) * 0.5);  // >= sqrt(1) for interior
    Scaling::Soc sj;
    sj.wbar.resize(q);
    sj.wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
    sj.wbar.tail(q - 1) =
        (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
    sj.eta2 = snorm / znorm;
    sj.eta = std::sqrt(sj.eta2);
    sc.lambda.segment(off, q) = sj.eta * wbar_apply(sj.wbar, zb, +1.0);
    sc.soc.push_back(std::move(sj));
  }
  return sc;
}

inline Eigen::VectorXd apply_w(const Cones& C, const Scaling& sc,
                               const Eigen::VectorXd& v) {
  Eigen::VectorXd out(C.m);
  out.head(C.l) = sc.w.cwiseProduct(v.head(C.l));
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    out.segment(off, q) =
        sc.soc[j].eta * wbar_apply(sc.soc[j].wbar, v.segment(off, q), +1.0);
  }
  return out;
}

inline Eigen::VectorXd apply_winv(const Cones& C, const Scaling& sc,
                                  const Eigen::VectorXd& v) {
  Eigen::VectorXd out(C.m);
  out.head(C.l) = v.head(C.l).cwiseQuotient(sc.w);
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    out.segment(off, q) =
        wbar_apply(sc.soc[j].wbar, v.segment(off, q), -1.0) / sc.soc[j].eta;
  }
  return out;
}

inline Eigen::VectorXd jordan_prod(const Cones& C, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& v) {
  Eigen::VectorXd out(C.m);
  out.head(C.l) = u.head(C.l).cwiseProduct(v.head(C.l));
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    const auto ub = u.segment(off, q);
    const auto vb = v.segment(off, q);
    out[off] = ub.dot(vb);
    out.segment(off + 1, q - 1) =
        ub[0] * vb.tail(q - 1) + vb[0] * ub.tail(q - 1);
  }
  return out;
}

// Solves lambda o x = r for x.
inline Eigen::VectorXd jordan_solve(const Cones& C,
                                    const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& r) {
  Eigen::VectorXd out(C.m);
  out.head(C.l) = r.head(C.l).cwiseQuotient(lambda.head(C.l));
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    const auto lb = lambda.segment(off, q);
    const auto rb = r.segment(off, q);
    const double det = lb[0] * lb[0] - lb.tail(q - 1).squaredNorm();
    const double x0 = (lb[0] * rb[0] - lb.tail(q - 1).dot(rb.tail(q - 1))) / det;
    out[off] = x0;
    out.segment(off + 1, q - 1) = (rb.tail(q - 1) - x0 * lb.tail(q - 1)) / lb[0];
  }
  return out;
}

inline void add_unit(const Cones& C, Eigen::VectorXd& v, double amount) {
  v.head(C.l).array() += amount;
  for (size_t j = 0; j < C.soc_dim.size(); ++j) v[C.soc_off[j]] += amount;
}

inline double cone_margin(const Cones& C, const Eigen::VectorXd& v) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < C.l; ++i) m = std::min(m, v[i]);
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    m = std::min(m, v[off] - v.segment(off + 1, q - 1).norm());
  }
  return m;
}

// Largest alpha with v + alpha dv remaining in the cone (v interior).
inline double max_step(const Cones& C, const Eigen::VectorXd& v,
                       const Eigen::VectorXd& dv) {
  double alpha = kInfStep;
  for (int i = 0; i < C.l; ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  for (size_t j = 0; j < C.soc_dim.size(); ++j) {
    const int q = C.soc_dim[j];
    const int off = C.soc_off[j];
    const auto vb = v.segment(off, q);
    const auto db = dv.segment(off, q);
    const double a = db[0] * db[0] - db.tail(q - 1).squaredNorm();
    const double b = 2.0 * (vb[0] * db[0] - vb.tail(q - 1).dot(db.tail(q - 1)));
    const double c = vb[0] * vb[0] - vb.tail(q - 1).squaredNorm();
    // First positive root of a t^2 + b t + c, if any, is the exit point.
    double root = kInfStep;
    if (std::abs(a) < 1e-300) {
      if (b < 0.0) root = -c / b;
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sd = std::sqrt(disc);
        const double qq = -0.5 * (b + (b >= 0.0 ? sd : -sd));
        double r1 = qq / a;
        double r2 = (qq != 0.0) ? c / qq : kInfStep;
        if (r1 > r2) std::swap(r1, r2);
        if (r1 > 0.0)
          root = r1;
        else if (r2 > 0.0)
          root = r2;
      }
    }
    alpha = std::min(alpha, root);
  }
  return alpha;
}

class HsdIpm {
 public:
  HsdIpm(const ConeProgram::Standard& st, const SolveOptions& opt)
      : st_(st), opt_(opt) {
    n_ = static_cast<int>(st.c.size());
    p_ = static_cast<int>(st.b.size());
    C_ = Cones::make(st.orthant, st.soc_dims);
    m_ = C_.m;
    dim_ = n_ + p_ + m_;
    dscale_ = std::max(
        {1.0, st.b.size() ? st.b.cwiseAbs().maxCoeff() : 0.0,
         st.h.size() ? st.h.cwiseAbs().maxCoeff() : 0.0,
         st.c.size() ? st.c.cwiseAbs().maxCoeff() : 0.0, max_abs(st.A),
         max_abs(st.G)});
    regsign_ = Eigen::VectorXd::Ones(dim_);
    regsign_.tail(p_ + m_).array() = -1.0;
  }

  SolveReport run() {
    SolveReport rep;
    rep.eq_count = p_;
    if (!initialize(rep)) return finish(rep, SolveStatus::max_iter);

    for (iter_ = 0; iter_ <= opt_.max_iter; ++iter_) {
      const Eigen::VectorXd rx =
          st_.A.transpose() * y_ + st_.G.transpose() * z_ + st_.c * tau_;
      const Eigen::VectorXd ry = st_.A * x_ - st_.b * tau_;
      const Eigen::VectorXd rz = st_.G * x_ + s_ - st_.h * tau_;
      const double rt =
          st_.c.dot(x_) + st_.b.dot(y_) + st_.h.dot(z_) + kappa_;
      const double mu = (s_.dot(z_) + tau_ * kappa_) / (C_.degree + 1);

      record_objective(rep);
      if (check_optimal(rep)) return finish(rep, SolveStatus::optimal);
      if (check_primal_infeasible(rep))
        return finish(rep, SolveStatus::infeasible);
      if (check_dual_infeasible(rep))
        return finish(rep, SolveStatus::unbounded);
      if (iter_ == opt_.max_iter) {
        rep.message = "iteration limit reached";
        break;
      }

      sc_ = make_scaling(C_, s_, z_);
      if (!sc_.ok) {
        rep.message = "numerical breakdown: iterate left the cone interior";
        break;
      }
      if (m_ > 0) {
        const double drift =
            (apply_winv(C_, sc_, s_) - sc_.lambda).norm() /
            (1.0 + sc_.lambda.norm());
        if (!(drift < 1e-6)) {
          rep.message = "numerical breakdown: scaling identity drift " +
                        std::to_string(drift);
          break;
        }
      }
      if (!factor(rep)) break;

      Eigen::VectorXd rhs3(dim_);
      rhs3 << -st_.c, st_.b, st_.h;
      const Eigen::VectorXd v3 = kkt_solve(rhs3);
      // c'v3x + b'v3y + h'v3z equals -||W v3z||^2 for an exact solve of the
      // embedding system; the quadratic form keeps the denominator's sign
      // where the raw inner products cancel catastrophically near
      // convergence.
      const double den =
          -(m_ > 0 ? apply_w(C_, sc_, v3.tail(m_)).squaredNorm() : 0.0) -
          kappa_ / tau_;
      if (!(den < 0.0)) {
        rep.message = "numerical breakdown: singular embedding system";
        break;
      }

      // Predictor.
      const Eigen::VectorXd ll = jordan_prod(C_, sc_.lambda, sc_.lambda);
      Dir da = direction(-rx, -ry, -rz, -rt, -ll, -tau_ * kappa_, v3, den);
      double a_aff = std::min(
          {1.0, max_step(C_, s_, da.ds), max_step(C_, z_, da.dz),
           da.dtau < 0.0 ? -tau_ / da.dtau : kInfStep,
           da.dkappa < 0.0 ? -kappa_ / da.dkappa : kInfStep});
      const double sigma = std::pow(1.0 - a_aff, 3);

      // Corrector.
      Eigen::VectorXd bs =
          -ll - jordan_prod(C_, apply_winv(C_, sc_, da.ds),
                            apply_w(C_, sc_, da.dz));
      add_unit(C_, bs, sigma * mu);
      const double bkt =
          -tau_ * kappa_ - da.dtau * da.dkappa + sigma * mu;
      const double rs = 1.0 - sigma;
      Dir d = direction(-rs * rx, -rs * ry, -rs * rz, -rs * rt, bs, bkt, v3,
                        den);

      double a_max = std::min(
          {max_step(C_, s_, d.ds), max_step(C_, z_, d.dz),
           d.dtau < 0.0 ? -tau_ / d.dtau : kInfStep,
           d.dkappa < 0.0 ? -kappa_ / d.dkappa : kInfStep});
      const double alpha = std::min(1.0, 0.99 * a_max);
      if (!(alpha > 1e-10)) {
        rep.message = "numerical breakdown: step length collapsed";
        break;
      }

      if (opt_.trace) {
        *opt_.trace << "it " << iter_ << " mu " << mu << " tau " << tau_
                    << " kappa " << kappa_ << " sigma " << sigma << " alpha "
                    << alpha << "\n";
      }

      x_ += alpha * d.dx;
      y_ += alpha * d.dy;
      z_ += alpha * d.dz;
      s_ += alpha * d.ds;
      tau_ += alpha * d.dtau;
      kappa_ += alpha * d.dkappa;
    }
    if (rep.message.empty()) rep.message = "iteration limit reached";
    return finish(rep, SolveStatus::max_iter);
  }

 private:
  struct Dir {
    Eigen::VectorXd dx, dy, dz, ds;
    double dtau = 0.0, dkappa = 0.0;
  };

  static double max_abs(const Eigen::SparseMatrix<double>& M) {
    double v = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it)
        v = std::max(v, std::abs(it.value()));
    return v;
  }

  void assemble() {
    std::vector<Eigen::Triplet<double>> T;
    T.reserve(static_cast<size_t>(2 * st_.A.nonZeros() +
                                  2 * st_.G.nonZeros() + dim_ + m_ * 4));
    for (int i = 0; i < n_; ++i) T.emplace_back(i, i, delta_);
    for (int k = 0; k < st_.A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st_.A, k); it; ++it) {
        T.emplace_back(n_ + static_cast<int>(it.row()),
                       static_cast<int>(it.col()), it.value());
        T.emplace_back(static_cast<int>(it.col()),
                       n_ + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < p_; ++i) T.emplace_back(n_ + i, n_ + i, -delta_);
    for (int k = 0; k < st_.G.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(st_.G, k); it; ++it) {
        T.emplace_back(n_ + p_ + static_cast<int>(it.row()),
                       static_cast<int>(it.col()), it.value());
        T.emplace_back(static_cast<int>(it.col()),
                       n_ + p_ + static_cast<int>(it.row()), it.value());
      }
    const int zb = n_ + p_;
    for (int i = 0; i < C_.l; ++i)
      T.emplace_back(zb + i, zb + i, -sc_.w2[i] - delta_);
    for (size_t j = 0; j < C_.soc_dim.size(); ++j) {
      const int q = C_.soc_dim[j];
      const int off = C_.soc_off[j];
      const auto& wb = sc_.soc[j].wbar;
      const double eta2 = sc_.soc[j].eta2;
      for (int a = 0; a < q; ++a)
        for (int bcol = 0; bcol < q; ++bcol) {
          const double jab = (a == bcol) ? (a == 0 ? 1.0 : -1.0) : 0.0;
          const double w2v = eta2 * (2.0 * wb[a] * wb[bcol] - jab);
          T.emplace_back(zb + off + a, zb + off + bcol,
                         -w2v - (a == bcol ? delta_ : 0.0));
        }
    }
    K_.resize(dim_, dim_);
    K_.setFromTriplets(T.begin(), T.end());
  }

  bool factor(SolveReport& rep) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      assemble();
      if (!pattern_done_) {
        ldlt_.analyzePattern(K_);
        pattern_done_ = true;
      }
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) return true;
      delta_ *= 100.0;
    }
    rep.message = "numerical breakdown: KKT factorization failed";
    return false;
  }

  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) {
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    for (int round = 0; round < 3; ++round) {
      const Eigen::VectorXd resid =
          rhs - (K_ * sol - delta_ * regsign_.cwiseProduct(sol));
      if (round == 2 && resid.norm() <= 1e-12 * (1.0 + rhs.norm())) break;
      sol += ldlt_.solve(resid);
    }
    return sol;
  }

  Dir direction(const Eigen::VectorXd& rqx, const Eigen::VectorXd& rqy,
                const Eigen::VectorXd& rqz, double rqt,
                const Eigen::VectorXd& bs, double bkt,
                const Eigen::VectorXd& v3, double den) {
    const Eigen::VectorXd wls =
        apply_w(C_, sc_, jordan_solve(C_, sc_.lambda, bs));
    Eigen::VectorXd rhs(dim_);
    rhs << rqx, rqy, rqz - wls;
    const Eigen::VectorXd u = kkt_solve(rhs);
    const double num = rqt - bkt / tau_ -
                       (st_.c.dot(u.head(n_)) + st_.b.dot(u.segment(n_, p_)) +
                        st_.h.dot(u.tail(m_)));
    Dir d;
    d.dtau = num / den;
    d.dx = u.head(n_) + d.dtau * v3.head(n_);
    d.dy = u.segment(n_, p_) + d.dtau * v3.segment(n_, p_);
    d.dz = u.tail(m_) + d.dtau * v3.tail(m_);
    d.ds = wls - apply_w(C_, sc_, apply_w(C_, sc_, d.dz));
    d.dkappa = (bkt - kappa_ * d.dtau) / tau_;
    return d;
  }

  bool initialize(SolveReport& rep) {
    sc_ = Scaling::identity(C_);
    if (!factor(rep)) return false;
    Eigen::VectorXd r1(dim_);
    r1 << Eigen::VectorXd::Zero(n_), st_.b, st_.h;
    const Eigen::VectorXd sol1 = kkt_solve(r1);
    x_ = sol1.head(n_);
    s_ = -sol1.tail(m_);
    Eigen::VectorXd r2(dim_);
    r2 << -st_.c, Eigen::VectorXd::Zero(p_ + m_);
    const Eigen::VectorXd sol2 = kkt_solve(r2);
    y_ = sol2.segment(n_, p_);
    z_ = sol2.tail(m_);
    if (m_ > 0) {
      const double ms = cone_margin(C_, s_);
      if (ms <= 1e-10) add_unit(C_, s_, 1.0 - ms);
      const double mz = cone_margin(C_, z_);
      if (mz <= 1e-10) add_unit(C_, z_, 1.0 - mz);
    }
    tau_ = 1.0;
    kappa_ = 1.0;
    return true;
  }

  void record_objective(SolveReport& rep) const {
    const double pobj = st_.c.dot(x_) / tau_ + st_.c0;
    const double best = rep.best_objective_trace.empty()
                            ? pobj
                            : std::min(rep.best_objective_trace.back(), pobj);
    rep.best_objective_trace.push_back(best);
  }

  bool check_optimal(SolveReport& rep) const {
    const Eigen::VectorXd xh = x_ / tau_;
    const Eigen::VectorXd yh = y_ / tau_;
    const Eigen::VectorXd zh = z_ / tau_;
    const Eigen::VectorXd sh = s_ / tau_;
    const double presA =
        p_ ? (st_.A * xh - st_.b).norm() / (1.0 + st_.b.norm()) : 0.0;
    const double presG =
        m_ ? (st_.G * xh + sh - st_.h).norm() / (1.0 + st_.h.norm()) : 0.0;
    const double dres =
        (st_.A.transpose() * yh + st_.G.transpose() * zh + st_.c).norm() /
        (1.0 + st_.c.norm());
    const double gap = m_ ? sh.dot(zh) : 0.0;
    if (std::max(presA, presG) <= opt_.tol && dres <= opt_.tol &&
        gap <= opt_.tol) {
      rep.primal = xh;
      rep.dual.resize(p_ + m_);
      rep.dual << yh, zh;
      rep.slack = sh;
      rep.gap = std::max(gap, 0.0);
      rep.primal_objective = st_.c.dot(xh) + st_.c0;
      rep.dual_objective = rep.primal_objective - rep.gap;
      rep.message = "optimal";
      return true;
    }
    return false;
  }

  bool check_primal_infeasible(SolveReport& rep) const {
    const double gp = -(st_.b.dot(y_) + st_.h.dot(z_));
    if (!(gp > 0.0)) return false;
    const double resid =
        (st_.A.transpose() * y_ + st_.G.transpose() * z_).norm();
    if (resid > opt_.tol * dscale_ * gp) return false;
    rep.dual.resize(p_ + m_);
    rep.dual << y_ / gp, z_ / gp;
    rep.primal = Eigen::VectorXd::Zero(n_);
    rep.slack = Eigen::VectorXd::Zero(m_);
    rep.gap = 0.0;
    rep.primal_objective = std::numeric_limits<double>::infinity();
    rep.dual_objective = std::numeric_limits<double>::infinity();
    rep.message =
        "infeasible: dual witness with b'y + h'z = -1, ||A'y + G'z|| = " +
        std::to_string(resid / gp);
    return true;
  }

  bool check_dual_infeasible(SolveReport& rep) const {
    const double gd = -st_.c.dot(x_);
    if (!(gd > 0.0)) return false;
    const double ra = p_ ? (st_.A * x_).norm() : 0.0;
    const double rg = m_ ? (st_.G * x_ + s_).norm() : 0.0;
    if (std::max(ra, rg) > opt_.tol * dscale_ * gd) return false;
    rep.primal = x_ / gd;
    rep.slack = s_ / gd;
    rep.dual = Eigen::VectorXd::Zero(p_ + m_);
    rep.gap = 0.0;
    rep.primal_objective = -std::numeric_limits<double>::infinity();
    rep.dual_objective = -std::numeric_limits<double>::infinity();
    rep.message = "unbounded: improving ray with c'x = -1";
    return true;
  }

  SolveReport finish(SolveReport& rep, SolveStatus status) {
    rep.status = status;
    rep.iterations = iter_;
    if (status == SolveStatus::max_iter && tau_ > 0.0) {
      rep.primal = x_ / tau_;
      rep.dual.resize(p_ + m_);
      rep.dual << y_ / tau_, z_ / tau_;
      rep.slack = s_ / tau_;
      rep.gap = m_ ? std::max(rep.slack.dot(rep.dual.tail(m_)), 0.0) : 0.0;
      rep.primal_objective = st_.c.dot(rep.primal) + st_.c0;
      rep.dual_objective = rep.primal_objective - rep.gap;
      if (rep.message.empty()) rep.message = "iteration limit reached";
    }
    return rep;
  }

  ConeProgram::Standard st_;
  SolveOptions opt_;
  int n_ = 0, p_ = 0, m_ = 0, dim_ = 0;
  Cones C_;
  double dscale_ = 1.0;
  double delta_ = 1e-8;
  Eigen::VectorXd regsign_;
  Eigen::SparseMatrix<double> K_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool pattern_done_ = false;
  int iter_ = 0;
  Eigen::VectorXd x_, y_, z_, s_;
  double tau_ = 1.0, kappa_ = 1.0;
  Scaling sc_;
};

}  // namespace detail

inline SolveReport solve(const ConeProgram::Standard& st,
                         SolveOptions opt = {}) {
  detail::HsdIpm ipm(st, opt);
  return ipm.run();
}

inline SolveReport solve(const ConeProgram& prog, SolveOptions opt = {}) {
  return solve(prog.compile(), opt);
}

}  // namespace bsr::optim
