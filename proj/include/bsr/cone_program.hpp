#pragma once

// Conic modeling layer: free variables, linear equalities/inequalities, and
// second-order-cone memberships, each carrying a diagnostic tag. Epigraph
// helpers let callers state norm objectives/constraints directly; compile()
// lowers everything to the standard form
//   min c'x  s.t.  A x = b,  G x + s = h,  s in K = R+^l x SOC(q_1) x ...

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "block_model.hpp"

namespace bsr::optim {

struct LinTerm {
  int var;
  double coef;
};

class LinExpr {
 public:
  LinExpr() = default;
  LinExpr(double c) : constant_(c) {}  // NOLINT: implicit constants are handy

  static LinExpr variable(int i, double coef = 1.0) {
    LinExpr e;
    e.add(i, coef);
    return e;
  }

  LinExpr& add(int var, double coef) {
    if (coef != 0.0) terms_.push_back({var, coef});
    return *this;
  }
  LinExpr& add(const LinExpr& o, double scale = 1.0) {
    for (const auto& t : o.terms_) add(t.var, scale * t.coef);
    constant_ += scale * o.constant_;
    return *this;
  }
  LinExpr& add_constant(double c) {
    constant_ += c;
    return *this;
  }
  LinExpr negated() const {
    LinExpr e;
    e.add(*this, -1.0);
    return e;
  }

  const std::vector<LinTerm>& terms() const { return terms_; }
  double constant() const { return constant_; }

 private:
  std::vector<LinTerm> terms_;
  double constant_ = 0.0;
};

// row . x[base..base+len) + constant
inline LinExpr dot(const Eigen::RowVectorXd& row, int base,
                   double constant = 0.0) {
  LinExpr e(constant);
  for (Eigen::Index j = 0; j < row.size(); ++j)
    e.add(base + static_cast<int>(j), row[j]);
  return e;
}

class ConeProgram {
 public:
  struct Row {
    LinExpr expr;
    double rhs;
    std::string tag;
  };
  struct Soc {
    LinExpr t;
    std::vector<LinExpr> u;
    std::string tag;
  };

  int add_vars(int count) {
    const int base = nvars_;
    nvars_ += count;
    return base;
  }
  int add_var() { return add_vars(1); }
  int num_vars() const { return nvars_; }

  void minimize(LinExpr objective) { objective_ = std::move(objective); }
  const LinExpr& objective() const { return objective_; }

  void add_eq(LinExpr e, double rhs, std::string tag) {
    eqs_.push_back({std::move(e), rhs, std::move(tag)});
  }
  // e <= rhs
  void add_le(LinExpr e, double rhs, std::string tag) {
    les_.push_back({std::move(e), rhs, std::move(tag)});
  }
  // e >= rhs
  void add_ge(const LinExpr& e, double rhs, std::string tag) {
    add_le(e.negated(), -rhs, std::move(tag));
  }
  // ||u||_2 <= t
  void add_soc(LinExpr t, std::vector<LinExpr> u, std::string tag) {
    socs_.push_back({std::move(t), std::move(u), std::move(tag)});
  }

  // Fresh variable a with a >= |e|.
  int abs_epigraph(const LinExpr& e, const std::string& tag) {
    const int a = add_var();
    add_le(LinExpr(e).add(a, -1.0), 0.0, tag + "/abs+");
    add_le(e.negated().add(a, -1.0), 0.0, tag + "/abs-");
    return a;
  }

  // Expression E with E >= ||exprs||_r enforced; E is tight at optimum when
  // minimized against.
  LinExpr block_norm_epigraph(const std::vector<LinExpr>& exprs, BlockNorm r,
                              const std::string& tag) {
    switch (r) {
      case BlockNorm::l1: {
        LinExpr sum;
        for (size_t i = 0; i < exprs.size(); ++i)
          sum.add(abs_epigraph(exprs[i], tag + "[" + std::to_string(i) + "]"),
                  1.0);
        return sum;
      }
      case BlockNorm::linf: {
        const int a = add_var();
        for (size_t i = 0; i < exprs.size(); ++i) {
          const std::string t = tag + "[" + std::to_string(i) + "]";
          add_le(LinExpr(exprs[i]).add(a, -1.0), 0.0, t + "/max+");
          add_le(exprs[i].negated().add(a, -1.0), 0.0, t + "/max-");
        }
        return LinExpr::variable(a);
      }
      case BlockNorm::l2: {
        const int a = add_var();
        add_soc(LinExpr::variable(a), exprs, tag + "/soc");
        return LinExpr::variable(a);
      }
    }
    throw std::logic_error("unreachable block norm");
  }

  // ||exprs||_r <= bound (bound may involve variables).
  void bound_block_norm(const std::vector<LinExpr>& exprs, BlockNorm r,
                        const LinExpr& bound, const std::string& tag) {
    switch (r) {
      case BlockNorm::l1: {
        LinExpr sum;
        for (size_t i = 0; i < exprs.size(); ++i)
          sum.add(abs_epigraph(exprs[i], tag + "[" + std::to_string(i) + "]"),
                  1.0);
        add_le(sum.add(bound, -1.0), 0.0, tag + "/l1");
        return;
      }
      case BlockNorm::linf: {
        for (size_t i = 0; i < exprs.size(); ++i) {
          const std::string t = tag + "[" + std::to_string(i) + "]";
          add_le(LinExpr(exprs[i]).add(bound, -1.0), 0.0, t + "/le+");
          add_le(exprs[i].negated().add(bound, -1.0), 0.0, t + "/le-");
        }
        return;
      }
      case BlockNorm::l2:
        add_soc(bound, exprs, tag + "/soc");
        return;
    }
  }

  const std::vector<Row>& equalities() const { return eqs_; }
  const std::vector<Row>& inequalities() const { return les_; }
  const std::vector<Soc>& soc_constraints() const { return socs_; }

  struct Standard {
    Eigen::VectorXd c;
    double c0 = 0.0;
    Eigen::SparseMatrix<double> A;  // p x n
    Eigen::VectorXd b;
    Eigen::SparseMatrix<double> G;  // m x n  (orthant rows first, then cones)
    Eigen::VectorXd h;
    int orthant = 0;
    std::vector<int> soc_dims;
  };

  Standard compile() const {
    Standard st;
    st.c = Eigen::VectorXd::Zero(nvars_);
    for (const auto& t : objective_.terms()) {
      check_var(t.var);
      st.c[t.var] += t.coef;
    }
    st.c0 = objective_.constant();

    std::vector<Eigen::Triplet<double>> ta;
    st.b = Eigen::VectorXd::Zero(static_cast<int>(eqs_.size()));
    for (size_t i = 0; i < eqs_.size(); ++i) {
      for (const auto& t : eqs_[i].expr.terms()) {
        check_var(t.var);
        ta.emplace_back(static_cast<int>(i), t.var, t.coef);
      }
      st.b[static_cast<int>(i)] = eqs_[i].rhs - eqs_[i].expr.constant();
    }
    st.A.resize(static_cast<int>(eqs_.size()), nvars_);
    st.A.setFromTriplets(ta.begin(), ta.end());

    int m = static_cast<int>(les_.size());
    for (const auto& soc : socs_) m += 1 + static_cast<int>(soc.u.size());
    std::vector<Eigen::Triplet<double>> tg;
    st.h = Eigen::VectorXd::Zero(m);
    int row = 0;
    // e <= rhs  =>  e.coefs x + s = rhs - e.const, s >= 0
    for (const auto& le : les_) {
      for (const auto& t : le.expr.terms()) {
        check_var(t.var);
        tg.emplace_back(row, t.var, t.coef);
      }
      st.h[row] = le.rhs - le.expr.constant();
      ++row;
    }
    st.orthant = row;
    // (t, u) in SOC  =>  s = (t(x), u(x)):  -[t;u].coefs x + s = [t;u].const
    for (const auto& soc : socs_) {
      st.soc_dims.push_back(1 + static_cast<int>(soc.u.size()));
      for (const auto& t : soc.t.terms()) {
        check_var(t.var);
        tg.emplace_back(row, t.var, -t.coef);
      }
      st.h[row] = soc.t.constant();
      ++row;
      for (const auto& ue : soc.u) {
        for (const auto& t : ue.terms()) {
          check_var(t.var);
          tg.emplace_back(row, t.var, -t.coef);
        }
        st.h[row] = ue.constant();
        ++row;
      }
    }
    st.G.resize(m, nvars_);
    st.G.setFromTriplets(tg.begin(), tg.end());
    return st;
  }

  // Plain-text listing for cross-checking against external tools.
  void dump(std::ostream& os) const {
    os << "minimize " << format(objective_) << "\n";
    for (const auto& r : eqs_)
      os << "  " << format(r.expr) << " == " << r.rhs << "   # " << r.tag
         << "\n";
    for (const auto& r : les_)
      os << "  " << format(r.expr) << " <= " << r.rhs << "   # " << r.tag
         << "\n";
    for (const auto& s : socs_) {
      os << "  soc: ||(";
      for (size_t i = 0; i < s.u.size(); ++i)
        os << (i ? ", " : "") << format(s.u[i]);
      os << ")||_2 <= " << format(s.t) << "   # " << s.tag << "\n";
    }
  }

 private:
  void check_var(int v) const {
    if (v < 0 || v >= nvars_)
      throw std::invalid_argument("cone program references unknown variable");
  }
  static std::string format(const LinExpr& e) {
    std::string out;
    for (const auto& t : e.terms()) {
      if (!out.empty()) out += " + ";
      out += std::to_string(t.coef) + "*x" + std::to_string(t.var);
    }
    if (e.constant() != 0.0 || out.empty()) {
      if (!out.empty()) out += " + ";
      out += std::to_string(e.constant());
    }
    return out;
  }

  int nvars_ = 0;
  LinExpr objective_;
  std::vector<Row> eqs_;
  std::vector<Row> les_;
  std::vector<Soc> socs_;
};

}  // namespace bsr::optim
