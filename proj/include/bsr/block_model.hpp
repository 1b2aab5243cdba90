#pragma once

// Representation structures (B, block partition, per-block norms) and the
// norms built on them: block magnitudes, L_p, L_{s,p}, plain-vector top-s
// norms, and induced block operator norms.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsr {

enum class BlockNorm { l1, l2, linf };

inline const char* to_string(BlockNorm r) {
  switch (r) {
    case BlockNorm::l1: return "l1";
    case BlockNorm::l2: return "l2";
    case BlockNorm::linf: return "linf";
  }
  return "?";
}

inline BlockNorm block_norm_from_string(const std::string& s) {
  if (s == "l1" || s == "1") return BlockNorm::l1;
  if (s == "l2" || s == "2") return BlockNorm::l2;
  if (s == "linf" || s == "inf") return BlockNorm::linf;
  throw std::invalid_argument("unknown block norm: " + s);
}

// Exponent p in [1,inf]. Infinity is a distinguished state so norm code
// branches explicitly instead of comparing against a float sentinel.
class PExp {
 public:
  static PExp inf() {
    PExp p;
    p.inf_ = true;
    return p;
  }
  static PExp finite(double v) {
    if (!std::isfinite(v) || v < 1.0)
      throw std::invalid_argument("PExp: exponent must be finite and >= 1");
    PExp p;
    p.v_ = v;
    return p;
  }
  static PExp one() { return finite(1.0); }
  static PExp two() { return finite(2.0); }

  bool is_inf() const { return inf_; }
  double value() const {
    if (inf_) throw std::logic_error("PExp: value() called on infinity");
    return v_;
  }
  bool operator==(const PExp& o) const {
    return inf_ == o.inf_ && (inf_ || v_ == o.v_);
  }
  bool operator!=(const PExp& o) const { return !(*this == o); }
  // Total order with infinity as the maximum.
  bool operator<=(const PExp& o) const {
    if (inf_) return o.inf_;
    if (o.inf_) return true;
    return v_ <= o.v_;
  }

 private:
  bool inf_ = false;
  double v_ = 1.0;
};

// s^{1/p}; equals 1 at p = inf.
inline double pow_s_inv(double s, PExp p) {
  return p.is_inf() ? 1.0 : std::pow(s, 1.0 / p.value());
}

// s^{1/p - 1}; equals 1/s at p = inf.
inline double pow_s_inv_minus_one(double s, PExp p) {
  return p.is_inf() ? 1.0 / s : std::pow(s, 1.0 / p.value() - 1.0);
}

// ||v||_p of a plain vector. General p handled with rescaling for overflow
// safety.
inline double vector_norm(const Eigen::VectorXd& v, PExp p) {
  if (v.size() == 0) return 0.0;
  if (p.is_inf()) return v.cwiseAbs().maxCoeff();
  const double pv = p.value();
  if (pv == 1.0) return v.lpNorm<1>();
  if (pv == 2.0) return v.norm();
  const double mx = v.cwiseAbs().maxCoeff();
  if (mx == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    acc += std::pow(std::abs(v[i]) / mx, pv);
  return mx * std::pow(acc, 1.0 / pv);
}

inline double vector_norm(const Eigen::VectorXd& v, BlockNorm r) {
  if (v.size() == 0) return 0.0;
  switch (r) {
    case BlockNorm::l1: return v.lpNorm<1>();
    case BlockNorm::l2: return v.norm();
    case BlockNorm::linf: return v.cwiseAbs().maxCoeff();
  }
  return 0.0;
}

struct RepresentationStructure {
  Eigen::MatrixXd B;                   // N x n, full row rank
  std::vector<int> block_dims;         // n_k >= 1, sum = N
  std::vector<BlockNorm> block_norms;  // one per block
  std::vector<int> offsets;            // prefix sums, size K+1
  bool b_is_identity = false;

  int K() const { return static_cast<int>(block_dims.size()); }
  int N() const { return static_cast<int>(B.rows()); }
  int n() const { return static_cast<int>(B.cols()); }

  bool has_uniform_norm() const {
    return std::all_of(block_norms.begin(), block_norms.end(),
                       [&](BlockNorm r) { return r == block_norms.front(); });
  }
  BlockNorm uniform_norm() const {
    if (!has_uniform_norm())
      throw std::invalid_argument("structure has mixed block norms");
    return block_norms.front();
  }

  void finalize() {
    if (block_dims.empty()) throw std::invalid_argument("structure needs K >= 1");
    if (block_norms.size() != block_dims.size())
      throw std::invalid_argument("block_norms size must match block_dims");
    offsets.assign(1, 0);
    for (int d : block_dims) {
      if (d < 1) throw std::invalid_argument("every block dim must be >= 1");
      offsets.push_back(offsets.back() + d);
    }
    if (offsets.back() != B.rows())
      throw std::invalid_argument("sum of block dims must equal rows of B");
    b_is_identity = (B.rows() == B.cols()) && B.isIdentity(0.0);
  }

  // Rank check with the centralized 1e-10 tolerance (relative to the largest
  // pivot).
  bool b_full_row_rank(double tol = 1e-10) const {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B.transpose());
    qr.setThreshold(tol);
    return qr.rank() == B.rows();
  }

  static RepresentationStructure identity(std::vector<int> dims, BlockNorm r) {
    return identity(std::move(dims), {}, r);
  }
  static RepresentationStructure identity(std::vector<int> dims,
                                          std::vector<BlockNorm> norms,
                                          BlockNorm fill = BlockNorm::l2) {
    RepresentationStructure rs;
    const int N = std::accumulate(dims.begin(), dims.end(), 0);
    rs.B = Eigen::MatrixXd::Identity(N, N);
    rs.block_dims = std::move(dims);
    if (norms.empty()) norms.assign(rs.block_dims.size(), fill);
    rs.block_norms = std::move(norms);
    rs.finalize();
    return rs;
  }
  static RepresentationStructure uniform(int K, int d, BlockNorm r) {
    return identity(std::vector<int>(K, d), std::vector<BlockNorm>(K, r));
  }
  static RepresentationStructure with_matrix(Eigen::MatrixXd B,
                                             std::vector<int> dims,
                                             BlockNorm r) {
    RepresentationStructure rs;
    rs.B = std::move(B);
    rs.block_dims = std::move(dims);
    rs.block_norms.assign(rs.block_dims.size(), r);
    rs.finalize();
    return rs;
  }
};

inline void check_block_length(const RepresentationStructure& rs,
                               const Eigen::VectorXd& w) {
  if (w.size() != rs.N())
    throw std::invalid_argument("block vector length does not match structure");
}

// A vector in representation space bound to its structure; block(k) is a
// contiguous slice of length n_k.
struct BlockVector {
  Eigen::VectorXd data;
  const RepresentationStructure* structure = nullptr;

  BlockVector(Eigen::VectorXd d, const RepresentationStructure& rs)
      : data(std::move(d)), structure(&rs) {
    check_block_length(rs, data);
  }

  Eigen::VectorBlock<const Eigen::VectorXd> block(int k) const {
    return data.segment(structure->offsets.at(k), structure->block_dims.at(k));
  }
  Eigen::VectorBlock<Eigen::VectorXd> block(int k) {
    return data.segment(structure->offsets.at(k), structure->block_dims.at(k));
  }
};

// Magnitude vector: entry k is ||w[k]||_(k).
inline Eigen::VectorXd magnitudes(const RepresentationStructure& rs,
                                  const Eigen::VectorXd& w) {
  check_block_length(rs, w);
  Eigen::VectorXd m(rs.K());
  for (int k = 0; k < rs.K(); ++k)
    m[k] = vector_norm(w.segment(rs.offsets[k], rs.block_dims[k]),
                       rs.block_norms[k]);
  return m;
}

// Indices of the s largest entries of a nonnegative vector, ties broken by
// ascending index; result is sorted ascending.
inline std::vector<int> top_s_indices(const Eigen::VectorXd& mags, int s) {
  const int K = static_cast<int>(mags.size());
  if (s < 1 || s > K) throw std::invalid_argument("top_s_indices: s out of range");
  std::vector<int> idx(K);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return mags[a] > mags[b]; });
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// w^s: zero out all but the s largest-magnitude blocks.
inline Eigen::VectorXd project_top_s(const RepresentationStructure& rs,
                                     const Eigen::VectorXd& w, int s) {
  const Eigen::VectorXd mags = magnitudes(rs, w);
  const std::vector<int> keep = top_s_indices(mags, s);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rs.N());
  for (int k : keep)
    out.segment(rs.offsets[k], rs.block_dims[k]) =
        w.segment(rs.offsets[k], rs.block_dims[k]);
  return out;
}

inline double Lp(const RepresentationStructure& rs, const Eigen::VectorXd& w,
                 PExp p) {
  return vector_norm(magnitudes(rs, w), p);
}

// ||u||_{s,p} of a plain vector: the l_p norm of the s largest magnitudes.
inline double snorm(const Eigen::VectorXd& u, int s, PExp p) {
  const int K = static_cast<int>(u.size());
  if (s < 1 || s > K) throw std::invalid_argument("snorm: s out of range");
  Eigen::VectorXd a = u.cwiseAbs();
  std::sort(a.data(), a.data() + K, std::greater<double>());
  return vector_norm(a.head(s), p);
}

inline double Lsp(const RepresentationStructure& rs, const Eigen::VectorXd& w,
                  int s, PExp p) {
  if (s < 1 || s > rs.K()) throw std::invalid_argument("Lsp: s out of range");
  return snorm(magnitudes(rs, w), s, p);
}

inline Eigen::VectorXd magnitudes(const BlockVector& w) {
  return magnitudes(*w.structure, w.data);
}
inline BlockVector project_top_s(const BlockVector& w, int s) {
  return {project_top_s(*w.structure, w.data, s), *w.structure};
}
inline double Lp(const BlockVector& w, PExp p) {
  return Lp(*w.structure, w.data, p);
}
inline double Lsp(const BlockVector& w, int s, PExp p) {
  return Lsp(*w.structure, w.data, s, p);
}

// s-block concentration: upsilon_s(w) = L1(w) - L_{s,1}(w) >= 0.
inline double concentration(const RepresentationStructure& rs,
                            const Eigen::VectorXd& w, int s) {
  const Eigen::VectorXd m = magnitudes(rs, w);
  return m.sum() - snorm(m, s, PExp::one());
}

struct IntractableNormError : std::invalid_argument {
  explicit IntractableNormError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Induced norm ||M||_{r,theta} = max{||Mu||_theta : ||u||_r <= 1} for the
// tractable pairs: r=1 (max column theta-norm), theta=inf (max row
// conjugate-norm), and (2,2) (largest singular value).
inline double operator_norm(const Eigen::MatrixXd& M, BlockNorm r,
                            BlockNorm theta) {
  if (M.size() == 0) return 0.0;
  if (r == BlockNorm::l1) {
    double best = 0.0;
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const Eigen::VectorXd col = M.col(j);
      best = std::max(best, vector_norm(col, theta));
    }
    return best;
  }
  if (theta == BlockNorm::linf) {
    const BlockNorm conj = (r == BlockNorm::l2) ? BlockNorm::l2 : BlockNorm::l1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      const Eigen::VectorXd row = M.row(i).transpose();
      best = std::max(best, vector_norm(row, conj));
    }
    return best;
  }
  if (r == BlockNorm::l2 && theta == BlockNorm::l2) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues()[0];
  }
  throw IntractableNormError(
      std::string("operator_norm: intractable pair (") + to_string(r) + "," +
      to_string(theta) + ")");
}

}  // namespace bsr
