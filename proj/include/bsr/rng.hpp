#pragma once

// Counter-based random generation (Philox4x32-10). A draw depends only on
// (seed, stream, position), so substreams indexed by trial id reproduce
// bit-identically regardless of evaluation order.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gauss.hpp"

namespace bsr {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  // Independent generator under the same seed; safe to derive per trial.
  Rng substream(std::uint64_t id) const {
    return Rng(seed_, detail::splitmix64(stream_ ^ detail::splitmix64(id + 1)));
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on (0,1), both endpoints excluded.
  double uniform() {
    const std::uint64_t v = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(v) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF; reproducible across platforms.
  double normal() { return normal_quantile(uniform()); }

  // Uniform over {0,...,n-1}, modulo bias rejected.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t rem = (0 - un) % un;  // 2^64 mod n
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v > ~rem);
    return static_cast<int>(v % un);
  }

  // Random sign in {-1,+1}.
  double sign() { return (next_u32() & 1u) ? 1.0 : -1.0; }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Row-major fill so the draw order matches the serialized layout.
  Eigen::MatrixXd normal_matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  // Sorted k-subset of {0,...,n-1}, uniform over subsets.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n)
      throw std::invalid_argument("sample_without_replacement: need 0 <= k <= n");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  static std::uint32_t lo32(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
  static std::uint32_t hi32(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

  static void philox_round(std::array<std::uint32_t, 4>& x, std::uint32_t k0,
                           std::uint32_t k1) {
    const std::uint64_t m0 = 0xD2511F53ull * x[0];
    const std::uint64_t m1 = 0xCD9E8D57ull * x[2];
    x = {hi32(m1) ^ x[1] ^ k0, lo32(m1), hi32(m0) ^ x[3] ^ k1, lo32(m0)};
  }

  void refill() {
    std::array<std::uint32_t, 4> x = {lo32(ctr_), hi32(ctr_), lo32(stream_),
                                      hi32(stream_)};
    std::uint32_t k0 = lo32(seed_);
    std::uint32_t k1 = hi32(seed_);
    for (int r = 0; r < 10; ++r) {
      philox_round(x, k0, k1);
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_ = x;
    pos_ = 0;
    ++ctr_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t ctr_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace bsr
