#pragma once

// Subgradient descent for nonsmooth convex objectives, tracking the best
// point seen. Used where the objective (e.g. a largest singular value) has
// no tractable conic reformulation.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace bsr::optim {

// Returns f(x) and writes one subgradient into g (resized by the oracle).
using SubgradientOracle =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct SubgradientResult {
  Eigen::VectorXd x_best;
  double f_best = std::numeric_limits<double>::infinity();
  std::vector<double> best_trace;  // running best, nonincreasing
  int iterations = 0;
};

// step(k) gives the step length for iteration k = 1, 2, ...; when omitted a
// diminishing schedule a0 / sqrt(k) is used with a0 set from the initial
// objective and subgradient so the first step is of Polyak size.
inline SubgradientResult subgradient_minimize(
    const SubgradientOracle& oracle, Eigen::VectorXd x0,
    std::function<double(int)> step = {}, int max_iter = 5000) {
  SubgradientResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g;
  double a0 = 1.0;
  for (int k = 1; k <= max_iter; ++k) {
    const double f = oracle(x, g);
    if (f < res.f_best) {
      res.f_best = f;
      res.x_best = x;
    }
    res.best_trace.push_back(res.f_best);
    res.iterations = k;
    const double gnorm = g.norm();
    if (gnorm == 0.0) break;  // stationary for convex f
    if (k == 1) a0 = std::max(std::abs(f), 1e-6) / std::max(gnorm * gnorm, 1e-12);
    const double a = step ? step(k) : a0 / std::sqrt(static_cast<double>(k));
    x -= a * g;
  }
  return res;
}

}  // namespace bsr::optim
