#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "seedsched/rng.hpp"

namespace seedsched {

// Online ridge regression via recursive least squares.
//
// With C_t = sum_i x_i x_i^T + lambda*I, the inverse is maintained by the
// rank-one Woodbury step
//   C_t^-1 = C_{t-1}^-1 - (C_{t-1}^-1 x x^T C_{t-1}^-1) / (1 + x^T C_{t-1}^-1 x)
// and the weights by
//   w_t = w_{t-1} + C_t^-1 x (y - x^T w_{t-1})
// using the updated inverse and the pre-update weights. Each update is O(d^2).
// Starting from w_0 = 0 this reproduces the batch ridge solution exactly.
class OnlineLinearModel {
 public:
  Eigen::VectorXd w;
  Eigen::MatrixXd c_inv;
  double lambda = 1.0;
  std::uint64_t t = 0;

  OnlineLinearModel() = default;

  // Weights drawn uniformly from [-0.5, 0.5]^d, C^-1 = (1/lambda) I.
  static OnlineLinearModel init(int d, double lambda, std::uint64_t rng_seed) {
    if (d <= 0) throw std::invalid_argument("dimension must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    OnlineLinearModel m;
    m.lambda = lambda;
    m.c_inv = Eigen::MatrixXd::Identity(d, d) / lambda;
    m.w.resize(d);
    Rng rng(splitmix64(rng_seed));
    for (int i = 0; i < d; ++i) m.w[i] = rng.uniform01() - 0.5;
    return m;
  }

  int dim() const { return static_cast<int>(w.size()); }
  bool initialized() const { return w.size() > 0; }

  void update(const Eigen::VectorXd& x, double y) {
    check_input(x);
    if (!std::isfinite(y)) throw std::invalid_argument("non-finite label");
    const Eigen::VectorXd v = c_inv * x;
    const double denom = 1.0 + x.dot(v);
    c_inv.noalias() -= (v * v.transpose()) / denom;
    c_inv = ((c_inv + c_inv.transpose()) * 0.5).eval();  // keep symmetric
    const double residual = y - x.dot(w);
    w.noalias() += (c_inv * x) * residual;
    ++t;
  }

  double predict(const Eigen::VectorXd& x) const {
    check_input(x);
    return x.dot(w);
  }

 private:
  void check_input(const Eigen::VectorXd& x) const {
    if (x.size() != w.size()) throw std::invalid_argument("dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("non-finite feature vector");
  }
};

}  // namespace seedsched
