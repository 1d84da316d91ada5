#pragma once

#include <utility>

#include "minaction/dual.hpp"
#include "minaction/basis.hpp"

namespace minaction {

// Flat parameter layout used by the optimizer and all gradient checks:
// logits first, then coefficients.
inline Eigen::VectorXd pack_params(const Eigen::VectorXd& logits,
                                   const Eigen::VectorXd& thetas) {
  Eigen::VectorXd x(logits.size() + thetas.size());
  x << logits, thetas;
  return x;
}

inline void unpack_params(const Eigen::VectorXd& x, Eigen::Index k,
                          Eigen::VectorXd& logits, Eigen::VectorXd& thetas) {
  if (x.size() != 2 * k) throw std::invalid_argument("parameter vector size");
  logits = x.head(k);
  thetas = x.tail(k);
}

// Single forward sweep: every coordinate of x gets its own derivative lane.
template <class F>
std::pair<double, Eigen::VectorXd> value_and_grad(F&& f, const Eigen::VectorXd& x) {
  if (x.size() > kGradLanes)
    throw std::invalid_argument("too many parameters for gradient lanes");
  VecX<Dual> xd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    xd[i] = Dual(x[i], static_cast<int>(i));
  const Dual y = f(xd);
  return {y.value, y.grad.head(x.size())};
}

// Five-point central difference oracle.
template <class F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    p[i] = xi + 2.0 * h;
    const double f2p = f(p);
    p[i] = xi + h;
    const double f1p = f(p);
    p[i] = xi - h;
    const double f1m = f(p);
    p[i] = xi - 2.0 * h;
    const double f2m = f(p);
    p[i] = xi;
    g[i] = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double floor = 1e-8) {
  if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace minaction
