#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>

#include "minaction/rng.hpp"

namespace minaction {

// Time series of 2-d positions sampled at a fixed cadence; row j is time j*dt.
using Series2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

inline void check_stencil_args(Eigen::Index n, int stride, double dt) {
  if (stride < 1) throw std::invalid_argument("stencil stride must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("stencil dt must be positive");
  if (n < 2 * stride + 1)
    throw std::invalid_argument("series too short for stencil stride");
}

// Second difference at stride s: (r[j+s] - 2 r[j] + r[j-s]) / (s dt)^2.
// Output row i corresponds to input index j = i + stride.
inline Series2 wide_accel(const Series2& pos, int stride, double dt) {
  check_stencil_args(pos.rows(), stride, dt);
  const Eigen::Index n = pos.rows() - 2 * stride;
  const double inv_h2 = 1.0 / ((stride * dt) * (stride * dt));
  Series2 out(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = i + stride;
    out.row(i) = (pos.row(j + stride) - 2.0 * pos.row(j) + pos.row(j - stride)) * inv_h2;
  }
  return out;
}

// Central difference at stride s: (r[j+s] - r[j-s]) / (2 s dt).
inline Series2 wide_velocity(const Series2& pos, int stride, double dt) {
  check_stencil_args(pos.rows(), stride, dt);
  const Eigen::Index n = pos.rows() - 2 * stride;
  const double inv_2h = 1.0 / (2.0 * stride * dt);
  Series2 out(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = i + stride;
    out.row(i) = (pos.row(j + stride) - pos.row(j - stride)) * inv_2h;
  }
  return out;
}

// Standard deviation per coordinate of the second-difference estimator when
// each position carries i.i.d. Gaussian noise sigma_pos: sqrt(6) sigma / (s dt)^2.
inline double accel_noise_sigma(double sigma_pos, int stride, double dt) {
  const double h2 = (stride * dt) * (stride * dt);
  return std::sqrt(6.0) * sigma_pos / h2;
}

// Same for the central-difference velocity: sqrt(2) sigma / (2 s dt).
inline double velocity_noise_sigma(double sigma_pos, int stride, double dt) {
  return std::sqrt(2.0) * sigma_pos / (2.0 * stride * dt);
}

struct NoiseCheck {
  double analytic = 0.0;
  double empirical = 0.0;
};

// Monte Carlo check of accel_noise_sigma: a stationary point observed with
// pure position noise leaves only estimator noise in wide_accel.
inline NoiseCheck verify_accel_noise(double sigma_pos, int stride, double dt,
                                     int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  Rng rng(seed);
  Series2 pos(n_samples + 2 * stride, 2);
  for (Eigen::Index j = 0; j < pos.rows(); ++j) {
    pos(j, 0) = rng.normal(0.0, sigma_pos);
    pos(j, 1) = rng.normal(0.0, sigma_pos);
  }
  const Series2 acc = wide_accel(pos, stride, dt);
  NoiseCheck out;
  out.analytic = accel_noise_sigma(sigma_pos, stride, dt);
  out.empirical = std::sqrt(acc.array().square().mean());
  return out;
}

}  // namespace minaction
