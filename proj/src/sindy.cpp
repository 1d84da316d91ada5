#include "minaction/sindy.hpp"

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

#include "minaction/rng.hpp"
#include "minaction/stencil.hpp"

namespace minaction {

namespace {

Eigen::VectorXd solve_active(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                             const std::vector<int>& active, double ridge) {
  const int m = static_cast<int>(active.size());
  Eigen::MatrixXd sub(features.rows(), m);
  for (int c = 0; c < m; ++c) sub.col(c) = features.col(active[c]);
  Eigen::MatrixXd gram = sub.transpose() * sub;
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(sub.transpose() * targets);
}

void append_orbit_rows(const Trajectory& tr, const BasisLibrary& lib, int stride,
                       Eigen::MatrixXd& features, Eigen::VectorXd& targets, long& row) {
  const Series2 accel = wide_accel(tr.noisy_pos, stride, tr.dt());
  for (long i = 0; i < accel.rows(); ++i) {
    const long j = i + stride;
    const Eigen::Vector2d pos = tr.noisy_pos.row(j);
    const double r = pos.norm();
    if (r <= 0.0) continue;
    for (int c = 0; c < static_cast<int>(lib.size()); ++c)
      features(row, c) = basis_value(lib.terms[c], r);
    const Eigen::Vector2d a = accel.row(i);
    targets(row) = -a.dot(pos) / r;
    ++row;
  }
}

long stencil_rows(std::span<const Trajectory> orbits, int stride) {
  long rows = 0;
  for (const Trajectory& tr : orbits) rows += std::max<long>(0, tr.n() - 2 * stride);
  return rows;
}

void build_design(std::span<const Trajectory> orbits, const BasisLibrary& lib, int stride,
                  Eigen::MatrixXd& features, Eigen::VectorXd& targets) {
  const long rows = stencil_rows(orbits, stride);
  if (rows == 0) throw std::invalid_argument("no stencil midpoints: orbits too short for stride");
  features.resize(rows, static_cast<long>(lib.size()));
  targets.resize(rows);
  long row = 0;
  for (const Trajectory& tr : orbits) append_orbit_rows(tr, lib, stride, features, targets, row);
  features.conservativeResize(row, Eigen::NoChange);
  targets.conservativeResize(row);
}

int largest_term(const Eigen::VectorXd& xi) {
  int best = -1;
  double mag = 0.0;
  for (int i = 0; i < xi.size(); ++i) {
    if (xi[i] != 0.0 && std::abs(xi[i]) > mag) {
      mag = std::abs(xi[i]);
      best = i;
    }
  }
  return best;
}

}  // namespace

StlsqResult stlsq(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                  double threshold, double ridge) {
  if (features.rows() != targets.size())
    throw std::invalid_argument("stlsq: row count mismatch between features and targets");
  if (features.rows() < 1) throw std::invalid_argument("stlsq: empty design");
  if (threshold < 0.0) throw std::invalid_argument("stlsq: threshold must be >= 0");

  const int k = static_cast<int>(features.cols());
  std::vector<int> active(k);
  for (int i = 0; i < k; ++i) active[i] = i;

  StlsqResult out;
  out.coefficients = Eigen::VectorXd::Zero(k);
  while (true) {
    ++out.iterations;
    out.coefficients.setZero();
    if (!active.empty()) {
      const Eigen::VectorXd xi = solve_active(features, targets, active, ridge);
      for (int c = 0; c < static_cast<int>(active.size()); ++c)
        out.coefficients[active[c]] = xi[c];
    }
    std::vector<int> next;
    for (int i : active)
      if (std::abs(out.coefficients[i]) >= threshold) next.push_back(i);
    for (int i = 0; i < k; ++i)
      if (std::abs(out.coefficients[i]) < threshold) out.coefficients[i] = 0.0;
    if (next == active) return out;
    active = std::move(next);
  }
}

void sindy_design(const Dataset& data, const BasisLibrary& lib, int stride,
                  Eigen::MatrixXd& features, Eigen::VectorXd& targets) {
  if (stride < 1) throw std::invalid_argument("sindy_design: stride must be >= 1");
  build_design(data.train(), lib, stride, features, targets);
}

SindyFit sindy_fit(const Dataset& data, const BasisLibrary& lib, int stride, double threshold) {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  sindy_design(data, lib, stride, features, targets);
  SindyFit fit;
  fit.coefficients = stlsq(features, targets, threshold).coefficients;
  fit.identified = largest_term(fit.coefficients);
  fit.n_points = features.rows();
  return fit;
}

SindyFit sindy_ensemble(const Dataset& data, const BasisLibrary& lib, int stride,
                        double threshold, int n_boot, std::uint64_t seed) {
  if (n_boot < 1) throw std::invalid_argument("sindy_ensemble: n_boot must be >= 1");
  const std::span<const Trajectory> train = data.train();
  const int n = static_cast<int>(train.size());
  if (n < 1) throw std::invalid_argument("sindy_ensemble: no training orbits");

  const int k = static_cast<int>(lib.size());
  Eigen::MatrixXd draws(n_boot, k);
  Rng rng(seed);
  std::vector<Trajectory> sample;
  for (int b = 0; b < n_boot; ++b) {
    sample.clear();
    for (int i = 0; i < n; ++i) {
      const int pick = std::min<int>(n - 1, static_cast<int>(rng.uniform() * n));
      sample.push_back(train[pick]);
    }
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
    build_design(sample, lib, stride, features, targets);
    draws.row(b) = stlsq(features, targets, threshold).coefficients;
  }

  SindyFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(k);
  std::vector<double> column(n_boot);
  for (int c = 0; c < k; ++c) {
    for (int b = 0; b < n_boot; ++b) column[b] = draws(b, c);
    std::sort(column.begin(), column.end());
    const double median = (n_boot % 2 == 1)
                              ? column[n_boot / 2]
                              : 0.5 * (column[n_boot / 2 - 1] + column[n_boot / 2]);
    fit.coefficients[c] = std::abs(median) >= threshold ? median : 0.0;
  }
  fit.identified = largest_term(fit.coefficients);
  fit.n_points = stencil_rows(train, stride);
  return fit;
}

}  // namespace minaction
