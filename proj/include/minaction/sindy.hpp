#pragma once

#include <cstdint>

#include "minaction/basis.hpp"
#include "minaction/orbit.hpp"

namespace minaction {

struct StlsqResult {
  Eigen::VectorXd coefficients;
  int iterations = 0;
};

// Sequentially thresholded least squares: fit on the active set, zero every
// coefficient below threshold, repeat until the active set is stable. The
// ridge term only conditions the normal equations.
StlsqResult stlsq(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                  double threshold, double ridge = 1e-12);

// Regression design over the training orbits: rows are stencil midpoints of
// the noisy positions, columns the basis functions of the radius, and the
// target is the radial projection of the wide-stencil acceleration with the
// attractive sign convention (target = -a_hat . r_hat).
void sindy_design(const Dataset& data, const BasisLibrary& lib, int stride,
                  Eigen::MatrixXd& features, Eigen::VectorXd& targets);

struct SindyFit {
  Eigen::VectorXd coefficients;
  int identified = -1;  // largest-magnitude surviving term, -1 if none survive
  long n_points = 0;
};

SindyFit sindy_fit(const Dataset& data, const BasisLibrary& lib, int stride,
                   double threshold);

// Bootstrap over training orbits with coefficient-wise median aggregation and
// a final re-threshold.
SindyFit sindy_ensemble(const Dataset& data, const BasisLibrary& lib, int stride,
                        double threshold, int n_boot, std::uint64_t seed);

}  // namespace minaction
