#pragma once

#include <optional>
#include <span>

#include "minaction/basis.hpp"
#include "minaction/orbit.hpp"

namespace minaction {

// One-hot model after least-squares recalibration of the dominant term:
// f(r) = theta_opt * phi_dom(r).
struct CalibratedModel {
  BasisLibrary library;
  int dominant = 0;
  double theta_opt = 0.0;

  GatedForce<double> force(double r_floor = 1e-6) const {
    GatedForce<double> f;
    f.lib = &library;
    f.weights = Eigen::VectorXd::Zero(library.size());
    f.weights[dominant] = theta_opt;
    f.r_floor = r_floor;
    return f;
  }
};

struct CalibrationResult {
  int dominant = 0;
  double theta_opt = 0.0;
};

// Projects wide-stencil radial accelerations onto the dominant basis
// function over the training split, undoing the shrinkage left by the
// sparsity penalty. Requires a dominant gate (selectivity > 10).
CalibrationResult calibrate(const BasisModel& model,
                            std::span<const Trajectory> train_orbits,
                            int stride);

// First autocorrelation peak past min_lag, normalized per-lag by overlap
// count, with parabolic refinement. Throws if the signal is degenerate or no
// peak exists.
double estimate_period(const Eigen::VectorXd& signal, double dt,
                       Eigen::Index min_lag);

struct PowerLawFit {
  double p = 0.0;        // slope of ln T^2 on ln a
  double log_c = 0.0;    // intercept
  double r_squared = 1.0;
  double stderr_p = 0.0;  // OLS slope standard error; 0 with two points
  int n_orbits = 0;
};

// Rolls the calibrated model out from each test orbit's initial conditions
// for the observed time span, estimates periods by autocorrelation of the
// x coordinate, and fits ln T^2 against ln a.
PowerLawFit kepler_exponent(const CalibratedModel& model, const Dataset& data,
                            double dt_model);

enum class HamiltonianForm {
  Calibrated,  // H = v^2/2 + V_model(r) with the calibrated coefficient
  TrueLaw,     // H = v^2/2 + V of the generating law
};

struct ConservationReport {
  double sigma_h = 0.0;
  bool diverged = false;
  long n_samples = 0;
};

// Long-horizon rollout energy diagnostic: integrates the calibrated model
// from the given initial conditions for `periods` nominal periods and
// reports the standard deviation of H over every integrator state. On
// divergence (radius floor or escape) sigma_h covers the states reached.
ConservationReport conservation(const CalibratedModel& model,
                                const Eigen::Vector2d& r0,
                                const Eigen::Vector2d& v0, double duration,
                                double dt_model, HamiltonianForm form,
                                const ForceLaw& true_law);

struct GroupSelection {
  bool decided = false;
  int basis = -1;
  double margin = 0.0;  // runner-up group mean over winning group mean
  std::vector<std::pair<int, double>> group_means;  // basis index -> mean sigma_h
};

// Groups per-seed results by selected basis and picks the group with the
// smallest mean sigma_h.
GroupSelection select_by_conservation(
    const std::vector<std::pair<int, double>>& basis_and_sigma);

}  // namespace minaction
