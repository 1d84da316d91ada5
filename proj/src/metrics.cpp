#include "minaction/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "minaction/verlet.hpp"

namespace minaction {

CalibrationResult calibrate(const BasisModel& model,
                            std::span<const Trajectory> train_orbits,
                            int stride) {
  if (train_orbits.empty()) throw std::invalid_argument("no training orbits");
  const GateStats gs = gate_stats(model);
  if (!(gs.selectivity > 10.0))
    throw std::runtime_error("calibration requires a dominant gate (R > 10)");
  const BasisTerm& term = model.library.terms[gs.dominant];

  double num = 0.0, den = 0.0;
  for (const Trajectory& tr : train_orbits) {
    const Series2 ahat = wide_accel(tr.noisy_pos, stride, tr.dt());
    for (Eigen::Index i = 0; i < ahat.rows(); ++i) {
      const Eigen::Index j = i + stride;
      const Eigen::Vector2d pos = tr.noisy_pos.row(j);
      const double r = pos.norm();
      if (r <= 0.0) continue;
      const double phi = basis_value(term, r);
      const double a_radial = -ahat.row(i).dot(pos) / r;
      num += phi * a_radial;
      den += phi * phi;
    }
  }
  if (!(den > 1e-300)) throw std::runtime_error("degenerate calibration design");
  return {gs.dominant, num / den};
}

double estimate_period(const Eigen::VectorXd& signal, double dt,
                       Eigen::Index min_lag) {
  const Eigen::Index n = signal.size();
  if (n < 8) throw std::invalid_argument("signal too short");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  min_lag = std::max<Eigen::Index>(min_lag, 2);
  if (min_lag >= n - 2) throw std::invalid_argument("min_lag too large for signal");

  const double mean = signal.mean();
  const Eigen::VectorXd y = signal.array() - mean;
  if (y.squaredNorm() / n < 1e-24)
    throw std::runtime_error("degenerate (constant) signal");

  // Overlap-normalized autocorrelation.
  const Eigen::Index lag_max = n - 2;
  Eigen::VectorXd c(lag_max + 1);
  for (Eigen::Index lag = 0; lag <= lag_max; ++lag) {
    double s = 0.0;
    const Eigen::Index m = n - lag;
    for (Eigen::Index i = 0; i < m; ++i) s += y[i] * y[i + lag];
    c[lag] = s / m;
  }

  for (Eigen::Index lag = min_lag; lag < lag_max; ++lag) {
    if (c[lag] >= c[lag - 1] && c[lag] >= c[lag + 1] && c[lag] > 0.0) {
      const double denom = c[lag - 1] - 2.0 * c[lag] + c[lag + 1];
      double refined = static_cast<double>(lag);
      if (std::abs(denom) > 1e-300)
        refined += 0.5 * (c[lag - 1] - c[lag + 1]) / denom;
      return refined * dt;
    }
  }
  throw std::runtime_error("no autocorrelation peak found");
}

namespace {

struct RolloutTrace {
  Eigen::VectorXd x;
  std::vector<Eigen::Vector2d> pos;
  std::vector<Eigen::Vector2d> vel;
  bool diverged = false;
};

RolloutTrace roll(const GatedForce<double>& force, Eigen::Vector2d pos,
                  Eigen::Vector2d vel, double dt, long n_steps,
                  double r_floor, double r_escape) {
  RolloutTrace out;
  out.pos.reserve(n_steps + 1);
  out.vel.reserve(n_steps + 1);
  Eigen::Vector2d accel = force(pos);
  out.pos.push_back(pos);
  out.vel.push_back(vel);
  for (long i = 0; i < n_steps; ++i) {
    verlet_step(force, pos, vel, accel, dt);
    const double r = pos.norm();
    if (!std::isfinite(r) || r < r_floor || r > r_escape) {
      out.diverged = true;
      break;
    }
    out.pos.push_back(pos);
    out.vel.push_back(vel);
  }
  out.x.resize(static_cast<Eigen::Index>(out.pos.size()));
  for (size_t i = 0; i < out.pos.size(); ++i)
    out.x[static_cast<Eigen::Index>(i)] = out.pos[i][0];
  return out;
}

}  // namespace

PowerLawFit kepler_exponent(const CalibratedModel& model, const Dataset& data,
                            double dt_model) {
  const auto test = data.test();
  std::vector<double> ln_a, ln_t2;
  const GatedForce<double> force = model.force();
  for (const Trajectory& tr : test) {
    const double nominal_period = tr.duration() / data.config.periods;
    const long n_steps = std::lround(tr.duration() / dt_model);
    const RolloutTrace trace =
        roll(force, tr.clean_pos.row(0), tr.vel.row(0), dt_model, n_steps,
             1e-6, 1e9);
    if (trace.diverged) continue;
    const Eigen::Index min_lag =
        static_cast<Eigen::Index>(std::lround(0.25 * nominal_period / dt_model));
    try {
      const double period = estimate_period(trace.x, dt_model, min_lag);
      ln_a.push_back(std::log(tr.a));
      ln_t2.push_back(2.0 * std::log(period));
    } catch (const std::exception&) {
      continue;
    }
  }
  const int n = static_cast<int>(ln_a.size());
  if (n < 2) throw std::runtime_error("need >= 2 periodic test orbits for the fit");
  // Guard against coincident semi-major axes.
  double xbar = 0.0, ybar = 0.0;
  for (int i = 0; i < n; ++i) {
    xbar += ln_a[i];
    ybar += ln_t2[i];
  }
  xbar /= n;
  ybar /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (ln_a[i] - xbar) * (ln_a[i] - xbar);
    sxy += (ln_a[i] - xbar) * (ln_t2[i] - ybar);
    syy += (ln_t2[i] - ybar) * (ln_t2[i] - ybar);
  }
  if (sxx < 1e-12) throw std::runtime_error("test orbits lack distinct sizes");
  PowerLawFit fit;
  fit.n_orbits = n;
  fit.p = sxy / sxx;
  fit.log_c = ybar - fit.p * xbar;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ln_t2[i] - (fit.log_c + fit.p * ln_a[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 1e-30 ? 1.0 - ss_res / syy : 1.0;
  fit.stderr_p = n > 2 ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
  return fit;
}

ConservationReport conservation(const CalibratedModel& model,
                                const Eigen::Vector2d& r0,
                                const Eigen::Vector2d& v0, double duration,
                                double dt_model, HamiltonianForm form,
                                const ForceLaw& true_law) {
  if (!(duration > 0.0) || !(dt_model > 0.0))
    throw std::invalid_argument("bad rollout horizon");
  const GatedForce<double> force = model.force();
  const long n_steps = std::lround(duration / dt_model);
  const RolloutTrace trace = roll(force, r0, v0, dt_model, n_steps, 1e-6, 1e9);

  ConservationReport rep;
  rep.diverged = trace.diverged;
  rep.n_samples = static_cast<long>(trace.pos.size());
  if (rep.n_samples < 2) {
    rep.sigma_h = 0.0;
    return rep;
  }
  // Shifted accumulation; variance is shift invariant.
  double shift = 0.0, s1 = 0.0, s2 = 0.0;
  bool have_shift = false;
  for (size_t i = 0; i < trace.pos.size(); ++i) {
    const double r = trace.pos[i].norm();
    double h = 0.5 * trace.vel[i].squaredNorm();
    if (form == HamiltonianForm::Calibrated) {
      Vec2<double> p = trace.pos[i];
      h += force.potential(p);
    } else {
      h += law_potential(true_law, r);
    }
    if (!have_shift) {
      shift = h;
      have_shift = true;
    }
    const double d = h - shift;
    s1 += d;
    s2 += d * d;
  }
  const double n = static_cast<double>(rep.n_samples);
  const double var = s2 / n - (s1 / n) * (s1 / n);
  rep.sigma_h = std::sqrt(std::max(var, 0.0));
  return rep;
}

GroupSelection select_by_conservation(
    const std::vector<std::pair<int, double>>& basis_and_sigma) {
  GroupSelection sel;
  std::map<int, std::pair<double, int>> acc;  // basis -> (sum, count)
  for (const auto& [basis, sigma] : basis_and_sigma) {
    auto& a = acc[basis];
    a.first += sigma;
    a.second += 1;
  }
  if (acc.empty()) return sel;
  for (const auto& [basis, a] : acc)
    sel.group_means.emplace_back(basis, a.first / a.second);
  std::sort(sel.group_means.begin(), sel.group_means.end(),
            [](const auto& l, const auto& r) { return l.second < r.second; });
  sel.decided = true;
  sel.basis = sel.group_means.front().first;
  sel.margin = sel.group_means.size() > 1
                   ? sel.group_means[1].second / sel.group_means[0].second
                   : std::numeric_limits<double>::infinity();
  return sel;
}

}  // namespace minaction
