#include "minaction/orbit.hpp"

#include <algorithm>
#include <cmath>

#include "minaction/verlet.hpp"

namespace minaction {

Eigen::Vector2d law_accel(const ForceLaw& law, const Eigen::Vector2d& pos) {
  if (law.kind == LawKind::Hooke) return -law.coupling * pos;
  const double r2 = pos.squaredNorm();
  const double r = std::sqrt(r2);
  return (-law.coupling / (r2 * r)) * pos;
}

double law_potential(const ForceLaw& law, double r) {
  if (law.kind == LawKind::Hooke) return 0.5 * law.coupling * r * r;
  return -law.coupling / r;
}

double law_period(const ForceLaw& law, double a) {
  if (law.kind == LawKind::Hooke) return 2.0 * M_PI / std::sqrt(law.coupling);
  return 2.0 * M_PI * std::pow(a, 1.5) / std::sqrt(law.coupling);
}

void initial_state(const ForceLaw& law, double a, double e, Eigen::Vector2d& r0,
                   Eigen::Vector2d& v0) {
  if (!(a > 0.0) || e < 0.0 || e >= 1.0)
    throw std::invalid_argument("orbit parameters out of range");
  if (law.kind == LawKind::Hooke) {
    r0 = {a, 0.0};
    v0 = {0.0, std::sqrt(law.coupling) * a * std::sqrt(1.0 - e * e)};
    return;
  }
  const double rp = a * (1.0 - e);
  r0 = {rp, 0.0};
  v0 = {0.0, std::sqrt(law.coupling * (1.0 + e) / rp)};
}

void split_sizes(int n, int& n_train, int& n_val, int& n_test) {
  if (n < 3) throw std::invalid_argument("need at least 3 orbits to split");
  n_train = static_cast<int>(std::floor(0.70 * n));
  n_test = static_cast<int>(std::floor(0.15 * n));
  n_val = n - n_train - n_test;
}

OrbitStates integrate_orbit(const ForceLaw& law, const Eigen::Vector2d& r0,
                            const Eigen::Vector2d& v0, double dt, long n_steps,
                            long record_every, double r_floor) {
  if (!(dt > 0.0) || n_steps < 0 || record_every < 1)
    throw std::invalid_argument("bad integration arguments");
  const long n_rec = n_steps / record_every + 1;
  OrbitStates out;
  out.times.resize(n_rec);
  out.pos.resize(n_rec, 2);
  out.vel.resize(n_rec, 2);

  Eigen::Vector2d pos = r0, vel = v0;
  Eigen::Vector2d accel = law_accel(law, pos);
  long rec = 0;
  out.times[0] = 0.0;
  out.pos.row(0) = pos;
  out.vel.row(0) = vel;
  ++rec;
  auto force = [&law](const Eigen::Vector2d& p) { return law_accel(law, p); };
  for (long step = 1; step <= n_steps; ++step) {
    verlet_step(force, pos, vel, accel, dt);
    if (pos.norm() < r_floor)
      throw std::runtime_error("radius fell below r_floor at step " +
                               std::to_string(step));
    if (step % record_every == 0) {
      out.times[rec] = static_cast<double>(step) * dt;
      out.pos.row(rec) = pos;
      out.vel.row(rec) = vel;
      ++rec;
    }
  }
  return out;
}

Dataset generate_dataset(const OrbitGenConfig& config) {
  if (config.n_orbits < 3) throw std::invalid_argument("n_orbits must be >= 3");
  if (!(config.a_min > 0.0) || !(config.a_max >= config.a_min))
    throw std::invalid_argument("bad semi-major axis range");
  if (config.e_min < 0.0 || config.e_max >= 1.0 || config.e_max < config.e_min)
    throw std::invalid_argument("bad eccentricity range");
  const double ratio = config.dt_obs / config.dt_sim;
  const long record_every = std::lround(ratio);
  if (record_every < 1 || std::abs(ratio - record_every) > 1e-6)
    throw std::invalid_argument("dt_obs must be an integer multiple of dt_sim");

  Dataset ds;
  ds.config = config;

  Rng orbit_rng(config.effective_orbit_seed());
  std::vector<double> as(config.n_orbits), es(config.n_orbits);
  for (int i = 0; i < config.n_orbits; ++i) {
    as[i] = std::exp(orbit_rng.uniform(std::log(config.a_min), std::log(config.a_max)));
    es[i] = orbit_rng.uniform(config.e_min, config.e_max);
  }

  std::vector<double> sorted = as;
  std::sort(sorted.begin(), sorted.end());
  const int mid = config.n_orbits / 2;
  const double median_a = (config.n_orbits % 2 == 1)
                              ? sorted[mid]
                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
  ds.sigma_pos = config.noise_fraction * median_a;

  const std::uint64_t noise_base = config.effective_noise_seed();
  ds.orbits.reserve(config.n_orbits);
  for (int i = 0; i < config.n_orbits; ++i) {
    const double period = law_period(config.law, as[i]);
    const long n_obs =
        static_cast<long>(std::floor(config.periods * period / config.dt_obs));
    if (n_obs < 2) throw std::runtime_error("orbit too short for observation cadence");
    Eigen::Vector2d r0, v0;
    initial_state(config.law, as[i], es[i], r0, v0);
    OrbitStates states = integrate_orbit(config.law, r0, v0, config.dt_sim,
                                         n_obs * record_every, record_every,
                                         config.r_floor);

    Trajectory tr;
    tr.a = as[i];
    tr.e = es[i];
    tr.noise_sigma = ds.sigma_pos;
    tr.times.resize(states.pos.rows());
    for (Eigen::Index k = 0; k < tr.times.size(); ++k)
      tr.times[k] = static_cast<double>(k) * config.dt_obs;
    tr.clean_pos = states.pos;
    tr.vel = states.vel;
    tr.noisy_pos = states.pos;
    Rng noise_rng(derive_seed(noise_base, static_cast<std::uint64_t>(i)));
    for (Eigen::Index k = 0; k < tr.noisy_pos.rows(); ++k) {
      tr.noisy_pos(k, 0) += noise_rng.normal(0.0, ds.sigma_pos);
      tr.noisy_pos(k, 1) += noise_rng.normal(0.0, ds.sigma_pos);
    }
    ds.orbits.push_back(std::move(tr));
  }

  split_sizes(config.n_orbits, ds.n_train, ds.n_val, ds.n_test);
  return ds;
}

}  // namespace minaction
