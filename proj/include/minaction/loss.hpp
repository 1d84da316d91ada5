#pragma once

#include <optional>
#include <span>
#include <stdexcept>

#include "minaction/orbit.hpp"
#include "minaction/verlet.hpp"

namespace minaction {

enum class TeacherVelocity { Clean, WideStencil };
enum class EnergyForm { ModelPotential, GravityLiteral };

struct LossWeights {
  double alpha_I = 1.0;
  double lambda_accel = 1.0;
  double lambda_comp = 0.01;
  double lambda_arch = 0.5;
  // Weight on the energy-variance term; inherits alpha_E when unset.
  std::optional<double> alpha_S;
};

struct LossOptions {
  int stride = 10;  // wide-stencil stride for acceleration targets
  int substeps = 5;
  TeacherVelocity teacher = TeacherVelocity::Clean;
  EnergyForm energy = EnergyForm::ModelPotential;
  double literal_coupling = 1.0;  // GM in the literal -GM/r energy
  double r_floor = 1e-6;
};

// Per-trajectory data that does not depend on model parameters, built once
// per training run.
struct PreparedTrajectory {
  const Trajectory* src = nullptr;
  Series2 accel_hat;    // wide_accel of noisy positions; row i is index i+stride
  Series2 teacher_vel;  // restart velocities per observation index
  Eigen::Index seg_begin = 0;  // teacher-forced segments k in [seg_begin, seg_end)
  Eigen::Index seg_end = 0;
  int stride = 0;
  double dt_obs = 0.0;
};

inline PreparedTrajectory prepare_trajectory(const Trajectory& tr,
                                             const LossOptions& opt) {
  const Eigen::Index n = tr.n();
  if (n < 2) throw std::invalid_argument("trajectory needs >= 2 observations");
  if (n < 2 * opt.stride + 1)
    throw std::invalid_argument("trajectory too short for stencil stride");
  PreparedTrajectory p;
  p.src = &tr;
  p.stride = opt.stride;
  p.dt_obs = tr.dt();
  p.accel_hat = wide_accel(tr.noisy_pos, opt.stride, p.dt_obs);
  if (opt.teacher == TeacherVelocity::Clean) {
    p.teacher_vel = tr.vel;
    p.seg_begin = 0;
    p.seg_end = n - 1;
  } else {
    p.teacher_vel = Series2::Zero(n, 2);
    const Series2 v = wide_velocity(tr.noisy_pos, opt.stride, p.dt_obs);
    p.teacher_vel.middleRows(opt.stride, v.rows()) = v;
    p.seg_begin = opt.stride;
    p.seg_end = n - opt.stride;  // last k with an estimated velocity
  }
  return p;
}

template <class Scalar>
struct TrajectoryTerms {
  Scalar traj{0.0};
  Scalar accel{0.0};
  Scalar sym{0.0};
};

// Teacher-forced one-observation-step rollouts plus stencil matching for a
// single trajectory. Energy variance is taken over every substep-end state,
// shifted by a constant for conditioning (variance is shift invariant).
template <class Scalar>
TrajectoryTerms<Scalar> trajectory_loss(const GatedForce<Scalar>& force,
                                        const PreparedTrajectory& p,
                                        const LossOptions& opt) {
  if (p.seg_end - p.seg_begin < 1)
    throw std::invalid_argument("no teacher-forced segments");
  const double dt_model = p.dt_obs / opt.substeps;
  const auto& obs = p.src->noisy_pos;

  TrajectoryTerms<Scalar> out;
  Scalar e_sum(0.0), e_sq(0.0);
  long n_states = 0;
  double e_shift = 0.0;
  bool have_shift = false;

  for (Eigen::Index k = p.seg_begin; k < p.seg_end; ++k) {
    Vec2<Scalar> pos(Scalar(obs(k, 0)), Scalar(obs(k, 1)));
    Vec2<Scalar> vel(Scalar(p.teacher_vel(k, 0)), Scalar(p.teacher_vel(k, 1)));
    Vec2<Scalar> accel = force(pos);
    for (int s = 0; s < opt.substeps; ++s) {
      verlet_step(force, pos, vel, accel, dt_model);
      Scalar e = 0.5 * vel.squaredNorm();
      if (opt.energy == EnergyForm::ModelPotential)
        e += force.potential(pos);
      else
        e -= opt.literal_coupling / force.clamped_radius(pos);
      if (!have_shift) {
        e_shift = val(e);
        have_shift = true;
      }
      const Scalar d = e - e_shift;
      e_sum += d;
      e_sq += d * d;
      ++n_states;
    }
    const Scalar dx = pos[0] - obs(k + 1, 0);
    const Scalar dy = pos[1] - obs(k + 1, 1);
    out.traj += dx * dx + dy * dy;
  }
  out.traj = out.traj / static_cast<double>(p.seg_end - p.seg_begin);

  const Scalar mean = e_sum / static_cast<double>(n_states);
  out.sym = e_sq / static_cast<double>(n_states) - mean * mean;

  const Eigen::Index m = p.accel_hat.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = i + p.stride;
    const Vec2<Scalar> f = force(Vec2<Scalar>(Scalar(obs(j, 0)), Scalar(obs(j, 1))));
    const Scalar dx = f[0] - p.accel_hat(i, 0);
    const Scalar dy = f[1] - p.accel_hat(i, 1);
    out.accel += dx * dx + dy * dy;
  }
  out.accel = out.accel / static_cast<double>(m);
  return out;
}

template <class Scalar>
struct LossTerms {
  Scalar traj{0.0};
  Scalar accel{0.0};
  Scalar sym{0.0};
  Scalar comp{0.0};
  Scalar arch{0.0};
  Scalar total{0.0};
};

// Batch components are arithmetic means of per-trajectory values; comp and
// arch depend only on the parameters.
template <class Scalar>
LossTerms<Scalar> batch_loss(const BasisLibrary& lib, const VecX<Scalar>& logits,
                             const VecX<Scalar>& thetas, double tau,
                             std::span<const PreparedTrajectory> batch,
                             const LossWeights& w, double alpha_E,
                             const LossOptions& opt,
                             long long* clamp_count = nullptr) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  using std::abs;
  using std::log;
  const VecX<Scalar> gates = softmax_gates(logits, tau);

  GatedForce<Scalar> force;
  force.lib = &lib;
  force.weights = gates.cwiseProduct(thetas);
  force.r_floor = opt.r_floor;
  force.clamp_count = clamp_count;

  LossTerms<Scalar> t;
  for (const PreparedTrajectory& p : batch) {
    const TrajectoryTerms<Scalar> tt = trajectory_loss(force, p, opt);
    t.traj += tt.traj;
    t.accel += tt.accel;
    t.sym += tt.sym;
  }
  const double nb = static_cast<double>(batch.size());
  t.traj = t.traj / nb;
  t.accel = t.accel / nb;
  t.sym = t.sym / nb;

  Scalar comp_sum(0.0);
  for (Eigen::Index i = 0; i < force.weights.size(); ++i)
    comp_sum += abs(force.weights[i]);
  t.comp = comp_sum / static_cast<double>(lib.size());
  Scalar h(0.0);
  for (Eigen::Index i = 0; i < gates.size(); ++i) h -= gates[i] * log(gates[i]);
  t.arch = h;

  const double alpha_S = w.alpha_S.value_or(alpha_E);
  t.total = w.alpha_I * (t.traj + w.lambda_accel * t.accel) +
            alpha_E * (w.lambda_comp * t.comp + w.lambda_arch * t.arch) +
            alpha_S * t.sym;
  return t;
}

struct LossBreakdown {
  double traj = 0.0;
  double accel = 0.0;
  double sym = 0.0;
  double comp = 0.0;
  double arch = 0.0;
  double total = 0.0;
  double alpha_I = 1.0;
  double alpha_E = 0.0;
  double alpha_S = 0.0;
  double lambda_accel = 1.0;
  double lambda_comp = 0.01;
  double lambda_arch = 0.5;
};

template <class Scalar>
LossBreakdown make_breakdown(const LossTerms<Scalar>& t, const LossWeights& w,
                             double alpha_E) {
  LossBreakdown b;
  b.traj = val(t.traj);
  b.accel = val(t.accel);
  b.sym = val(t.sym);
  b.comp = val(t.comp);
  b.arch = val(t.arch);
  b.total = val(t.total);
  b.alpha_I = w.alpha_I;
  b.alpha_E = alpha_E;
  b.alpha_S = w.alpha_S.value_or(alpha_E);
  b.lambda_accel = w.lambda_accel;
  b.lambda_comp = w.lambda_comp;
  b.lambda_arch = w.lambda_arch;
  return b;
}

}  // namespace minaction
