#pragma once

#include "minaction/basis.hpp"

namespace minaction {

// One velocity-Verlet (kick-drift-kick) step. `accel` must hold the
// acceleration at the incoming position and is replaced by the acceleration
// at the outgoing one, so chained steps cost one force evaluation each.
template <class Scalar, class Force>
void verlet_step(Force&& force, Vec2<Scalar>& pos, Vec2<Scalar>& vel,
                 Vec2<Scalar>& accel, double dt) {
  const Vec2<Scalar> vh = vel + (0.5 * dt) * accel;
  pos += dt * vh;
  accel = force(pos);
  vel = vh + (0.5 * dt) * accel;
}

template <class Scalar, class Force>
void verlet_steps(Force&& force, Vec2<Scalar>& pos, Vec2<Scalar>& vel, double dt,
                  long n) {
  Vec2<Scalar> accel = force(pos);
  for (long i = 0; i < n; ++i) verlet_step(force, pos, vel, accel, dt);
}

}  // namespace minaction
