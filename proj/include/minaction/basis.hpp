#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "minaction/dual.hpp"

namespace minaction {

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

struct BasisTerm {
  enum class Kind { Power, Log };
  Kind kind = Kind::Power;
  double exponent = 0.0;  // ignored for Log

  std::string name() const {
    if (kind == Kind::Log) return "log(r)";
    if (exponent == 0.0) return "1";
    if (exponent == 1.0) return "r";
    std::string e = std::to_string(exponent);
    e.erase(e.find_last_not_of('0') + 1);
    if (!e.empty() && e.back() == '.') e.pop_back();
    return "r^" + e;
  }
};

struct BasisLibrary {
  std::vector<BasisTerm> terms;

  int size() const { return static_cast<int>(terms.size()); }

  // Index 0 is the inverse-square term in the default library.
  static BasisLibrary standard() {
    return {{{BasisTerm::Kind::Power, -2.0},
             {BasisTerm::Kind::Power, -1.0},
             {BasisTerm::Kind::Power, 1.0},
             {BasisTerm::Kind::Power, 0.0},
             {BasisTerm::Kind::Power, -3.0}}};
  }
  static BasisLibrary confounders() {
    BasisLibrary lib = standard();
    lib.terms.push_back({BasisTerm::Kind::Power, -2.5});
    lib.terms.push_back({BasisTerm::Kind::Power, -1.5});
    return lib;
  }
  static BasisLibrary expanded() {
    BasisLibrary lib = standard();
    lib.terms.push_back({BasisTerm::Kind::Power, 2.0});
    lib.terms.push_back({BasisTerm::Kind::Power, -4.0});
    lib.terms.push_back({BasisTerm::Kind::Log, 0.0});
    return lib;
  }
  // Standard library with the inverse-square term removed.
  static BasisLibrary reduced() {
    return {{{BasisTerm::Kind::Power, -1.0},
             {BasisTerm::Kind::Power, 1.0},
             {BasisTerm::Kind::Power, 0.0},
             {BasisTerm::Kind::Power, -3.0}}};
  }
};

namespace detail {

template <class Scalar>
Scalar ipow(const Scalar& base, int e) {
  Scalar out(1.0);
  Scalar b = base;
  int n = e;
  while (n > 0) {
    if (n & 1) out = out * b;
    n >>= 1;
    if (n) b = b * b;
  }
  return out;
}

inline bool integral_exponent(double e, int& out) {
  const double r = std::nearbyint(e);
  if (std::abs(e - r) < 1e-12 && std::abs(r) <= 8.0) {
    out = static_cast<int>(r);
    return true;
  }
  return false;
}

}  // namespace detail

template <class Scalar>
Scalar basis_value(const BasisTerm& term, const Scalar& r) {
  using std::log;
  using std::pow;
  if (term.kind == BasisTerm::Kind::Log) return log(r);
  int e = 0;
  if (detail::integral_exponent(term.exponent, e)) {
    if (e == 0) return Scalar(1.0);
    if (e > 0) return detail::ipow(r, e);
    return 1.0 / detail::ipow(r, -e);
  }
  return pow(r, term.exponent);
}

// Antiderivative of basis_value in r, so the pair (force, potential)
// satisfies f = dV/dr term by term.
template <class Scalar>
Scalar basis_antiderivative(const BasisTerm& term, const Scalar& r) {
  using std::log;
  using std::pow;
  if (term.kind == BasisTerm::Kind::Log) return r * log(r) - r;
  if (term.exponent == -1.0) return log(r);
  const double p = term.exponent + 1.0;
  int e = 0;
  if (detail::integral_exponent(p, e)) {
    if (e == 0) return Scalar(1.0 / p);  // unreachable: p != 0
    if (e > 0) return detail::ipow(r, e) / p;
    return 1.0 / (p * detail::ipow(r, -e));
  }
  return pow(r, p) / p;
}

// softmax(logits / tau) with max subtraction.
template <class Scalar>
VecX<Scalar> softmax_gates(const VecX<Scalar>& logits, double tau) {
  using std::exp;
  if (logits.size() == 0) throw std::invalid_argument("empty logits");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  double m = val(logits[0]);
  for (Eigen::Index i = 1; i < logits.size(); ++i) m = std::max(m, val(logits[i]));
  VecX<Scalar> g(logits.size());
  Scalar z(0.0);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    g[i] = exp((logits[i] - m) / tau);
    z += g[i];
  }
  for (Eigen::Index i = 0; i < logits.size(); ++i) g[i] = g[i] / z;
  return g;
}

inline double softmax_temperature_floor() { return 1e-300; }

// Signed radial magnitude f(r) = sum_i w_i phi_i(r); the physical force is
// -f(r) r_hat, attractive for f > 0.
template <class Scalar>
Scalar radial_magnitude(const BasisLibrary& lib, const VecX<Scalar>& weights,
                        const Scalar& r) {
  Scalar f(0.0);
  for (int i = 0; i < lib.size(); ++i) f += weights[i] * basis_value(lib.terms[i], r);
  return f;
}

template <class Scalar>
Scalar potential_value(const BasisLibrary& lib, const VecX<Scalar>& weights,
                       const Scalar& r) {
  Scalar v(0.0);
  for (int i = 0; i < lib.size(); ++i)
    v += weights[i] * basis_antiderivative(lib.terms[i], r);
  return v;
}

// Gated force field used everywhere a model is integrated or fit. The radius
// entering the basis functions is clamped below r_floor; the clamp passes no
// derivative, and positions keep theirs.
template <class Scalar>
struct GatedForce {
  const BasisLibrary* lib = nullptr;
  VecX<Scalar> weights;  // gate * coefficient per term
  double r_floor = 1e-6;
  long long* clamp_count = nullptr;

  Scalar clamped_radius(const Vec2<Scalar>& pos) const {
    using std::sqrt;
    Scalar r = sqrt(pos.squaredNorm());
    if (val(r) < r_floor) {
      if (clamp_count) ++*clamp_count;
      r = Scalar(r_floor);
    }
    return r;
  }

  Vec2<Scalar> operator()(const Vec2<Scalar>& pos) const {
    const Scalar r = clamped_radius(pos);
    const Scalar scale = -radial_magnitude(*lib, weights, r) / r;
    return Vec2<Scalar>(scale * pos[0], scale * pos[1]);
  }

  Scalar potential(const Vec2<Scalar>& pos) const {
    return potential_value(*lib, weights, clamped_radius(pos));
  }
};

template <class Scalar>
GatedForce<Scalar> make_gated_force(const BasisLibrary& lib,
                                    const VecX<Scalar>& logits,
                                    const VecX<Scalar>& thetas, double tau,
                                    double r_floor = 1e-6,
                                    long long* clamp_count = nullptr) {
  if (logits.size() != lib.size() || thetas.size() != lib.size())
    throw std::invalid_argument("parameter size does not match library");
  GatedForce<Scalar> f;
  f.lib = &lib;
  const VecX<Scalar> gates = softmax_gates(logits, tau);
  f.weights = gates.cwiseProduct(thetas);
  f.r_floor = r_floor;
  f.clamp_count = clamp_count;
  return f;
}

// Trained model snapshot.
struct BasisModel {
  BasisLibrary library;
  Eigen::VectorXd logits;
  Eigen::VectorXd thetas;
  double tau = 1.0;

  Eigen::VectorXd gates() const { return softmax_gates<double>(logits, tau); }
};

// A_max / A_2nd; infinite when the runner-up underflows.
inline double selectivity(const Eigen::VectorXd& gates) {
  if (gates.size() < 2) throw std::invalid_argument("selectivity needs >= 2 gates");
  double best = -1.0, second = -1.0;
  for (Eigen::Index i = 0; i < gates.size(); ++i) {
    if (gates[i] > best) {
      second = best;
      best = gates[i];
    } else if (gates[i] > second) {
      second = gates[i];
    }
  }
  if (second <= 0.0) return std::numeric_limits<double>::infinity();
  return best / second;
}

// Normalized Herfindahl concentration of coefficient-weighted gate shares,
// 0 at uniform, 1 at one-hot. Falls back to raw gates when all A_i|theta_i|
// vanish.
inline double gate_concentration(const Eigen::VectorXd& gates,
                                 const Eigen::VectorXd& thetas) {
  const Eigen::Index k = gates.size();
  if (k != thetas.size()) throw std::invalid_argument("size mismatch");
  if (k < 2) return 1.0;
  Eigen::VectorXd p = gates.cwiseProduct(thetas.cwiseAbs());
  double sum = p.sum();
  if (sum < 1e-15) {
    p = gates;
    sum = p.sum();
  }
  p /= sum;
  const double hhi = p.squaredNorm();
  return (k * hhi - 1.0) / (k - 1.0);
}

struct GateStats {
  Eigen::VectorXd gates;
  int dominant = 0;
  double selectivity = 0.0;
  double concentration = 0.0;
};

inline GateStats gate_stats(const BasisModel& model) {
  GateStats s;
  s.gates = model.gates();
  s.gates.maxCoeff(&s.dominant);
  s.selectivity = selectivity(s.gates);
  s.concentration = gate_concentration(s.gates, model.thetas);
  return s;
}

}  // namespace minaction
