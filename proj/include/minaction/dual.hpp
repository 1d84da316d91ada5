#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace minaction {

// Forward-mode scalar carrying a fixed block of derivative lanes.
// The lane count bounds how many parameters can be differentiated in a
// single sweep; a K-term gated basis needs 2K lanes (logits + coefficients).
inline constexpr int kGradLanes = 16;

struct Dual {
  using Grad = Eigen::Matrix<double, kGradLanes, 1>;

  double value = 0.0;
  Grad grad = Grad::Zero();

  Dual() = default;
  Dual(double v) : value(v) {}  // constant: all lanes zero
  Dual(double v, int lane) : value(v) {
    if (lane < 0 || lane >= kGradLanes) throw std::out_of_range("dual lane");
    grad[lane] = 1.0;
  }

  Dual& operator+=(const Dual& o) {
    value += o.value;
    grad += o.grad;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value -= o.value;
    grad -= o.grad;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    grad = o.value * grad + value * o.grad;
    value *= o.value;
    return *this;
  }
  Dual& operator+=(double o) {
    value += o;
    return *this;
  }
  Dual& operator-=(double o) {
    value -= o;
    return *this;
  }
  Dual& operator*=(double o) {
    value *= o;
    grad *= o;
    return *this;
  }
  Dual& operator/=(double o) {
    value /= o;
    grad /= o;
    return *this;
  }
};

inline Dual operator-(const Dual& a) {
  Dual r;
  r.value = -a.value;
  r.grad = -a.grad;
  return r;
}
inline const Dual& operator+(const Dual& a) { return a; }

inline Dual operator+(const Dual& a, const Dual& b) {
  Dual r;
  r.value = a.value + b.value;
  r.grad = a.grad + b.grad;
  return r;
}
inline Dual operator+(const Dual& a, double b) {
  Dual r;
  r.value = a.value + b;
  r.grad = a.grad;
  return r;
}
inline Dual operator+(double a, const Dual& b) { return b + a; }

inline Dual operator-(const Dual& a, const Dual& b) {
  Dual r;
  r.value = a.value - b.value;
  r.grad = a.grad - b.grad;
  return r;
}
inline Dual operator-(const Dual& a, double b) {
  Dual r;
  r.value = a.value - b;
  r.grad = a.grad;
  return r;
}
inline Dual operator-(double a, const Dual& b) {
  Dual r;
  r.value = a - b.value;
  r.grad = -b.grad;
  return r;
}

inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r;
  r.value = a.value * b.value;
  r.grad = b.value * a.grad + a.value * b.grad;
  return r;
}
inline Dual operator*(const Dual& a, double b) {
  Dual r;
  r.value = a.value * b;
  r.grad = a.grad * b;
  return r;
}
inline Dual operator*(double a, const Dual& b) { return b * a; }

inline Dual operator/(const Dual& a, const Dual& b) {
  const double inv = 1.0 / b.value;
  Dual r;
  r.value = a.value * inv;
  r.grad = inv * a.grad - (r.value * inv) * b.grad;
  return r;
}
inline Dual operator/(const Dual& a, double b) {
  Dual r;
  r.value = a.value / b;
  r.grad = a.grad / b;
  return r;
}
inline Dual operator/(double a, const Dual& b) {
  const double inv = 1.0 / b.value;
  Dual r;
  r.value = a * inv;
  r.grad = (-r.value * inv) * b.grad;
  return r;
}

inline bool operator<(const Dual& a, const Dual& b) { return a.value < b.value; }
inline bool operator>(const Dual& a, const Dual& b) { return a.value > b.value; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.value <= b.value; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.value >= b.value; }
inline bool operator==(const Dual& a, const Dual& b) { return a.value == b.value; }
inline bool operator!=(const Dual& a, const Dual& b) { return a.value != b.value; }
inline bool operator<(const Dual& a, double b) { return a.value < b; }
inline bool operator>(const Dual& a, double b) { return a.value > b; }
inline bool operator<(double a, const Dual& b) { return a < b.value; }
inline bool operator>(double a, const Dual& b) { return a > b.value; }

inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.value);
  Dual r;
  r.value = s;
  r.grad = (0.5 / s) * a.grad;
  return r;
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  Dual r;
  r.value = e;
  r.grad = e * a.grad;
  return r;
}
inline Dual log(const Dual& a) {
  Dual r;
  r.value = std::log(a.value);
  r.grad = (1.0 / a.value) * a.grad;
  return r;
}
inline Dual pow(const Dual& a, double e) {
  const double p = std::pow(a.value, e);
  Dual r;
  r.value = p;
  r.grad = (e * std::pow(a.value, e - 1.0)) * a.grad;
  return r;
}
inline Dual abs(const Dual& a) { return a.value < 0.0 ? -a : a; }
inline Dual sin(const Dual& a) {
  Dual r;
  r.value = std::sin(a.value);
  r.grad = std::cos(a.value) * a.grad;
  return r;
}
inline Dual cos(const Dual& a) {
  Dual r;
  r.value = std::cos(a.value);
  r.grad = -std::sin(a.value) * a.grad;
  return r;
}

inline bool isfinite(const Dual& a) {
  return std::isfinite(a.value) && a.grad.allFinite();
}

// Value extraction usable from code templated on the scalar type.
inline double val(double x) { return x; }
inline double val(const Dual& x) { return x.value; }

}  // namespace minaction

namespace Eigen {

template <>
struct NumTraits<minaction::Dual> : NumTraits<double> {
  using Real = minaction::Dual;
  using NonInteger = minaction::Dual;
  using Nested = minaction::Dual;
  using Literal = minaction::Dual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1 + minaction::kGradLanes,
    MulCost = 2 * (1 + minaction::kGradLanes),
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, minaction::Dual, BinaryOp> {
  using ReturnType = minaction::Dual;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<minaction::Dual, double, BinaryOp> {
  using ReturnType = minaction::Dual;
};

}  // namespace Eigen
