#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace minaction {

// Two-phase training schedule: a warmup with constant weights, then a
// simultaneous linear energy-weight ramp and exponential temperature anneal.
struct Schedule {
  int warmup_epochs = 50;
  int total_epochs = 200;
  double alpha_I = 1.0;
  double alpha_E_start = 0.01;
  double alpha_E_end = 1.0;
  double tau_start = 1.0;
  double tau_end = 0.05;
};

struct SchedulePoint {
  double alpha_I = 1.0;
  double alpha_E = 0.0;
  double tau = 1.0;
};

inline SchedulePoint schedule_at(const Schedule& s, int epoch) {
  if (epoch < 1 || epoch > s.total_epochs)
    throw std::out_of_range("epoch outside schedule");
  if (s.warmup_epochs >= s.total_epochs)
    throw std::invalid_argument("warmup must end before the last epoch");
  SchedulePoint p;
  p.alpha_I = s.alpha_I;
  if (epoch <= s.warmup_epochs) {
    p.alpha_E = s.alpha_E_start;
    p.tau = s.tau_start;
    return p;
  }
  const double f = static_cast<double>(epoch - s.warmup_epochs) /
                   static_cast<double>(s.total_epochs - s.warmup_epochs);
  p.alpha_E = s.alpha_E_start + (s.alpha_E_end - s.alpha_E_start) * f;
  p.tau = s.tau_start * std::pow(s.tau_end / s.tau_start, f);
  return p;
}

// Epochs where alpha_E/tau passes near a small integer ratio p:q,
// i.e. |alpha_E q / (tau p) - 1| < tol.
struct RatioNode {
  int epoch = 0;
  int p = 1;
  int q = 1;
  double deviation = 0.0;
};

inline std::vector<RatioNode> ratio_nodes(const Schedule& s, double tol = 0.1) {
  static constexpr int kRatios[4][2] = {{3, 1}, {2, 1}, {3, 2}, {1, 1}};
  std::vector<RatioNode> nodes;
  for (int epoch = 1; epoch <= s.total_epochs; ++epoch) {
    const SchedulePoint pt = schedule_at(s, epoch);
    for (const auto& r : kRatios) {
      const double dev = std::abs(pt.alpha_E * r[1] / (pt.tau * r[0]) - 1.0);
      if (dev < tol) nodes.push_back({epoch, r[0], r[1], dev});
    }
  }
  return nodes;
}

}  // namespace minaction
