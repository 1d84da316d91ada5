#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace minaction {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

inline void adam_step(const AdamConfig& cfg, AdamState& st, Eigen::VectorXd& x,
                      const Eigen::VectorXd& g) {
  if (x.size() != st.m.size() || g.size() != st.m.size())
    throw std::invalid_argument("adam state size mismatch");
  ++st.t;
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g;
  st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double mc = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double vc = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  x -= cfg.lr * ((st.m / mc).array() / ((st.v / vc).array().sqrt() + cfg.eps))
           .matrix();
}

}  // namespace minaction
