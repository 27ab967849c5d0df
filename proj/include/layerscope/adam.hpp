#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace layerscope {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates for one parameter block.
class AdamSlot {
 public:
  AdamSlot() = default;
  AdamSlot(Eigen::Index rows, Eigen::Index cols)
      : m_(Eigen::MatrixXd::Zero(rows, cols)),
        v_(Eigen::MatrixXd::Zero(rows, cols)) {}

  // `step` counts from 1.
  void update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr,
              std::int64_t step, const AdamConfig& cfg = {}) {
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.array() -= lr * (m_.array() / c1) /
                     ((v_.array() / c2).sqrt() + cfg.epsilon);
  }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
};

}  // namespace layerscope
