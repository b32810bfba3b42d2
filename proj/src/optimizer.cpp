#include "protofair/optimizer.hpp"

#include <cmath>

#include "protofair/common.hpp"

namespace protofair {

Optimizer::Optimizer(const TrainConfig& config)
    : adam_(config.optimizer == "adam"),
      lr_(config.learning_rate),
      weight_decay_(config.weight_decay),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      epsilon_(config.adam_epsilon) {}

void Optimizer::add_param(Eigen::MatrixXd* param) {
  Slot slot;
  slot.param = param;
  if (adam_) {
    slot.m = Eigen::MatrixXd::Zero(param->rows(), param->cols());
    slot.v = Eigen::MatrixXd::Zero(param->rows(), param->cols());
  }
  slots_.push_back(std::move(slot));
}

void Optimizer::step(const std::vector<const Eigen::MatrixXd*>& grads) {
  if (grads.size() != slots_.size()) {
    throw NumericError("optimizer step with mismatched gradient list");
  }
  ++step_count_;
  const double bc1 = adam_ ? 1.0 - std::pow(beta1_, static_cast<double>(step_count_)) : 1.0;
  const double bc2 = adam_ ? 1.0 - std::pow(beta2_, static_cast<double>(step_count_)) : 1.0;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    Slot& slot = slots_[s];
    Eigen::MatrixXd g = *grads[s];
    if (weight_decay_ != 0.0) g += weight_decay_ * (*slot.param);
    if (!adam_) {
      *slot.param -= lr_ * g;
      continue;
    }
    slot.m = beta1_ * slot.m + (1.0 - beta1_) * g;
    slot.v = beta2_ * slot.v + (1.0 - beta2_) * g.array().square().matrix();
    const Eigen::ArrayXXd m_hat = slot.m.array() / bc1;
    const Eigen::ArrayXXd v_hat = slot.v.array() / bc2;
    slot.param->array() -= lr_ * m_hat / (v_hat.sqrt() + epsilon_);
  }
}

}  // namespace protofair
