#pragma once

#include <Eigen/Dense>
#include <vector>

#include "protofair/train_config.hpp"

namespace protofair {

// Dense first-order optimizer over a fixed list of parameter matrices.
// Weight decay is coupled L2 (added to the gradient before the update).
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config);

  void add_param(Eigen::MatrixXd* param);

  // Applies one update; `grads` must parallel the registered parameters.
  void step(const std::vector<const Eigen::MatrixXd*>& grads);

 private:
  struct Slot {
    Eigen::MatrixXd* param;
    Eigen::MatrixXd m, v;  // Adam moments, unused for SGD
  };

  bool adam_;
  double lr_, weight_decay_, beta1_, beta2_, epsilon_;
  long step_count_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace protofair
