#pragma once

#include <Eigen/Dense>
#include <vector>

#include "protofair/model.hpp"

namespace protofair {

// Dense gradient buffers mirroring the model parameters. Loss functions
// accumulate into these; the optimizer consumes them.
struct Gradients {
  Eigen::MatrixXd users, items, user_protos, item_protos;
  Eigen::MatrixXd user_to_item_space, item_to_user_space;

  void resize_like(const PrototypeModel& model);
  void set_zero();
};

// One sampled-softmax example. For the user-side loss the pivot is a user
// and positive/negatives are items; the item-side loss swaps the roles.
struct Example {
  int pivot = 0;
  int positive = 0;
  std::vector<int> negatives;
};

// Sampled-softmax cross-entropy, averaged over the batch. Gradients flow
// through the active k-filter entries only (masks are constants within a
// step). Returns the batch-mean loss.
double rec_loss_user(const PrototypeModel& model, const std::vector<Example>& batch,
                     bool use_filtering, Gradients* grads);
double rec_loss_item(const PrototypeModel& model, const std::vector<Example>& batch,
                     bool use_filtering, Gradients* grads);

// Score-difference penalty between each positive and its sampled negatives,
// averaged over the batch; gradients are scaled by `weight`.
double zerosum_loss_user(const PrototypeModel& model, const std::vector<Example>& batch,
                         bool use_filtering, double weight, Gradients* grads);
double zerosum_loss_item(const PrototypeModel& model, const std::vector<Example>& batch,
                         bool use_filtering, double weight, Gradients* grads);

// Score-level form: mean squared difference between the positive score and
// each negative score. Optional gradient outputs w.r.t. the scores.
double zerosum_reg(double positive_score, const std::vector<double>& negative_scores,
                   double* d_positive = nullptr, std::vector<double>* d_negatives = nullptr);

struct CollabReg {
  double proto_to_entity = 0.0;  // -(1/L) sum_l max_n sim(e_n, p_l)
  double entity_to_proto = 0.0;  // -(1/N) sum_n max_l sim(e_n, p_l)
};

// Collaborative pulls between entities and prototypes. Gradients flow only
// through each argmax pair (ties toward the lower index) and are scaled by
// w_p2e / w_e2p respectively.
CollabReg proto_collab_reg(const Eigen::MatrixXd& entities, const Eigen::MatrixXd& prototypes,
                           double w_p2e, double w_e2p, Eigen::MatrixXd* d_entities,
                           Eigen::MatrixXd* d_prototypes);

// Same, over selected model rows, accumulating into the full gradient
// buffers.
CollabReg user_collab_reg(const PrototypeModel& model, const std::vector<int>& users,
                          double w_p2e, double w_e2p, Gradients* grads);
CollabReg item_collab_reg(const PrototypeModel& model, const std::vector<int>& items,
                          double w_p2e, double w_e2p, Gradients* grads);

// Frobenius norm of the row-normalized prototype Gram matrix (diagonal
// included). Equals sqrt(L) iff rows are mutually orthogonal. Gradient is
// scaled by `weight` and accumulated into `grad` when given.
double distributing_reg(const Eigen::MatrixXd& prototypes, double weight = 1.0,
                        Eigen::MatrixXd* grad = nullptr);

}  // namespace protofair
