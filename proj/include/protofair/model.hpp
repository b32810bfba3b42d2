#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace protofair {

enum class ModelKind { kMatrixFactorization, kProtoMF };

constexpr double kNormFloor = 1e-12;

// Prototype-based factorization parameters. Entities are represented by
// their shifted-cosine similarities to learned prototype vectors; two linear
// maps carry each embedding into the opposite prototype space.
struct PrototypeModel {
  ModelKind kind = ModelKind::kProtoMF;
  Eigen::MatrixXd users;               // N x d
  Eigen::MatrixXd items;               // M x d
  Eigen::MatrixXd user_protos;         // L_u x d
  Eigen::MatrixXd item_protos;         // L_i x d
  Eigen::MatrixXd user_to_item_space;  // L_i x d, user_hat = W u
  Eigen::MatrixXd item_to_user_space;  // L_u x d, item_hat = W i
  int k_user = 0;                      // in [1, L_u]
  int k_item = 0;                      // in [1, L_i]

  int num_users() const { return static_cast<int>(users.rows()); }
  int num_items() const { return static_cast<int>(items.rows()); }
  int dim() const { return static_cast<int>(users.cols()); }
  int n_user_protos() const { return static_cast<int>(user_protos.rows()); }
  int n_item_protos() const { return static_cast<int>(item_protos.rows()); }
};

// Similarity vector against one prototype set; inactive entries are exactly
// zero and excluded from downstream dot products.
struct TransformedVector {
  Eigen::VectorXd values;
  std::vector<std::uint8_t> active;

  int size() const { return static_cast<int>(values.size()); }
  int active_count() const;
};

// 1 + cos(x, y), range [0,2]. Strict API: zero-norm inputs are an error.
// Training paths use the eps-floored variant so steps through near-zero
// vectors stay finite.
double shifted_cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
double shifted_cosine_floored(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Similarities of one embedding to every prototype row, all entries active.
TransformedVector transform(const Eigen::VectorXd& embedding,
                            const Eigen::MatrixXd& prototypes);

// Keeps the k largest similarities active and zeroes the rest. Ties at the
// k-th value break toward the lower prototype index.
TransformedVector k_filter(const TransformedVector& t, int k);

// Relevance score combining both prototype spaces. With use_filtering the
// user/item similarity vectors are k_user/k_item-filtered first.
double affinity(const PrototypeModel& model, int user, int item, bool use_filtering);

// Batched affinity over a candidate list, sharing the user-side transforms.
Eigen::VectorXd score_all_items(const PrototypeModel& model, int user,
                                const std::vector<int>& candidates, bool use_filtering);

// Seeded uniform init in [-0.05, 0.05] for all parameter matrices.
PrototypeModel make_model(ModelKind kind, int n_users, int n_items, int dim,
                          int n_user_protos, int n_item_protos, int k_user, int k_item,
                          std::uint64_t seed);

}  // namespace protofair
