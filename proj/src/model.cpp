#include "protofair/model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "protofair/common.hpp"

namespace protofair {

int TransformedVector::active_count() const {
  return static_cast<int>(std::count(active.begin(), active.end(), std::uint8_t{1}));
}

double shifted_cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw DataError("shifted_cosine: dimension mismatch");
  double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw NumericError("shifted_cosine: zero-norm input");
  return 1.0 + x.dot(y) / (nx * ny);
}

double shifted_cosine_floored(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double nx = std::max(x.norm(), kNormFloor);
  double ny = std::max(y.norm(), kNormFloor);
  return 1.0 + x.dot(y) / (nx * ny);
}

TransformedVector transform(const Eigen::VectorXd& embedding,
                            const Eigen::MatrixXd& prototypes) {
  if (embedding.size() != prototypes.cols())
    throw DataError("transform: embedding dimension does not match prototypes");
  const int l = static_cast<int>(prototypes.rows());
  TransformedVector out;
  out.values.resize(l);
  out.active.assign(l, 1);
  double n_emb = std::max(embedding.norm(), kNormFloor);
  for (int j = 0; j < l; ++j) {
    double n_proto = std::max(prototypes.row(j).norm(), kNormFloor);
    out.values[j] = 1.0 + prototypes.row(j).dot(embedding) / (n_emb * n_proto);
  }
  return out;
}

TransformedVector k_filter(const TransformedVector& t, int k) {
  const int l = t.size();
  if (k < 1 || k > l)
    throw ConfigError("k_filter: k = " + std::to_string(k) + " out of range [1, " +
                      std::to_string(l) + "]");
  std::vector<int> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return t.values[a] > t.values[b]; });
  TransformedVector out;
  out.values = Eigen::VectorXd::Zero(l);
  out.active.assign(l, 0);
  for (int r = 0; r < k; ++r) {
    int j = order[r];
    out.values[j] = t.values[j];
    out.active[j] = 1;
  }
  return out;
}

namespace {

void check_indices(const PrototypeModel& model, int user, int item) {
  if (user < 0 || user >= model.num_users())
    throw DataError("user index " + std::to_string(user) + " out of range");
  if (item < 0 || item >= model.num_items())
    throw DataError("item index " + std::to_string(item) + " out of range");
}

double score_item_against(const PrototypeModel& model, const TransformedVector& u_star,
                          const Eigen::VectorXd& u_hat, int item, bool use_filtering) {
  Eigen::VectorXd i = model.items.row(item);
  TransformedVector i_star = transform(i, model.item_protos);
  if (use_filtering) i_star = k_filter(i_star, model.k_item);
  Eigen::VectorXd i_hat = model.item_to_user_space * i;  // L_u
  return u_star.values.dot(i_hat) + u_hat.dot(i_star.values);
}

}  // namespace

double affinity(const PrototypeModel& model, int user, int item, bool use_filtering) {
  check_indices(model, user, item);
  if (model.kind == ModelKind::kMatrixFactorization)
    return model.users.row(user).dot(model.items.row(item));

  Eigen::VectorXd u = model.users.row(user);
  TransformedVector u_star = transform(u, model.user_protos);
  if (use_filtering) u_star = k_filter(u_star, model.k_user);
  Eigen::VectorXd u_hat = model.user_to_item_space * u;  // L_i
  return score_item_against(model, u_star, u_hat, item, use_filtering);
}

Eigen::VectorXd score_all_items(const PrototypeModel& model, int user,
                                const std::vector<int>& candidates, bool use_filtering) {
  if (candidates.empty()) throw DataError("score_all_items: empty candidate list");
  Eigen::VectorXd scores(candidates.size());

  if (model.kind == ModelKind::kMatrixFactorization) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      check_indices(model, user, candidates[c]);
      scores[c] = model.users.row(user).dot(model.items.row(candidates[c]));
    }
    return scores;
  }

  check_indices(model, user, 0);
  Eigen::VectorXd u = model.users.row(user);
  TransformedVector u_star = transform(u, model.user_protos);
  if (use_filtering) u_star = k_filter(u_star, model.k_user);
  Eigen::VectorXd u_hat = model.user_to_item_space * u;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    check_indices(model, user, candidates[c]);
    scores[c] = score_item_against(model, u_star, u_hat, candidates[c], use_filtering);
  }
  return scores;
}

PrototypeModel make_model(ModelKind kind, int n_users, int n_items, int dim,
                          int n_user_protos, int n_item_protos, int k_user, int k_item,
                          std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || dim < 1)
    throw ConfigError("model needs positive user/item counts and dimension");
  if (kind == ModelKind::kProtoMF) {
    if (n_user_protos < 1 || n_item_protos < 1)
      throw ConfigError("prototype counts must be >= 1");
    if (k_user < 1 || k_user > n_user_protos || k_item < 1 || k_item > n_item_protos)
      throw ConfigError("k values must lie within [1, prototype count]");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.05, 0.05);
  auto fill = [&](Eigen::MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = uni(rng);
  };

  PrototypeModel model;
  model.kind = kind;
  fill(model.users, n_users, dim);
  fill(model.items, n_items, dim);
  if (kind == ModelKind::kProtoMF) {
    fill(model.user_protos, n_user_protos, dim);
    fill(model.item_protos, n_item_protos, dim);
    fill(model.user_to_item_space, n_item_protos, dim);
    fill(model.item_to_user_space, n_user_protos, dim);
    model.k_user = k_user;
    model.k_item = k_item;
  }
  return model;
}

}  // namespace protofair
