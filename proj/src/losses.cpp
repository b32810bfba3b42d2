#include "protofair/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protofair/common.hpp"

namespace protofair {

void Gradients::resize_like(const PrototypeModel& model) {
  users = Eigen::MatrixXd::Zero(model.users.rows(), model.users.cols());
  items = Eigen::MatrixXd::Zero(model.items.rows(), model.items.cols());
  user_protos = Eigen::MatrixXd::Zero(model.user_protos.rows(), model.user_protos.cols());
  item_protos = Eigen::MatrixXd::Zero(model.item_protos.rows(), model.item_protos.cols());
  user_to_item_space =
      Eigen::MatrixXd::Zero(model.user_to_item_space.rows(), model.user_to_item_space.cols());
  item_to_user_space =
      Eigen::MatrixXd::Zero(model.item_to_user_space.rows(), model.item_to_user_space.cols());
}

void Gradients::set_zero() {
  users.setZero();
  items.setZero();
  user_protos.setZero();
  item_protos.setZero();
  user_to_item_space.setZero();
  item_to_user_space.setZero();
}

namespace {

double floored_norm(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::max(v.norm(), kNormFloor);
}

// Similarity vector against a prototype bank, optionally k-filtered in
// place: masked entries are zeroed, surviving indices listed in `active`.
struct StarCache {
  Eigen::VectorXd values;
  std::vector<int> active;
};

void make_star(const Eigen::Ref<const Eigen::VectorXd>& emb, double emb_norm,
               const Eigen::MatrixXd& protos, const Eigen::VectorXd& proto_norms, bool filter,
               int k, StarCache& out, std::vector<int>& order_buf) {
  const int n = static_cast<int>(protos.rows());
  out.values = protos * emb;
  for (int l = 0; l < n; ++l) {
    out.values[l] = 1.0 + out.values[l] / (emb_norm * proto_norms[l]);
  }
  out.active.clear();
  if (!filter || k >= n) {
    for (int l = 0; l < n; ++l) out.active.push_back(l);
    return;
  }
  order_buf.resize(n);
  std::iota(order_buf.begin(), order_buf.end(), 0);
  std::partial_sort(order_buf.begin(), order_buf.begin() + k, order_buf.end(),
                    [&](int a, int b) {
                      if (out.values[a] != out.values[b]) return out.values[a] > out.values[b];
                      return a < b;
                    });
  out.active.assign(order_buf.begin(), order_buf.begin() + k);
  std::sort(out.active.begin(), out.active.end());
  Eigen::VectorXd kept = Eigen::VectorXd::Zero(n);
  for (int l : out.active) kept[l] = out.values[l];
  out.values.swap(kept);
}

// Writable view of one gradient-matrix row (rows of column-major matrices
// are strided).
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// Backward through sim(x, p) = 1 + (x . p) / (|x| |p|) with the floored
// norms treated as constants. `cos` is the already-computed cosine term.
void sim_backward(const Eigen::Ref<const Eigen::VectorXd>& x, double nx,
                  const Eigen::Ref<const Eigen::VectorXd>& p, double np, double cos,
                  double upstream, RowRef dx, RowRef dp) {
  const double inv = 1.0 / (nx * np);
  dx += upstream * (p.transpose() * inv - (cos / (nx * nx)) * x.transpose());
  dp += upstream * (x.transpose() * inv - (cos / (np * np)) * p.transpose());
}

// One side of the model, with pivot/candidate roles abstracted so both
// sampled-softmax directions share the same code path.
struct SideRefs {
  const Eigen::MatrixXd* pivot_embs;
  const Eigen::MatrixXd* cand_embs;
  const Eigen::MatrixXd* pivot_protos;
  const Eigen::MatrixXd* cand_protos;
  const Eigen::MatrixXd* pivot_to_cand;  // maps pivot into candidate-prototype space
  const Eigen::MatrixXd* cand_to_pivot;
  int k_pivot = 0;
  int k_cand = 0;
  Eigen::MatrixXd* d_pivot_embs = nullptr;
  Eigen::MatrixXd* d_cand_embs = nullptr;
  Eigen::MatrixXd* d_pivot_protos = nullptr;
  Eigen::MatrixXd* d_cand_protos = nullptr;
  Eigen::MatrixXd* d_pivot_to_cand = nullptr;
  Eigen::MatrixXd* d_cand_to_pivot = nullptr;
};

SideRefs user_side(const PrototypeModel& model, Gradients* grads) {
  SideRefs s;
  s.pivot_embs = &model.users;
  s.cand_embs = &model.items;
  s.pivot_protos = &model.user_protos;
  s.cand_protos = &model.item_protos;
  s.pivot_to_cand = &model.user_to_item_space;
  s.cand_to_pivot = &model.item_to_user_space;
  s.k_pivot = model.k_user;
  s.k_cand = model.k_item;
  if (grads != nullptr) {
    s.d_pivot_embs = &grads->users;
    s.d_cand_embs = &grads->items;
    s.d_pivot_protos = &grads->user_protos;
    s.d_cand_protos = &grads->item_protos;
    s.d_pivot_to_cand = &grads->user_to_item_space;
    s.d_cand_to_pivot = &grads->item_to_user_space;
  }
  return s;
}

SideRefs item_side(const PrototypeModel& model, Gradients* grads) {
  SideRefs s;
  s.pivot_embs = &model.items;
  s.cand_embs = &model.users;
  s.pivot_protos = &model.item_protos;
  s.cand_protos = &model.user_protos;
  s.pivot_to_cand = &model.item_to_user_space;
  s.cand_to_pivot = &model.user_to_item_space;
  s.k_pivot = model.k_item;
  s.k_cand = model.k_user;
  if (grads != nullptr) {
    s.d_pivot_embs = &grads->items;
    s.d_cand_embs = &grads->users;
    s.d_pivot_protos = &grads->item_protos;
    s.d_cand_protos = &grads->user_protos;
    s.d_pivot_to_cand = &grads->item_to_user_space;
    s.d_cand_to_pivot = &grads->user_to_item_space;
  }
  return s;
}

enum class Head { kSoftmax, kZeroSum };

// Loss over the candidate scores of one example (positive first). Fills
// dscores with the example-level gradient.
double head_loss(Head head, const Eigen::VectorXd& scores, Eigen::VectorXd& dscores) {
  const int n = static_cast<int>(scores.size());
  dscores.setZero(n);
  if (head == Head::kSoftmax) {
    if (n == 1) return 0.0;  // positive alone: probability one, no gradient
    const double m = scores.maxCoeff();
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(scores[j] - m);
    for (int j = 0; j < n; ++j) dscores[j] = std::exp(scores[j] - m) / z;
    dscores[0] -= 1.0;
    return std::log(z) - (scores[0] - m);
  }
  if (n < 2) throw DataError("score-difference penalty needs at least one negative per positive");
  const double inv = 1.0 / (n - 1);
  double total = 0.0;
  for (int j = 1; j < n; ++j) {
    const double diff = scores[0] - scores[j];
    total += diff * diff;
    dscores[0] += 2.0 * inv * diff;
    dscores[j] = -2.0 * inv * diff;
  }
  return total * inv;
}

void check_index(int idx, int limit, const char* what) {
  if (idx < 0 || idx >= limit) {
    throw DataError(std::string(what) + " index out of range: " + std::to_string(idx));
  }
}

double batch_loss(const PrototypeModel& model, const std::vector<Example>& batch, bool user_pivot,
                  bool use_filtering, Head head, double weight, Gradients* grads) {
  if (batch.empty()) return 0.0;
  const bool mf = model.kind == ModelKind::kMatrixFactorization;
  const SideRefs side =
      user_pivot ? user_side(model, grads) : item_side(model, grads);
  const int n_pivots = static_cast<int>(side.pivot_embs->rows());
  const int n_cands = static_cast<int>(side.cand_embs->rows());

  Eigen::VectorXd pivot_proto_norms, cand_proto_norms;
  if (!mf) {
    pivot_proto_norms.resize(side.pivot_protos->rows());
    for (int l = 0; l < pivot_proto_norms.size(); ++l) {
      pivot_proto_norms[l] = floored_norm(side.pivot_protos->row(l).transpose());
    }
    cand_proto_norms.resize(side.cand_protos->rows());
    for (int l = 0; l < cand_proto_norms.size(); ++l) {
      cand_proto_norms[l] = floored_norm(side.cand_protos->row(l).transpose());
    }
  }

  const double grad_scale = weight / static_cast<double>(batch.size());
  double total = 0.0;
  StarCache pivot_star;
  std::vector<StarCache> cand_stars;
  std::vector<Eigen::VectorXd> cand_hats;
  std::vector<double> cand_norms;
  std::vector<int> cands, order_buf;
  Eigen::VectorXd scores, dscores, pivot_hat, d_pivot_star, d_pivot_hat, d_cand_hat;

  for (const Example& ex : batch) {
    check_index(ex.pivot, n_pivots, user_pivot ? "user" : "item");
    cands.clear();
    cands.push_back(ex.positive);
    cands.insert(cands.end(), ex.negatives.begin(), ex.negatives.end());
    const int nc = static_cast<int>(cands.size());
    for (int c : cands) check_index(c, n_cands, user_pivot ? "item" : "user");
    scores.resize(nc);

    if (mf) {
      const auto u = side.pivot_embs->row(ex.pivot);
      for (int j = 0; j < nc; ++j) scores[j] = u.dot(side.cand_embs->row(cands[j]));
      total += head_loss(head, scores, dscores);
      if (grads != nullptr) {
        dscores *= grad_scale;
        for (int j = 0; j < nc; ++j) {
          side.d_pivot_embs->row(ex.pivot) += dscores[j] * side.cand_embs->row(cands[j]);
          side.d_cand_embs->row(cands[j]) += dscores[j] * u;
        }
      }
      continue;
    }

    const Eigen::VectorXd pivot_emb = side.pivot_embs->row(ex.pivot).transpose();
    const double pivot_norm = floored_norm(pivot_emb);
    make_star(pivot_emb, pivot_norm, *side.pivot_protos, pivot_proto_norms, use_filtering,
              side.k_pivot, pivot_star, order_buf);
    pivot_hat = *side.pivot_to_cand * pivot_emb;

    cand_stars.resize(nc);
    cand_hats.resize(nc);
    cand_norms.resize(nc);
    for (int j = 0; j < nc; ++j) {
      const Eigen::VectorXd cand_emb = side.cand_embs->row(cands[j]).transpose();
      cand_norms[j] = floored_norm(cand_emb);
      make_star(cand_emb, cand_norms[j], *side.cand_protos, cand_proto_norms, use_filtering,
                side.k_cand, cand_stars[j], order_buf);
      cand_hats[j] = *side.cand_to_pivot * cand_emb;
      scores[j] = pivot_star.values.dot(cand_hats[j]) + pivot_hat.dot(cand_stars[j].values);
    }

    total += head_loss(head, scores, dscores);
    if (grads == nullptr) continue;
    dscores *= grad_scale;

    d_pivot_star.setZero(pivot_star.values.size());
    d_pivot_hat.setZero(pivot_hat.size());
    for (int j = 0; j < nc; ++j) {
      const double da = dscores[j];
      d_pivot_star += da * cand_hats[j];
      d_pivot_hat += da * cand_stars[j].values;

      const Eigen::VectorXd cand_emb = side.cand_embs->row(cands[j]).transpose();
      d_cand_hat = da * pivot_star.values;
      *side.d_cand_to_pivot += d_cand_hat * cand_emb.transpose();
      side.d_cand_embs->row(cands[j]) += (side.cand_to_pivot->transpose() * d_cand_hat).transpose();
      for (int m : cand_stars[j].active) {
        const double cos = cand_stars[j].values[m] - 1.0;
        sim_backward(cand_emb, cand_norms[j], side.cand_protos->row(m).transpose(),
                     cand_proto_norms[m], cos, da * pivot_hat[m],
                     side.d_cand_embs->row(cands[j]), side.d_cand_protos->row(m));
      }
    }
    *side.d_pivot_to_cand += d_pivot_hat * pivot_emb.transpose();
    side.d_pivot_embs->row(ex.pivot) += (side.pivot_to_cand->transpose() * d_pivot_hat).transpose();
    for (int l : pivot_star.active) {
      const double cos = pivot_star.values[l] - 1.0;
      sim_backward(pivot_emb, pivot_norm, side.pivot_protos->row(l).transpose(),
                   pivot_proto_norms[l], cos, d_pivot_star[l], side.d_pivot_embs->row(ex.pivot),
                   side.d_pivot_protos->row(l));
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

double rec_loss_user(const PrototypeModel& model, const std::vector<Example>& batch,
                     bool use_filtering, Gradients* grads) {
  return batch_loss(model, batch, true, use_filtering, Head::kSoftmax, 1.0, grads);
}

double rec_loss_item(const PrototypeModel& model, const std::vector<Example>& batch,
                     bool use_filtering, Gradients* grads) {
  return batch_loss(model, batch, false, use_filtering, Head::kSoftmax, 1.0, grads);
}

double zerosum_loss_user(const PrototypeModel& model, const std::vector<Example>& batch,
                         bool use_filtering, double weight, Gradients* grads) {
  return batch_loss(model, batch, true, use_filtering, Head::kZeroSum, weight, grads);
}

double zerosum_loss_item(const PrototypeModel& model, const std::vector<Example>& batch,
                         bool use_filtering, double weight, Gradients* grads) {
  return batch_loss(model, batch, false, use_filtering, Head::kZeroSum, weight, grads);
}

double zerosum_reg(double positive_score, const std::vector<double>& negative_scores,
                   double* d_positive, std::vector<double>* d_negatives) {
  if (negative_scores.empty()) {
    throw DataError("score-difference penalty needs at least one negative per positive");
  }
  const double inv = 1.0 / static_cast<double>(negative_scores.size());
  if (d_positive != nullptr) *d_positive = 0.0;
  if (d_negatives != nullptr) d_negatives->assign(negative_scores.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < negative_scores.size(); ++j) {
    const double diff = positive_score - negative_scores[j];
    total += diff * diff;
    if (d_positive != nullptr) *d_positive += 2.0 * inv * diff;
    if (d_negatives != nullptr) (*d_negatives)[j] = -2.0 * inv * diff;
  }
  return total * inv;
}

namespace {

CollabReg collab_core(const Eigen::MatrixXd& entities, const std::vector<int>& rows,
                      const Eigen::MatrixXd& prototypes, double w_p2e, double w_e2p,
                      Eigen::MatrixXd* d_entities, Eigen::MatrixXd* d_prototypes) {
  const int n = static_cast<int>(rows.size());
  const int n_protos = static_cast<int>(prototypes.rows());
  if (n == 0 || n_protos == 0) {
    throw DataError("collaborative pull needs at least one entity and one prototype");
  }

  Eigen::VectorXd proto_norms(n_protos);
  for (int l = 0; l < n_protos; ++l) {
    proto_norms[l] = floored_norm(prototypes.row(l).transpose());
  }
  std::vector<double> entity_norms(n);
  Eigen::MatrixXd sims(n, n_protos);
  for (int r = 0; r < n; ++r) {
    const Eigen::VectorXd e = entities.row(rows[r]).transpose();
    entity_norms[r] = floored_norm(e);
    for (int l = 0; l < n_protos; ++l) {
      sims(r, l) = 1.0 + prototypes.row(l).transpose().dot(e) / (entity_norms[r] * proto_norms[l]);
    }
  }

  auto backward = [&](int r, int l, double upstream) {
    if (d_entities == nullptr && d_prototypes == nullptr) return;
    Eigen::RowVectorXd de = Eigen::RowVectorXd::Zero(entities.cols());
    Eigen::RowVectorXd dp = Eigen::RowVectorXd::Zero(entities.cols());
    sim_backward(entities.row(rows[r]).transpose(), entity_norms[r],
                 prototypes.row(l).transpose(), proto_norms[l], sims(r, l) - 1.0, upstream, de,
                 dp);
    if (d_entities != nullptr) d_entities->row(rows[r]) += de;
    if (d_prototypes != nullptr) d_prototypes->row(l) += dp;
  };

  CollabReg out;
  for (int l = 0; l < n_protos; ++l) {
    int best = 0;
    for (int r = 1; r < n; ++r) {
      if (sims(r, l) > sims(best, l)) best = r;
    }
    out.proto_to_entity -= sims(best, l) / n_protos;
    if (w_p2e != 0.0) backward(best, l, -w_p2e / n_protos);
  }
  for (int r = 0; r < n; ++r) {
    int best = 0;
    for (int l = 1; l < n_protos; ++l) {
      if (sims(r, l) > sims(r, best)) best = l;
    }
    out.entity_to_proto -= sims(r, best) / n;
    if (w_e2p != 0.0) backward(r, best, -w_e2p / n);
  }
  return out;
}

}  // namespace

CollabReg proto_collab_reg(const Eigen::MatrixXd& entities, const Eigen::MatrixXd& prototypes,
                           double w_p2e, double w_e2p, Eigen::MatrixXd* d_entities,
                           Eigen::MatrixXd* d_prototypes) {
  std::vector<int> rows(entities.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return collab_core(entities, rows, prototypes, w_p2e, w_e2p, d_entities, d_prototypes);
}

CollabReg user_collab_reg(const PrototypeModel& model, const std::vector<int>& users,
                          double w_p2e, double w_e2p, Gradients* grads) {
  return collab_core(model.users, users, model.user_protos, w_p2e, w_e2p,
                     grads != nullptr ? &grads->users : nullptr,
                     grads != nullptr ? &grads->user_protos : nullptr);
}

CollabReg item_collab_reg(const PrototypeModel& model, const std::vector<int>& items,
                          double w_p2e, double w_e2p, Gradients* grads) {
  return collab_core(model.items, items, model.item_protos, w_p2e, w_e2p,
                     grads != nullptr ? &grads->items : nullptr,
                     grads != nullptr ? &grads->item_protos : nullptr);
}

double distributing_reg(const Eigen::MatrixXd& prototypes, double weight, Eigen::MatrixXd* grad) {
  const int n = static_cast<int>(prototypes.rows());
  if (n == 0) throw DataError("distributing penalty needs at least one prototype");

  Eigen::VectorXd norms(n);
  Eigen::MatrixXd unit = prototypes;
  for (int l = 0; l < n; ++l) {
    norms[l] = floored_norm(prototypes.row(l).transpose());
    unit.row(l) /= norms[l];
  }
  const Eigen::MatrixXd gram = unit * unit.transpose();
  const double value = gram.norm();  // Frobenius; >= sqrt(n) since diagonal is ones

  if (grad != nullptr && weight != 0.0) {
    // d|G|_F / dUnit = 2 (G / |G|_F) Unit, then back through the row
    // normalization: project out the radial component and rescale.
    const Eigen::MatrixXd d_unit = (2.0 / value) * gram * unit;
    for (int l = 0; l < n; ++l) {
      const Eigen::RowVectorXd g = d_unit.row(l);
      const double radial = g.dot(unit.row(l));
      grad->row(l) += (weight / norms[l]) * (g - radial * unit.row(l));
    }
  }
  return value;
}

}  // namespace protofair
