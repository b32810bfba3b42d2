#pragma once

// Shared helpers for the test binaries: finite-difference gradient checks,
// selection-margin guards, scratch directories and small builders.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "protofair/losses.hpp"
#include "protofair/model.hpp"

namespace protofair::testing {

inline bool exact_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

inline std::vector<Eigen::MatrixXd*> param_matrices(PrototypeModel& m) {
  return {&m.users,          &m.items,
          &m.user_protos,    &m.item_protos,
          &m.user_to_item_space, &m.item_to_user_space};
}

inline std::vector<const Eigen::MatrixXd*> grad_matrices(const Gradients& g) {
  return {&g.users,          &g.items,
          &g.user_protos,    &g.item_protos,
          &g.user_to_item_space, &g.item_to_user_space};
}

// Loss under test: accumulates into grads when non-null, returns the value.
using LossFn = std::function<double(const PrototypeModel&, Gradients*)>;

struct FdReport {
  double max_rel_err = 0.0;
  std::string where;
};

// Central finite differences against the analytic gradient. Errors are
// relative to max(1, |g|) so near-zero gradients are compared absolutely.
inline FdReport fd_check(PrototypeModel& model, const LossFn& f, double h = 1e-5) {
  static const char* names[] = {"users",    "items",    "user_protos",
                                "item_protos", "user_to_item_space",
                                "item_to_user_space"};
  Gradients grads;
  grads.resize_like(model);
  grads.set_zero();
  f(model, &grads);

  FdReport report;
  auto params = param_matrices(model);
  auto analytic = grad_matrices(grads);
  for (std::size_t mi = 0; mi < params.size(); ++mi) {
    Eigen::MatrixXd& p = *params[mi];
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double saved = p(r, c);
        p(r, c) = saved + h;
        const double up = f(model, nullptr);
        p(r, c) = saved - h;
        const double down = f(model, nullptr);
        p(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double g = (*analytic[mi])(r, c);
        const double rel = std::abs(fd - g) / std::max(1.0, std::abs(g));
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.where = std::string(names[mi]) + "(" + std::to_string(r) + "," +
                         std::to_string(c) + ")";
        }
      }
    }
  }
  return report;
}

// Smallest gap between the k-th and (k+1)-th largest similarities across the
// given embedding rows. FD perturbations must stay below this so the filter
// mask is constant during the check.
inline double filter_margin(const Eigen::MatrixXd& emb, const Eigen::MatrixXd& protos,
                            int k) {
  if (k >= protos.rows()) return std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < emb.rows(); ++r) {
    TransformedVector t = transform(emb.row(r).transpose(), protos);
    std::vector<double> v(t.values.data(), t.values.data() + t.values.size());
    std::sort(v.begin(), v.end(), std::greater<double>());
    margin = std::min(margin, v[k - 1] - v[k]);
  }
  return margin;
}

// Gap between the best and second-best similarity on both argmax scans of
// the collaborative pulls (per prototype over entities, per entity over
// prototypes).
inline double collab_margin(const Eigen::MatrixXd& entities,
                            const Eigen::MatrixXd& protos) {
  const Eigen::Index n = entities.rows(), l = protos.rows();
  if (n < 2 && l < 2) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd sims(n, l);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < l; ++c)
      sims(r, c) = shifted_cosine(entities.row(r).transpose(), protos.row(c).transpose());
  double margin = std::numeric_limits<double>::infinity();
  auto gap = [](Eigen::VectorXd v) {
    std::sort(v.data(), v.data() + v.size(), std::greater<double>());
    return v(0) - v(1);
  };
  if (n >= 2)
    for (Eigen::Index c = 0; c < l; ++c) margin = std::min(margin, gap(sims.col(c)));
  if (l >= 2)
    for (Eigen::Index r = 0; r < n; ++r)
      margin = std::min(margin, gap(sims.row(r).transpose()));
  return margin;
}

// Seeded model with parameters scaled up from the tiny init so norms sit
// well away from zero and FD perturbations cannot flip selections.
inline PrototypeModel fd_model(std::uint64_t seed, int n_users, int n_items, int d,
                               int lu, int li, int ku, int ki,
                               ModelKind kind = ModelKind::kProtoMF) {
  PrototypeModel m = make_model(kind, n_users, n_items, d, lu, li, ku, ki, seed);
  for (auto* p : param_matrices(m)) *p *= 10.0;
  return m;
}

// Instance with comfortable selection margins, so FD perturbations cannot
// flip a filter mask or an argmax pair. Consumes seeds until one qualifies.
inline PrototypeModel margin_safe_model(std::mt19937_64& seeds, int n_users, int n_items,
                                        int d, int lu, int li, int ku, int ki,
                                        ModelKind kind = ModelKind::kProtoMF) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    PrototypeModel m = fd_model(seeds(), n_users, n_items, d, lu, li, ku, ki, kind);
    if (filter_margin(m.users, m.user_protos, ku) > 1e-3 &&
        filter_margin(m.items, m.item_protos, ki) > 1e-3 &&
        collab_margin(m.users, m.user_protos) > 1e-3 &&
        collab_margin(m.items, m.item_protos) > 1e-3)
      return m;
  }
  throw std::runtime_error("no margin-safe instance found");
}

// Batch of examples with distinct candidates per pivot.
inline std::vector<Example> random_batch(std::mt19937_64& rng, int n_pivots,
                                         int n_candidates, int batch_size, int n_neg) {
  std::vector<Example> batch(batch_size);
  std::vector<int> pool(n_candidates);
  std::iota(pool.begin(), pool.end(), 0);
  std::uniform_int_distribution<int> pick(0, n_pivots - 1);
  for (auto& ex : batch) {
    ex.pivot = pick(rng);
    std::shuffle(pool.begin(), pool.end(), rng);
    ex.positive = pool[0];
    ex.negatives.assign(pool.begin() + 1, pool.begin() + 1 + n_neg);
  }
  return batch;
}

// Scratch directory removed on scope exit.
struct ScopedTempDir {
  std::filesystem::path path;

  explicit ScopedTempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~ScopedTempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace protofair::testing
