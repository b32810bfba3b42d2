#include "protofair/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "protofair/common.hpp"
#include "protofair/optimizer.hpp"

namespace protofair {

double combine_loss(const TrainConfig& cfg, const LossBreakdown& p) {
  return p.rec_user + p.rec_item + cfg.reg_proto_to_user * p.reg_proto_to_user +
         cfg.reg_user_to_proto * p.reg_user_to_proto +
         cfg.reg_proto_to_item * p.reg_proto_to_item +
         cfg.reg_item_to_proto * p.reg_item_to_proto + cfg.distribute_user * p.dist_user +
         cfg.distribute_item * p.dist_item + cfg.zerosum * p.zerosum;
}

namespace {

void check_finite(double v, const char* component, int epoch) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + component + " loss at epoch " +
                       std::to_string(epoch));
  }
}

// Uniform negatives avoiding the pivot's history; without replacement
// within one example. Draw count depends only on the data, so parallel
// runs with different weights consume identical streams.
void sample_negatives(std::mt19937_64& rng, int n_total, const std::vector<int>& history,
                      int n_negatives, std::vector<int>& out) {
  out.clear();
  std::uniform_int_distribution<int> pick(0, n_total - 1);
  while (static_cast<int>(out.size()) < n_negatives) {
    const int c = pick(rng);
    if (std::binary_search(history.begin(), history.end(), c)) continue;
    if (std::find(out.begin(), out.end(), c) != out.end()) continue;
    out.push_back(c);
  }
}

// Hit rate of the held-out positives within the top 10 of each user's
// candidate list; used only for best-snapshot tracking.
double holdout_hit_rate(const PrototypeModel& model, const SplitDataset& split,
                        bool use_filtering) {
  int hits = 0, n = 0;
  std::vector<int> cands;
  for (int u = 0; u < model.num_users(); ++u) {
    if (split.test_negatives[u].empty()) continue;
    cands.clear();
    cands.push_back(split.test_positive[u]);
    cands.insert(cands.end(), split.test_negatives[u].begin(), split.test_negatives[u].end());
    const Eigen::VectorXd scores = score_all_items(model, u, cands, use_filtering);
    int rank = 1;
    for (int j = 1; j < static_cast<int>(cands.size()); ++j) {
      if (scores[j] > scores[0] || (scores[j] == scores[0] && cands[j] < cands[0])) ++rank;
    }
    hits += rank <= 10 ? 1 : 0;
    ++n;
  }
  return n > 0 ? static_cast<double>(hits) / n : 0.0;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const SplitDataset& split,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const InteractionTable& table = split.train;
  if (table.interactions.empty()) throw DataError("training table has no interactions");

  for (int u = 0; u < table.num_users; ++u) {
    if (table.num_items - static_cast<int>(table.user_items[u].size()) < cfg.n_negatives) {
      throw DataError("user " + std::to_string(u) + " leaves fewer than n_negatives items");
    }
  }
  for (int i = 0; i < table.num_items; ++i) {
    if (table.num_users - static_cast<int>(table.item_users[i].size()) < cfg.n_negatives) {
      throw DataError("item " + std::to_string(i) + " leaves fewer than n_negatives users");
    }
  }

  TrainResult result;
  result.model = make_model(cfg.kind(), table.num_users, table.num_items, cfg.embedding_dim,
                            cfg.n_user_prototypes, cfg.n_item_prototypes, cfg.effective_k_user(),
                            cfg.effective_k_item(), sub_seed(cfg.seed, "init"));
  PrototypeModel& model = result.model;

  Optimizer opt(cfg);
  opt.add_param(&model.users);
  opt.add_param(&model.items);
  opt.add_param(&model.user_protos);
  opt.add_param(&model.item_protos);
  opt.add_param(&model.user_to_item_space);
  opt.add_param(&model.item_to_user_space);

  Gradients grads;
  grads.resize_like(model);
  const std::vector<const Eigen::MatrixXd*> grad_list = {
      &grads.users,          &grads.items,          &grads.user_protos,
      &grads.item_protos,    &grads.user_to_item_space, &grads.item_to_user_space};

  std::mt19937_64 rng_shuffle(sub_seed(cfg.seed, "shuffle"));
  std::mt19937_64 rng_neg(sub_seed(cfg.seed, "negatives"));

  const std::size_t n_pairs = table.interactions.size();
  std::vector<std::size_t> order(n_pairs);
  std::iota(order.begin(), order.end(), 0);

  const bool user_collab = cfg.reg_proto_to_user != 0.0 || cfg.reg_user_to_proto != 0.0;
  const bool item_collab = cfg.reg_proto_to_item != 0.0 || cfg.reg_item_to_proto != 0.0;
  const bool filt = cfg.any_filtering();

  std::vector<Example> user_batch, item_batch;
  std::vector<int> batch_users, batch_items;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_shuffle);
    const std::size_t n_batches = (n_pairs + cfg.batch_size - 1) / cfg.batch_size;
    LossBreakdown sums;

    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(lo + cfg.batch_size, n_pairs);

      user_batch.clear();
      item_batch.clear();
      batch_users.clear();
      batch_items.clear();
      for (std::size_t p = lo; p < hi; ++p) {
        const auto [u, i] = table.interactions[order[p]];
        Example ex;
        ex.pivot = u;
        ex.positive = i;
        sample_negatives(rng_neg, table.num_items, table.user_items[u], cfg.n_negatives,
                         ex.negatives);
        batch_users.push_back(u);
        batch_items.push_back(i);
        batch_items.insert(batch_items.end(), ex.negatives.begin(), ex.negatives.end());
        user_batch.push_back(std::move(ex));
      }
      for (std::size_t p = lo; p < hi; ++p) {
        const auto [u, i] = table.interactions[order[p]];
        Example ex;
        ex.pivot = i;
        ex.positive = u;
        sample_negatives(rng_neg, table.num_users, table.item_users[i], cfg.n_negatives,
                         ex.negatives);
        batch_users.insert(batch_users.end(), ex.negatives.begin(), ex.negatives.end());
        item_batch.push_back(std::move(ex));
      }
      std::sort(batch_users.begin(), batch_users.end());
      batch_users.erase(std::unique(batch_users.begin(), batch_users.end()), batch_users.end());
      std::sort(batch_items.begin(), batch_items.end());
      batch_items.erase(std::unique(batch_items.begin(), batch_items.end()), batch_items.end());

      grads.set_zero();
      LossBreakdown parts;
      parts.rec_user = rec_loss_user(model, user_batch, filt, &grads);
      check_finite(parts.rec_user, "rec_user", epoch);
      parts.rec_item = rec_loss_item(model, item_batch, filt, &grads);
      check_finite(parts.rec_item, "rec_item", epoch);

      if (user_collab) {
        const CollabReg r = user_collab_reg(model, batch_users, cfg.reg_proto_to_user,
                                            cfg.reg_user_to_proto, &grads);
        parts.reg_proto_to_user = r.proto_to_entity;
        parts.reg_user_to_proto = r.entity_to_proto;
        check_finite(parts.reg_proto_to_user, "reg_proto_to_user", epoch);
        check_finite(parts.reg_user_to_proto, "reg_user_to_proto", epoch);
      }
      if (item_collab) {
        const CollabReg r = item_collab_reg(model, batch_items, cfg.reg_proto_to_item,
                                            cfg.reg_item_to_proto, &grads);
        parts.reg_proto_to_item = r.proto_to_entity;
        parts.reg_item_to_proto = r.entity_to_proto;
        check_finite(parts.reg_proto_to_item, "reg_proto_to_item", epoch);
        check_finite(parts.reg_item_to_proto, "reg_item_to_proto", epoch);
      }
      if (cfg.distribute_user != 0.0) {
        parts.dist_user =
            distributing_reg(model.user_protos, cfg.distribute_user, &grads.user_protos);
        check_finite(parts.dist_user, "dist_user", epoch);
      }
      if (cfg.distribute_item != 0.0) {
        parts.dist_item =
            distributing_reg(model.item_protos, cfg.distribute_item, &grads.item_protos);
        check_finite(parts.dist_item, "dist_item", epoch);
      }
      if (cfg.zerosum != 0.0) {
        parts.zerosum = zerosum_loss_user(model, user_batch, filt, cfg.zerosum, &grads) +
                        zerosum_loss_item(model, item_batch, filt, cfg.zerosum, &grads);
        check_finite(parts.zerosum, "zerosum", epoch);
      }

      sums.rec_user += parts.rec_user;
      sums.rec_item += parts.rec_item;
      sums.reg_proto_to_user += parts.reg_proto_to_user;
      sums.reg_user_to_proto += parts.reg_user_to_proto;
      sums.reg_proto_to_item += parts.reg_proto_to_item;
      sums.reg_item_to_proto += parts.reg_item_to_proto;
      sums.dist_user += parts.dist_user;
      sums.dist_item += parts.dist_item;
      sums.zerosum += parts.zerosum;

      opt.step(grad_list);
    }

    LossBreakdown epoch_mean;
    const double inv = 1.0 / static_cast<double>(n_batches);
    epoch_mean.rec_user = sums.rec_user * inv;
    epoch_mean.rec_item = sums.rec_item * inv;
    epoch_mean.reg_proto_to_user = sums.reg_proto_to_user * inv;
    epoch_mean.reg_user_to_proto = sums.reg_user_to_proto * inv;
    epoch_mean.reg_proto_to_item = sums.reg_proto_to_item * inv;
    epoch_mean.reg_item_to_proto = sums.reg_item_to_proto * inv;
    epoch_mean.dist_user = sums.dist_user * inv;
    epoch_mean.dist_item = sums.dist_item * inv;
    epoch_mean.zerosum = sums.zerosum * inv;
    epoch_mean.total = combine_loss(cfg, epoch_mean);
    result.epoch_losses.push_back(epoch_mean);

    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const double hr = holdout_hit_rate(model, split, filt);
      if (result.best_epoch < 0 || hr > result.best_hr) {
        result.best_hr = hr;
        result.best_epoch = epoch;
        result.best_model = model;
      }
    }
    if (on_epoch) on_epoch(epoch, epoch_mean);
  }
  return result;
}

}  // namespace protofair
