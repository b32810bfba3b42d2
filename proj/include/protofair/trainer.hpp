#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "protofair/interactions.hpp"
#include "protofair/losses.hpp"
#include "protofair/model.hpp"
#include "protofair/train_config.hpp"

namespace protofair {

// Per-epoch loss components, each a uniform mean over the epoch's batches.
// `total` is the weight-combined objective actually optimized.
struct LossBreakdown {
  double rec_user = 0.0;
  double rec_item = 0.0;
  double reg_proto_to_user = 0.0;
  double reg_user_to_proto = 0.0;
  double reg_proto_to_item = 0.0;
  double reg_item_to_proto = 0.0;
  double dist_user = 0.0;
  double dist_item = 0.0;
  double zerosum = 0.0;
  double total = 0.0;
};

// Combines raw component values with the configured weights.
double combine_loss(const TrainConfig& cfg, const LossBreakdown& parts);

struct TrainResult {
  PrototypeModel model;                      // after the last epoch
  std::vector<LossBreakdown> epoch_losses;   // one entry per epoch
  std::optional<PrototypeModel> best_model;  // only with eval_every > 0
  int best_epoch = -1;                       // 1-based
  double best_hr = 0.0;
};

using EpochCallback = std::function<void(int epoch, const LossBreakdown&)>;

// Runs the full sampled-softmax training loop on the split's train table.
// Deterministic for a fixed config: init, shuffles and negative draws all
// derive from labeled streams of config.seed.
TrainResult train(const TrainConfig& config, const SplitDataset& split,
                  const EpochCallback& on_epoch = {});

}  // namespace protofair
