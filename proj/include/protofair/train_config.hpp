#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "protofair/model.hpp"

namespace protofair {

// All training hyperparameters, serialized verbatim into checkpoints and the
// effective-config artifacts.
struct TrainConfig {
  std::string model_kind = "protomf";  // "mf" | "protomf"
  int embedding_dim = 16;
  int n_user_prototypes = 8;
  int n_item_prototypes = 8;
  int k_user = 8;
  int k_item = 8;
  bool filter_users = false;
  bool filter_items = false;
  double reg_proto_to_user = 0.0;  // prototype -> nearest-user pull
  double reg_user_to_proto = 0.0;  // user -> nearest-prototype pull
  double reg_proto_to_item = 0.0;
  double reg_item_to_proto = 0.0;
  double distribute_user = 0.0;    // prototype-spreading penalty weights
  double distribute_item = 0.0;
  double zerosum = 0.0;            // score-difference penalty weight
  int n_negatives = 10;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::string optimizer = "adam";  // "sgd" | "adam"
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 10;
  int batch_size = 256;
  // When > 0, hit rate on the held-out set is measured every this many
  // epochs and the best snapshot is returned alongside the final model.
  int eval_every = 0;
  std::uint64_t seed = 0;

  ModelKind kind() const;
  // k values actually used: disabling a side's filtering pins its k to L,
  // making the filter an identity.
  int effective_k_user() const { return filter_users ? k_user : n_user_prototypes; }
  int effective_k_item() const { return filter_items ? k_item : n_item_prototypes; }
  bool any_filtering() const { return filter_users || filter_items; }

  void validate() const;  // throws ConfigError
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Stable 64-bit content hash of the canonical JSON form, as a hex string.
std::string config_hash(const TrainConfig& cfg);

}  // namespace protofair
