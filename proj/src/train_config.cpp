#include "protofair/train_config.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "protofair/common.hpp"
#include "protofair/json_util.hpp"

namespace protofair {

ModelKind TrainConfig::kind() const {
  if (model_kind == "mf") return ModelKind::kMatrixFactorization;
  if (model_kind == "protomf") return ModelKind::kProtoMF;
  throw ConfigError("model_kind must be 'mf' or 'protomf', got '" + model_kind + "'");
}

void TrainConfig::validate() const {
  kind();
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (model_kind == "protomf") {
    if (n_user_prototypes < 1 || n_item_prototypes < 1)
      throw ConfigError("prototype counts must be >= 1");
    if (k_user < 1 || k_user > n_user_prototypes)
      throw ConfigError("k_user must lie in [1, n_user_prototypes]");
    if (k_item < 1 || k_item > n_item_prototypes)
      throw ConfigError("k_item must lie in [1, n_item_prototypes]");
  }
  for (double w : {reg_proto_to_user, reg_user_to_proto, reg_proto_to_item,
                   reg_item_to_proto, distribute_user, distribute_item, zerosum})
    if (w < 0.0) throw ConfigError("regularizer weights must be >= 0");
  if (model_kind == "mf") {
    const bool proto_knobs = filter_users || filter_items || reg_proto_to_user != 0.0 ||
                             reg_user_to_proto != 0.0 || reg_proto_to_item != 0.0 ||
                             reg_item_to_proto != 0.0 || distribute_user != 0.0 ||
                             distribute_item != 0.0;
    if (proto_knobs)
      throw ConfigError("prototype filtering/regularizers only apply to model_kind 'protomf'");
  }
  if (n_negatives < 1) throw ConfigError("n_negatives must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (optimizer != "sgd" && optimizer != "adam")
    throw ConfigError("optimizer must be 'sgd' or 'adam', got '" + optimizer + "'");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
    throw ConfigError("adam betas must lie in [0, 1)");
  if (adam_epsilon <= 0.0) throw ConfigError("adam_epsilon must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"model_kind", c.model_kind},
                        {"embedding_dim", c.embedding_dim},
                        {"n_user_prototypes", c.n_user_prototypes},
                        {"n_item_prototypes", c.n_item_prototypes},
                        {"k_user", c.k_user},
                        {"k_item", c.k_item},
                        {"filter_users", c.filter_users},
                        {"filter_items", c.filter_items},
                        {"reg_proto_to_user", c.reg_proto_to_user},
                        {"reg_user_to_proto", c.reg_user_to_proto},
                        {"reg_proto_to_item", c.reg_proto_to_item},
                        {"reg_item_to_proto", c.reg_item_to_proto},
                        {"distribute_user", c.distribute_user},
                        {"distribute_item", c.distribute_item},
                        {"zerosum", c.zerosum},
                        {"n_negatives", c.n_negatives},
                        {"learning_rate", c.learning_rate},
                        {"weight_decay", c.weight_decay},
                        {"optimizer", c.optimizer},
                        {"adam_beta1", c.adam_beta1},
                        {"adam_beta2", c.adam_beta2},
                        {"adam_epsilon", c.adam_epsilon},
                        {"epochs", c.epochs},
                        {"batch_size", c.batch_size},
                        {"eval_every", c.eval_every},
                        {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  check_known_keys(j, "train config",
                   {"model_kind", "embedding_dim", "n_user_prototypes", "n_item_prototypes",
                    "k_user", "k_item", "filter_users", "filter_items", "reg_proto_to_user",
                    "reg_user_to_proto", "reg_proto_to_item", "reg_item_to_proto",
                    "distribute_user", "distribute_item", "zerosum", "n_negatives",
                    "learning_rate", "weight_decay", "optimizer", "adam_beta1", "adam_beta2",
                    "adam_epsilon", "epochs", "batch_size", "eval_every", "seed"});
  TrainConfig c;
  read_field(j, "model_kind", c.model_kind);
  read_field(j, "embedding_dim", c.embedding_dim);
  read_field(j, "n_user_prototypes", c.n_user_prototypes);
  read_field(j, "n_item_prototypes", c.n_item_prototypes);
  read_field(j, "k_user", c.k_user);
  read_field(j, "k_item", c.k_item);
  read_field(j, "filter_users", c.filter_users);
  read_field(j, "filter_items", c.filter_items);
  read_field(j, "reg_proto_to_user", c.reg_proto_to_user);
  read_field(j, "reg_user_to_proto", c.reg_user_to_proto);
  read_field(j, "reg_proto_to_item", c.reg_proto_to_item);
  read_field(j, "reg_item_to_proto", c.reg_item_to_proto);
  read_field(j, "distribute_user", c.distribute_user);
  read_field(j, "distribute_item", c.distribute_item);
  read_field(j, "zerosum", c.zerosum);
  read_field(j, "n_negatives", c.n_negatives);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "weight_decay", c.weight_decay);
  read_field(j, "optimizer", c.optimizer);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "adam_epsilon", c.adam_epsilon);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  if (j.contains("eval_every")) read_field(j, "eval_every", c.eval_every);
  read_field(j, "seed", c.seed);
  return c;
}

std::string config_hash(const TrainConfig& cfg) {
  std::uint64_t h = fnv1a64(train_config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace protofair
