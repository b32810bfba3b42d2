#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protofair/synthetic.hpp"
#include "protofair/train_config.hpp"

namespace protofair {

struct DataConfig {
  std::string interactions;  // input path
  std::string metadata;      // optional item->country path
  std::string labels;        // optional item->label path
  int min_user_interactions = 0;
  int min_item_interactions = 0;
  bool require_country = false;
  double min_country_coverage = 0.0;  // fraction of surviving items, in [0,1]
  int n_test_negatives = 99;
  std::vector<std::string> over_countries;   // explicit group lists; both empty
  std::vector<std::string> under_countries;  // = derive quantile bands instead
};

// One named training variant: the base TrainConfig patched by `overrides`
// (TrainConfig keys only). Grid axes expand into the cartesian product of
// variants before training.
struct AblationVariant {
  std::string name;
  nlohmann::json overrides;
  nlohmann::json grid;  // object: field -> list of values; may be empty
};

struct EvalConfig {
  std::string comparison = "comparison.tsv";  // relative to out_dir
  bool detail = false;
};

struct ExplainConfig {
  std::vector<std::string> items;  // raw item keys; empty = auto-sample
  std::string variant;             // empty = first configured variant
  int n_protos = 5;
  int m_exemplars = 1;
  std::string projection = "both";  // items | prototypes | both
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
  DataConfig data;
  SynthSpec synth;
  TrainConfig train;  // train.seed always mirrors the top-level seed
  std::vector<AblationVariant> ablations;
  EvalConfig eval;
  ExplainConfig explain;

  void validate() const;  // structural checks; commands validate their own sections
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Parses the file and applies `--set key=value` overrides (dotted paths into
// the JSON document; values parsed as JSON, falling back to strings).
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

void apply_override(nlohmann::json& doc, const std::string& assignment);

// Expands grids and fills in a lone default variant; names checked unique.
std::vector<std::pair<std::string, TrainConfig>> expand_variants(const RunConfig& cfg);

}  // namespace protofair
