#include "protofair/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "protofair/artifacts.hpp"
#include "protofair/checkpoint.hpp"
#include "protofair/common.hpp"
#include "protofair/evaluation.hpp"
#include "protofair/explain.hpp"
#include "protofair/trainer.hpp"

namespace protofair {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_effective_config(const RunConfig& cfg, const std::string& command) {
  std::ofstream out(join(cfg.out_dir, command + ".effective.json"), std::ios::trunc);
  if (!out) throw DataError("cannot write effective config in " + cfg.out_dir);
  out << run_config_to_json(cfg).dump(2) << "\n";
}

std::string pct(std::size_t before, std::size_t after) {
  const double drop =
      before == 0 ? 0.0 : 100.0 * (static_cast<double>(before) - after) / before;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", drop);
  return buf;
}

// Filename-safe form of an item key.
std::string sanitize(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ' ' || c == '\0') c = '_';
  }
  return out;
}

void save_dataset_artifacts(const RunConfig& cfg, const InteractionTable& table,
                            const GroupAssignment& groups, const SplitDataset& split) {
  save_table(table, join(cfg.out_dir, "dataset.tsv"));
  save_groups(groups, table, join(cfg.out_dir, "groups.tsv"));
  save_split(split, table, join(cfg.out_dir, "split.tsv"));
}

struct DatasetArtifacts {
  InteractionTable table;
  GroupAssignment groups;
  SplitDataset split;
};

DatasetArtifacts load_dataset_artifacts(const RunConfig& cfg, bool need_split) {
  DatasetArtifacts d;
  d.table = load_table(join(cfg.out_dir, "dataset.tsv"));
  d.groups = load_groups(join(cfg.out_dir, "groups.tsv"), d.table);
  if (need_split) d.split = load_split(join(cfg.out_dir, "split.tsv"), d.table);
  return d;
}

void print_dataset_summary(std::ostream& out, const InteractionTable& table,
                           const GroupAssignment& groups) {
  int with_country = 0;
  for (const std::string& c : groups.item_country) with_country += c.empty() ? 0 : 1;
  out << "dataset: " << table.num_users << " users, " << table.num_items << " items, "
      << table.interaction_count() << " interactions\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%%",
                table.num_items == 0 ? 0.0 : 100.0 * with_country / table.num_items);
  out << "country coverage: " << buf << "; over={";
  bool first = true;
  for (const std::string& c : groups.overrepresented) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << "} under={";
  first = true;
  for (const std::string& c : groups.underrepresented) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << "}; long tail: " << groups.long_tail_items.size() << " items\n";
}

std::string checkpoint_path(const RunConfig& cfg, const std::string& variant) {
  return join(cfg.out_dir, "model." + variant + ".ckpt");
}

std::string fmt(double v, int decimals) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

void cmd_prepare(const RunConfig& cfg, std::ostream& out) {
  if (cfg.data.interactions.empty()) {
    throw ConfigError("prepare needs data.interactions in the config");
  }
  fs::create_directories(cfg.out_dir);

  const LoadResult loaded = load_interactions(cfg.data.interactions);
  if (!loaded.issues.empty()) {
    out << "skipped " << loaded.issues.size() << " malformed rows (first at line "
        << loaded.issues.front().line_number << ": " << loaded.issues.front().message << ")\n";
  }

  std::map<std::string, std::string> metadata;
  const bool have_metadata = !cfg.data.metadata.empty();
  if (have_metadata) metadata = load_item_metadata(cfg.data.metadata);

  FilterStats stats;
  auto [table, groups] =
      build_table(loaded.rows, cfg.data.min_user_interactions, cfg.data.min_item_interactions,
                  have_metadata ? &metadata : nullptr, cfg.data.require_country, &stats);

  out << "users: " << stats.users_before << " -> " << stats.users_after << " (down "
      << pct(stats.users_before, stats.users_after) << ")\n";
  out << "items: " << stats.items_before << " -> " << stats.items_after << " (down "
      << pct(stats.items_before, stats.items_after) << ")\n";
  out << "interactions: " << stats.pairs_before << " -> " << stats.pairs_after << " (down "
      << pct(stats.pairs_before, stats.pairs_after) << ")\n";

  int with_country = 0;
  for (const std::string& c : groups.item_country) with_country += c.empty() ? 0 : 1;
  const double coverage =
      table.num_items == 0 ? 0.0 : static_cast<double>(with_country) / table.num_items;
  if (coverage < cfg.data.min_country_coverage) {
    throw DataError("country coverage " + fmt(coverage, 4) + " below configured floor " +
                    fmt(cfg.data.min_country_coverage, 4));
  }

  const bool explicit_groups =
      !cfg.data.over_countries.empty() || !cfg.data.under_countries.empty();
  if (explicit_groups) {
    groups.overrepresented.insert(cfg.data.over_countries.begin(),
                                  cfg.data.over_countries.end());
    groups.underrepresented.insert(cfg.data.under_countries.begin(),
                                   cfg.data.under_countries.end());
    groups.long_tail_items = compute_long_tail(table);
  } else if (have_metadata) {
    groups = assign_groups(table, groups.item_country);
  } else {
    groups.long_tail_items = compute_long_tail(table);
  }

  const SplitDataset split =
      split_leave_one_out(table, sub_seed(cfg.seed, "split"), cfg.data.n_test_negatives);
  save_dataset_artifacts(cfg, table, groups, split);
  write_effective_config(cfg, "prepare");
  print_dataset_summary(out, table, groups);
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  auto [table, groups] = generate_synthetic(cfg.synth, sub_seed(cfg.seed, "synth"));
  const SplitDataset split =
      split_leave_one_out(table, sub_seed(cfg.seed, "split"), cfg.data.n_test_negatives);
  save_dataset_artifacts(cfg, table, groups, split);
  write_effective_config(cfg, "synth");
  print_dataset_summary(out, table, groups);
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  const DatasetArtifacts data = load_dataset_artifacts(cfg, true);
  const auto variants = expand_variants(cfg);

  std::exception_ptr first_failure;
  for (const auto& [name, train_cfg] : variants) {
    try {
      out << "[" << name << "] training " << train_cfg.model_kind << " for "
          << train_cfg.epochs << " epochs\n";
      const TrainResult result = train(train_cfg, data.split, [&](int epoch,
                                                                  const LossBreakdown& l) {
        out << "[" << name << "] epoch " << epoch << "/" << train_cfg.epochs << " total "
            << fmt(l.total, 6) << "\n";
      });
      const PrototypeModel& to_save = result.best_model ? *result.best_model : result.model;
      if (result.best_model) {
        out << "[" << name << "] best epoch " << result.best_epoch << " (hit rate "
            << fmt(result.best_hr, 4) << ")\n";
      }
      save_checkpoint(to_save, train_cfg, checkpoint_path(cfg, name));
      save_loss_log(result.epoch_losses, join(cfg.out_dir, "loss." + name + ".csv"));
      std::ofstream eff(join(cfg.out_dir, "train." + name + ".effective.json"),
                        std::ios::trunc);
      eff << train_config_to_json(train_cfg).dump(2) << "\n";
      out << "[" << name << "] checkpoint written\n";
    } catch (const std::exception& e) {
      out << "[" << name << "] FAILED: " << e.what() << "\n";
      if (!first_failure) first_failure = std::current_exception();
    }
  }
  write_effective_config(cfg, "train");
  if (first_failure) std::rethrow_exception(first_failure);
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  const DatasetArtifacts data = load_dataset_artifacts(cfg, true);
  const auto variants = expand_variants(cfg);

  std::ofstream table_out(join(cfg.out_dir, cfg.eval.comparison), std::ios::trunc);
  if (!table_out) throw DataError("cannot write comparison table in " + cfg.out_dir);
  table_out << "# PROTOFAIR-COMPARISON-v1\n";
  const std::string header = "variant\tHR@10\tNDCG@10\tmu_under\tmu_over\tmu_LT";
  table_out << header << "\n";
  out << header << "\n";

  for (const auto& [name, unused] : variants) {
    const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path(cfg, name));
    if (ckpt.model.num_users() != data.table.num_users ||
        ckpt.model.num_items() != data.table.num_items) {
      throw DataError("checkpoint '" + name + "' index space (" +
                      std::to_string(ckpt.model.num_users()) + "x" +
                      std::to_string(ckpt.model.num_items()) +
                      ") does not match the dataset");
    }
    EvalOptions opts;
    opts.use_filtering = ckpt.config.any_filtering();
    opts.threads = cfg.threads;
    opts.detail = cfg.eval.detail;
    opts.config_hash = config_hash(ckpt.config);
    const EvalReport report = evaluate(ckpt.model, data.split, data.groups, opts);
    save_report(report, join(cfg.out_dir, "report." + name + ".json"));

    auto cell = [](const std::optional<double>& v) {
      return v ? fmt(*v, 3) : std::string("-");
    };
    const std::string row = name + "\t" + fmt(report.hr_at_10, 4) + "\t" +
                            fmt(report.ndcg_at_10, 4) + "\t" + cell(report.mu_under) + "\t" +
                            cell(report.mu_over) + "\t" + cell(report.mu_long_tail);
    table_out << row << "\n";
    out << row << "\n";
  }
  if (!table_out) throw DataError("failed writing comparison table");
  write_effective_config(cfg, "evaluate");
}

void cmd_explain(const RunConfig& cfg, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  const DatasetArtifacts data = load_dataset_artifacts(cfg, false);
  const std::string variant =
      cfg.explain.variant.empty() ? expand_variants(cfg).front().first : cfg.explain.variant;
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path(cfg, variant));
  if (ckpt.model.kind != ModelKind::kProtoMF) {
    throw DataError("explanations need a prototype model checkpoint");
  }
  if (ckpt.model.num_items() != data.table.num_items) {
    throw DataError("checkpoint item space does not match the dataset");
  }

  std::map<int, std::string> labels;
  if (!cfg.data.labels.empty()) {
    const auto by_key = load_labels(cfg.data.labels);
    for (int i = 0; i < data.table.num_items; ++i) {
      const auto it = by_key.find(data.table.item_keys[i]);
      if (it != by_key.end()) labels[i] = it->second;
    }
  }

  // Resolve targets: explicit keys, or one most-interacted item from each
  // of the under/over groups.
  std::vector<int> targets;
  const bool auto_sample = cfg.explain.items.empty() ||
                           (cfg.explain.items.size() == 1 &&
                            cfg.explain.items[0] == "auto-sample");
  if (auto_sample) {
    for (const bool want_under : {true, false}) {
      int best = -1;
      std::size_t best_count = 0;
      for (int i = 0; i < data.table.num_items; ++i) {
        const bool in_group = want_under ? data.groups.is_under(i) : data.groups.is_over(i);
        if (!in_group) continue;
        if (best < 0 || data.table.item_users[i].size() > best_count) {
          best = i;
          best_count = data.table.item_users[i].size();
        }
      }
      if (best >= 0) {
        targets.push_back(best);
      } else {
        out << "note: no " << (want_under ? "under" : "over")
            << "represented items to auto-sample\n";
      }
    }
    if (targets.empty()) throw DataError("auto-sample found no grouped items");
  } else {
    std::map<std::string, int> index;
    for (int i = 0; i < data.table.num_items; ++i) index[data.table.item_keys[i]] = i;
    for (const std::string& key : cfg.explain.items) {
      const auto it = index.find(key);
      if (it == index.end()) {
        out << "skipping unknown item id '" << key << "'\n";
        continue;
      }
      targets.push_back(it->second);
    }
    if (targets.empty()) throw DataError("no requested item ids exist in the dataset");
  }

  bool any_labels_missing = false;
  for (const int item : targets) {
    const Explanation ex = explain_item(ckpt.model, item, cfg.explain.n_protos,
                                        cfg.explain.m_exemplars, data.groups, labels);
    any_labels_missing = any_labels_missing || ex.labels_missing;
    const std::string text = format_explanation(ex, data.table.item_keys);
    const std::string path =
        join(cfg.out_dir, "explanation." + sanitize(data.table.item_keys[item]) + ".txt");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write explanation file: " + path);
    f << text;
    out << text << "\n";
  }
  if (any_labels_missing && !cfg.data.labels.empty()) {
    out << "warning: some items lack labels; item keys shown instead\n";
  }

  ProjectionSubject subject = ProjectionSubject::kBoth;
  if (cfg.explain.projection == "items") subject = ProjectionSubject::kItems;
  if (cfg.explain.projection == "prototypes") subject = ProjectionSubject::kPrototypes;
  export_embedding_projection(ckpt.model, subject, data.groups, data.table.item_keys,
                              join(cfg.out_dir, "projection.csv"));
  out << "projection written to " << join(cfg.out_dir, "projection.csv") << "\n";
  write_effective_config(cfg, "explain");
}

}  // namespace protofair
