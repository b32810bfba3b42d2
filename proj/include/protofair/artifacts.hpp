#pragma once

#include <map>
#include <string>
#include <vector>

#include "protofair/evaluation.hpp"
#include "protofair/interactions.hpp"
#include "protofair/trainer.hpp"

namespace protofair {

// Versioned on-disk forms of the pipeline artifacts. Every delimited file
// starts with a `# PROTOFAIR-...-v1` line; loaders skip comment lines.

void save_table(const InteractionTable& table, const std::string& path);
InteractionTable load_table(const std::string& path);

void save_groups(const GroupAssignment& groups, const InteractionTable& table,
                 const std::string& path);
GroupAssignment load_groups(const std::string& path, const InteractionTable& table);

// The split file stores held-out positives and negatives by key; the train
// table is reconstructed from the full table minus the held-out pairs.
void save_split(const SplitDataset& split, const InteractionTable& table,
                const std::string& path);
SplitDataset load_split(const std::string& path, const InteractionTable& table);

void save_loss_log(const std::vector<LossBreakdown>& epochs, const std::string& path);

void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

// `item,label` sidecar; label may contain the delimiter (split on the first
// occurrence only).
std::map<std::string, std::string> load_labels(const std::string& path);

}  // namespace protofair
