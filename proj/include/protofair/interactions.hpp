#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace protofair {

// One parsed row of an interactions file. Keys are raw strings until
// build_table assigns dense indices.
struct RawInteraction {
  std::string user_key;
  std::string item_key;
  double weight = 1.0;  // >= 1, any interaction counts as positive
  std::optional<std::int64_t> timestamp;
};

struct ParseIssue {
  std::size_t line_number = 0;  // 1-based, including the header line
  std::string message;
};

struct LoadOptions {
  char delimiter = '\0';            // '\0' = auto-detect among comma/tab
  std::size_t max_bad_rows = 100;   // abort when exceeded
};

struct LoadResult {
  std::vector<RawInteraction> rows;
  std::vector<ParseIssue> issues;
};

// Deduplicated implicit-feedback interactions with dense user/item indices.
struct InteractionTable {
  int num_users = 0;
  int num_items = 0;
  std::vector<std::pair<int, int>> interactions;      // (user, item), unique
  std::vector<std::int64_t> timestamps;               // parallel; empty when unknown
  std::vector<std::vector<int>> user_items;           // sorted item sets per user
  std::vector<std::vector<int>> item_users;           // sorted user sets per item
  std::vector<std::string> user_keys;                 // original keys, by index
  std::vector<std::string> item_keys;

  bool has_timestamps() const { return !timestamps.empty(); }
  std::size_t interaction_count() const { return interactions.size(); }

  // Rebuilds adjacency from the interaction list and checks the invariants
  // (indices in range, no duplicate pairs). Entities without interactions
  // are allowed: a split's train table may lose item coverage.
  void finalize();
};

struct GroupAssignment {
  std::vector<std::string> item_country;  // empty string = unknown
  std::set<std::string> overrepresented;
  std::set<std::string> underrepresented;
  std::set<int> long_tail_items;

  const std::string& country_of(int item) const { return item_country.at(item); }
  bool is_over(int item) const { return overrepresented.count(country_of(item)) > 0; }
  bool is_under(int item) const { return underrepresented.count(country_of(item)) > 0; }
  bool is_long_tail(int item) const { return long_tail_items.count(item) > 0; }
};

// Leave-one-out split: per user one held-out positive plus sampled negatives.
struct SplitDataset {
  InteractionTable train;
  std::vector<int> test_positive;                 // per user
  std::vector<std::vector<int>> test_negatives;   // per user, disjoint from history
};

struct FilterStats {
  std::size_t raw_rows = 0;
  std::size_t users_before = 0, items_before = 0, pairs_before = 0;
  std::size_t users_after = 0, items_after = 0, pairs_after = 0;
};

LoadResult load_interactions(const std::string& path, const LoadOptions& opts = {});

// item_key -> uppercased ISO country code; last occurrence wins.
std::map<std::string, std::string> load_item_metadata(const std::string& path,
                                                      const LoadOptions& opts = {});

// Iteratively removes cold users/items (and, when required, items without
// country metadata) until a fixed point, then reindexes densely in order of
// first appearance. Country codes for surviving items land in the returned
// GroupAssignment; group sets stay empty until assign_groups.
std::pair<InteractionTable, GroupAssignment> build_table(
    const std::vector<RawInteraction>& raw, int min_user_interactions,
    int min_item_interactions,
    const std::map<std::string, std::string>* metadata = nullptr,
    bool require_country = false, FilterStats* stats = nullptr);

// Fills the over/under country sets (quantile bands over per-country
// interaction totals) and the long-tail item set (10% fewest interactions).
GroupAssignment assign_groups(const InteractionTable& table,
                              const std::vector<std::string>& item_country);

// The floor(0.10 M) items with the fewest interactions; count ties break
// toward the smaller index.
std::set<int> compute_long_tail(const InteractionTable& table);

SplitDataset split_leave_one_out(const InteractionTable& table, std::uint64_t seed,
                                 int n_negatives = 99);

}  // namespace protofair
