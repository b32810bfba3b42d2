#include "protofair/interactions.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "protofair/common.hpp"

namespace protofair {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

char detect_delimiter(const std::string& header, char forced) {
  if (forced != '\0') return forced;
  if (header.find('\t') != std::string::npos) return '\t';
  return ',';
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

// Reads lines, skipping blank lines and '#' comment lines (artifact version
// headers); returns the first non-comment line as header.
struct DelimitedFile {
  std::ifstream in;
  std::size_t line_number = 0;

  explicit DelimitedFile(const std::string& path) : in(path) {
    if (!in) throw DataError("cannot open file: " + path);
  }

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_number;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      line = t;
      return true;
    }
    return false;
  }
};

}  // namespace

LoadResult load_interactions(const std::string& path, const LoadOptions& opts) {
  DelimitedFile file(path);
  std::string line;
  if (!file.next(line)) throw DataError("empty interactions file: " + path);

  char delim = detect_delimiter(line, opts.delimiter);
  std::vector<std::string> header = split_row(line, delim);
  int col_user = -1, col_item = -1, col_weight = -1, col_ts = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    std::string name = lower(header[c]);
    if (name == "user") col_user = c;
    else if (name == "item") col_item = c;
    else if (name == "weight") col_weight = c;
    else if (name == "timestamp") col_ts = c;
    else throw DataError("unknown interactions column '" + header[c] + "' in " + path);
  }
  if (col_user < 0 || col_item < 0)
    throw DataError("interactions header must name 'user' and 'item' columns: " + path);

  LoadResult result;
  while (file.next(line)) {
    std::vector<std::string> fields = split_row(line, delim);
    auto bad = [&](const std::string& why) {
      result.issues.push_back({file.line_number, why});
      if (result.issues.size() > opts.max_bad_rows)
        throw DataError("too many malformed rows (>" + std::to_string(opts.max_bad_rows) +
                        ") in " + path + "; last at line " + std::to_string(file.line_number));
    };
    int needed = std::max(col_user, col_item) + 1;
    if (static_cast<int>(fields.size()) < needed) {
      bad("expected at least " + std::to_string(needed) + " columns, got " +
          std::to_string(fields.size()));
      continue;
    }
    RawInteraction row;
    row.user_key = fields[col_user];
    row.item_key = fields[col_item];
    if (row.user_key.empty() || row.item_key.empty()) {
      bad("empty user or item key");
      continue;
    }
    if (col_weight >= 0 && col_weight < static_cast<int>(fields.size()) &&
        !fields[col_weight].empty()) {
      if (!parse_double(fields[col_weight], row.weight) || row.weight < 1.0) {
        bad("invalid weight '" + fields[col_weight] + "'");
        continue;
      }
    }
    if (col_ts >= 0 && col_ts < static_cast<int>(fields.size()) && !fields[col_ts].empty()) {
      std::int64_t ts;
      if (!parse_int64(fields[col_ts], ts)) {
        bad("invalid timestamp '" + fields[col_ts] + "'");
        continue;
      }
      row.timestamp = ts;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::map<std::string, std::string> load_item_metadata(const std::string& path,
                                                      const LoadOptions& opts) {
  DelimitedFile file(path);
  std::string line;
  std::map<std::string, std::string> out;
  if (!file.next(line)) return out;  // empty file -> empty map

  char delim = detect_delimiter(line, opts.delimiter);
  std::vector<std::string> header = split_row(line, delim);
  int col_item = -1, col_country = -1;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    std::string name = lower(header[c]);
    if (name == "item") col_item = c;
    else if (name == "country") col_country = c;
  }
  if (col_item < 0 || col_country < 0)
    throw DataError("metadata header must name 'item' and 'country' columns: " + path);

  while (file.next(line)) {
    std::vector<std::string> fields = split_row(line, delim);
    if (static_cast<int>(fields.size()) <= std::max(col_item, col_country)) continue;
    std::string key = fields[col_item];
    std::string country = fields[col_country];
    if (key.empty() || country.empty()) continue;
    std::transform(country.begin(), country.end(), country.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    out[key] = country;  // last occurrence wins
  }
  return out;
}

void InteractionTable::finalize() {
  user_items.assign(num_users, {});
  item_users.assign(num_items, {});
  for (const auto& [u, i] : interactions) {
    if (u < 0 || u >= num_users || i < 0 || i >= num_items)
      throw DataError("interaction index out of range");
    user_items[u].push_back(i);
    item_users[i].push_back(u);
  }
  for (auto& v : user_items) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
      throw DataError("duplicate (user,item) pair");
  }
  for (auto& v : item_users) std::sort(v.begin(), v.end());
}

std::pair<InteractionTable, GroupAssignment> build_table(
    const std::vector<RawInteraction>& raw, int min_user_interactions,
    int min_item_interactions, const std::map<std::string, std::string>* metadata,
    bool require_country, FilterStats* stats) {
  if (raw.empty()) throw DataError("no interactions to build table from");

  // Deduplicate (user,item) in first-appearance order; duplicate rows merge
  // into one pair with summed weight and the latest timestamp.
  struct Pair {
    std::string user, item;
    double weight = 0;
    std::optional<std::int64_t> timestamp;
  };
  std::vector<Pair> pairs;
  std::map<std::pair<std::string, std::string>, std::size_t> pair_index;
  for (const auto& r : raw) {
    auto key = std::make_pair(r.user_key, r.item_key);
    auto it = pair_index.find(key);
    if (it == pair_index.end()) {
      pair_index.emplace(key, pairs.size());
      pairs.push_back({r.user_key, r.item_key, r.weight, r.timestamp});
    } else {
      Pair& p = pairs[it->second];
      p.weight += r.weight;
      if (r.timestamp && (!p.timestamp || *r.timestamp > *p.timestamp))
        p.timestamp = r.timestamp;
    }
  }

  auto has_country = [&](const std::string& item_key) {
    return metadata != nullptr && metadata->count(item_key) > 0;
  };

  std::map<std::string, int> user_count, item_count;
  for (const auto& p : pairs) {
    ++user_count[p.user];
    ++item_count[p.item];
  }
  if (stats) {
    stats->raw_rows = raw.size();
    stats->users_before = user_count.size();
    stats->items_before = item_count.size();
    stats->pairs_before = pairs.size();
  }

  std::set<std::string> dead_users, dead_items;
  bool changed = true;
  while (changed) {
    changed = false;
    user_count.clear();
    item_count.clear();
    for (const auto& p : pairs) {
      if (dead_users.count(p.user) || dead_items.count(p.item)) continue;
      ++user_count[p.user];
      ++item_count[p.item];
    }
    for (const auto& [item, n] : item_count) {
      if (n < min_item_interactions || (require_country && !has_country(item))) {
        dead_items.insert(item);
        changed = true;
      }
    }
    for (const auto& [user, n] : user_count) {
      if (n < min_user_interactions) {
        dead_users.insert(user);
        changed = true;
      }
    }
  }

  InteractionTable table;
  std::map<std::string, int> user_index, item_index;
  bool all_timestamps = true;
  for (const auto& p : pairs) {
    if (dead_users.count(p.user) || dead_items.count(p.item)) continue;
    auto [uit, unew] = user_index.emplace(p.user, table.num_users);
    if (unew) {
      ++table.num_users;
      table.user_keys.push_back(p.user);
    }
    auto [iit, inew] = item_index.emplace(p.item, table.num_items);
    if (inew) {
      ++table.num_items;
      table.item_keys.push_back(p.item);
    }
    table.interactions.emplace_back(uit->second, iit->second);
    if (p.timestamp)
      table.timestamps.push_back(*p.timestamp);
    else
      all_timestamps = false;
  }
  if (table.interactions.empty())
    throw DataError("table is empty after filtering (thresholds too strict?)");
  // Timestamps are kept only when every surviving pair carries one.
  if (!all_timestamps) table.timestamps.clear();
  table.finalize();

  GroupAssignment groups;
  groups.item_country.assign(table.num_items, "");
  if (metadata) {
    for (int i = 0; i < table.num_items; ++i) {
      auto it = metadata->find(table.item_keys[i]);
      if (it != metadata->end()) groups.item_country[i] = it->second;
    }
  }
  if (stats) {
    stats->users_after = table.num_users;
    stats->items_after = table.num_items;
    stats->pairs_after = table.interactions.size();
  }
  return {std::move(table), std::move(groups)};
}

GroupAssignment assign_groups(const InteractionTable& table,
                              const std::vector<std::string>& item_country) {
  if (static_cast<int>(item_country.size()) != table.num_items)
    throw DataError("item_country size does not match table");

  GroupAssignment groups;
  groups.item_country = item_country;

  std::map<std::string, long long> country_total;
  for (int i = 0; i < table.num_items; ++i) {
    if (!item_country[i].empty())
      country_total[item_country[i]] += static_cast<long long>(table.item_users[i].size());
  }
  if (country_total.size() < 4)
    throw DataError(
        "fewer than 4 distinct countries; quantile bands are undefined -- "
        "configure explicit overrepresented/underrepresented group lists instead");

  // Ascending by interaction total, ties by code. Band membership uses the
  // position quantile p/C with inclusive-lower/exclusive-upper bands.
  std::vector<std::pair<long long, std::string>> ordered;
  for (const auto& [code, total] : country_total) ordered.emplace_back(total, code);
  std::sort(ordered.begin(), ordered.end());

  const int c = static_cast<int>(ordered.size());
  const int under_lo = (c + 3) / 4;                    // ceil(0.25 c)
  const int under_hi = (c + 1) / 2;                    // ceil(0.50 c)
  const int over_lo = std::min(c - 1, (9 * c + 9) / 10);  // ceil(0.90 c), at least one
  for (int p = under_lo; p < under_hi; ++p) groups.underrepresented.insert(ordered[p].second);
  for (int p = over_lo; p < c; ++p) groups.overrepresented.insert(ordered[p].second);

  groups.long_tail_items = compute_long_tail(table);
  return groups;
}

std::set<int> compute_long_tail(const InteractionTable& table) {
  // Ordering by the cited logarithmic interaction count is equivalent to
  // ordering by raw count (log is monotone); boundary ties break toward the
  // smaller index.
  std::vector<int> by_count(table.num_items);
  std::iota(by_count.begin(), by_count.end(), 0);
  std::stable_sort(by_count.begin(), by_count.end(), [&](int a, int b) {
    return table.item_users[a].size() < table.item_users[b].size();
  });
  std::set<int> tail;
  const int n_tail = table.num_items / 10;
  for (int i = 0; i < n_tail; ++i) tail.insert(by_count[i]);
  return tail;
}

SplitDataset split_leave_one_out(const InteractionTable& table, std::uint64_t seed,
                                 int n_negatives) {
  SplitDataset split;
  split.train.num_users = table.num_users;
  split.train.num_items = table.num_items;
  split.train.user_keys = table.user_keys;
  split.train.item_keys = table.item_keys;
  split.test_positive.assign(table.num_users, -1);
  split.test_negatives.assign(table.num_users, {});

  // Per-user interaction lists in original order, with timestamps if present.
  std::vector<std::vector<std::pair<int, std::int64_t>>> per_user(table.num_users);
  for (std::size_t k = 0; k < table.interactions.size(); ++k) {
    auto [u, i] = table.interactions[k];
    std::int64_t ts = table.has_timestamps() ? table.timestamps[k] : 0;
    per_user[u].emplace_back(i, ts);
  }

  std::mt19937_64 rng(seed);
  for (int u = 0; u < table.num_users; ++u) {
    const auto& hist = per_user[u];
    if (hist.size() < 2)
      throw DataError("user " + std::to_string(u) + " has fewer than 2 interactions");

    int held_out;
    if (table.has_timestamps()) {
      // Latest interaction; timestamp ties break toward the lower item index.
      held_out = hist[0].first;
      std::int64_t best_ts = hist[0].second;
      for (const auto& [item, ts] : hist) {
        if (ts > best_ts || (ts == best_ts && item < held_out)) {
          best_ts = ts;
          held_out = item;
        }
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, hist.size() - 1);
      held_out = hist[pick(rng)].first;
    }
    split.test_positive[u] = held_out;

    const auto& interacted = table.user_items[u];
    std::vector<int> pool;
    pool.reserve(table.num_items - interacted.size());
    std::size_t cursor = 0;
    for (int i = 0; i < table.num_items; ++i) {
      while (cursor < interacted.size() && interacted[cursor] < i) ++cursor;
      if (cursor < interacted.size() && interacted[cursor] == i) continue;
      pool.push_back(i);
    }
    if (static_cast<int>(pool.size()) < n_negatives)
      throw DataError("user " + std::to_string(u) + " has only " +
                      std::to_string(pool.size()) + " non-interacted items, need " +
                      std::to_string(n_negatives));
    for (int k = 0; k < n_negatives; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    split.test_negatives[u].assign(pool.begin(), pool.begin() + n_negatives);
  }

  for (std::size_t k = 0; k < table.interactions.size(); ++k) {
    auto [u, i] = table.interactions[k];
    if (i == split.test_positive[u]) continue;
    split.train.interactions.emplace_back(u, i);
    if (table.has_timestamps()) split.train.timestamps.push_back(table.timestamps[k]);
  }
  // Items whose only interaction was held out may be absent from the train
  // table; the index space stays aligned with the full table.
  split.train.finalize();
  return split;
}

}  // namespace protofair
