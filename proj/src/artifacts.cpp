#include "protofair/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "protofair/common.hpp"
#include "protofair/json_util.hpp"

namespace protofair {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Data lines of a versioned delimited file: blank and '#' lines skipped.
std::vector<std::string> read_data_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

int item_index_of(const std::map<std::string, int>& index, const std::string& key,
                  const std::string& path) {
  const auto it = index.find(key);
  if (it == index.end()) throw DataError(path + ": unknown item key '" + key + "'");
  return it->second;
}

std::map<std::string, int> key_index(const std::vector<std::string>& keys) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < keys.size(); ++i) index[keys[i]] = static_cast<int>(i);
  return index;
}

}  // namespace

void save_table(const InteractionTable& table, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# PROTOFAIR-TABLE-v1\n";
  out << "user\titem\tweight";
  if (table.has_timestamps()) out << "\ttimestamp";
  out << "\n";
  for (std::size_t k = 0; k < table.interactions.size(); ++k) {
    const auto& [u, i] = table.interactions[k];
    out << table.user_keys[u] << "\t" << table.item_keys[i] << "\t1";
    if (table.has_timestamps()) out << "\t" << table.timestamps[k];
    out << "\n";
  }
  if (!out) throw DataError("failed writing table file: " + path);
}

InteractionTable load_table(const std::string& path) {
  const LoadResult loaded = load_interactions(path);
  auto [table, groups] = build_table(loaded.rows, 0, 0);
  (void)groups;
  return table;
}

void save_groups(const GroupAssignment& groups, const InteractionTable& table,
                 const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# PROTOFAIR-GROUPS-v1\n";
  auto emit_set = [&](const char* tag, const std::set<std::string>& s) {
    out << tag;
    bool first = true;
    for (const std::string& c : s) {
      out << (first ? "\t" : ",") << c;
      first = false;
    }
    out << "\n";
  };
  emit_set("over", groups.overrepresented);
  emit_set("under", groups.underrepresented);
  for (int i = 0; i < table.num_items; ++i) {
    out << "item\t" << table.item_keys[i] << "\t" << groups.item_country[i] << "\t"
        << (groups.long_tail_items.count(i) > 0 ? 1 : 0) << "\n";
  }
  if (!out) throw DataError("failed writing groups file: " + path);
}

GroupAssignment load_groups(const std::string& path, const InteractionTable& table) {
  GroupAssignment groups;
  groups.item_country.assign(table.num_items, "");
  const auto index = key_index(table.item_keys);
  std::vector<bool> seen(table.num_items, false);

  for (const std::string& line : read_data_lines(path)) {
    const auto fields = split_fields(line, '\t');
    if (fields[0] == "over" || fields[0] == "under") {
      auto& target = fields[0] == "over" ? groups.overrepresented : groups.underrepresented;
      if (fields.size() >= 2 && !fields[1].empty()) {
        for (const std::string& code : split_fields(fields[1], ',')) target.insert(code);
      }
      continue;
    }
    if (fields[0] == "item") {
      if (fields.size() != 4) throw DataError(path + ": malformed item row: " + line);
      const int i = item_index_of(index, fields[1], path);
      groups.item_country[i] = fields[2];
      if (fields[3] == "1") {
        groups.long_tail_items.insert(i);
      } else if (fields[3] != "0") {
        throw DataError(path + ": long-tail flag must be 0 or 1: " + line);
      }
      seen[i] = true;
      continue;
    }
    throw DataError(path + ": unknown record type '" + fields[0] + "'");
  }
  for (int i = 0; i < table.num_items; ++i) {
    if (!seen[i]) throw DataError(path + ": no group row for item '" + table.item_keys[i] + "'");
  }
  return groups;
}

void save_split(const SplitDataset& split, const InteractionTable& table,
                const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# PROTOFAIR-SPLIT-v1\n";
  for (int u = 0; u < table.num_users; ++u) {
    out << table.user_keys[u] << "\t" << table.item_keys[split.test_positive[u]];
    out << "\t";
    for (std::size_t j = 0; j < split.test_negatives[u].size(); ++j) {
      out << (j == 0 ? "" : ",") << table.item_keys[split.test_negatives[u][j]];
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing split file: " + path);
}

SplitDataset load_split(const std::string& path, const InteractionTable& table) {
  SplitDataset split;
  split.test_positive.assign(table.num_users, -1);
  split.test_negatives.assign(table.num_users, {});
  const auto uindex = key_index(table.user_keys);
  const auto iindex = key_index(table.item_keys);

  for (const std::string& line : read_data_lines(path)) {
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 3) throw DataError(path + ": malformed split row: " + line);
    const auto uit = uindex.find(fields[0]);
    if (uit == uindex.end()) throw DataError(path + ": unknown user key '" + fields[0] + "'");
    const int u = uit->second;
    if (split.test_positive[u] >= 0) {
      throw DataError(path + ": duplicate split row for user '" + fields[0] + "'");
    }
    split.test_positive[u] = item_index_of(iindex, fields[1], path);
    for (const std::string& key : split_fields(fields[2], ',')) {
      if (key.empty()) continue;
      split.test_negatives[u].push_back(item_index_of(iindex, key, path));
    }
  }
  for (int u = 0; u < table.num_users; ++u) {
    if (split.test_positive[u] < 0) {
      throw DataError(path + ": no split row for user '" + table.user_keys[u] + "'");
    }
  }

  split.train.num_users = table.num_users;
  split.train.num_items = table.num_items;
  split.train.user_keys = table.user_keys;
  split.train.item_keys = table.item_keys;
  for (std::size_t k = 0; k < table.interactions.size(); ++k) {
    const auto [u, i] = table.interactions[k];
    if (i == split.test_positive[u]) continue;
    split.train.interactions.emplace_back(u, i);
    if (table.has_timestamps()) split.train.timestamps.push_back(table.timestamps[k]);
  }
  split.train.finalize();
  return split;
}

void save_loss_log(const std::vector<LossBreakdown>& epochs, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# PROTOFAIR-LOSSLOG-v1\n";
  out << "epoch,rec_user,rec_item,reg_pu,reg_up,reg_pi,reg_ip,dist_u,dist_i,zerosum,total\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const LossBreakdown& b = epochs[e];
    out << (e + 1) << "," << fmt_double(b.rec_user) << "," << fmt_double(b.rec_item) << ","
        << fmt_double(b.reg_proto_to_user) << "," << fmt_double(b.reg_user_to_proto) << ","
        << fmt_double(b.reg_proto_to_item) << "," << fmt_double(b.reg_item_to_proto) << ","
        << fmt_double(b.dist_user) << "," << fmt_double(b.dist_item) << ","
        << fmt_double(b.zerosum) << "," << fmt_double(b.total) << "\n";
  }
  if (!out) throw DataError("failed writing loss log: " + path);
}

void save_report(const EvalReport& report, const std::string& path) {
  nlohmann::json j{{"format", "PROTOFAIR-REPORT-v1"},
                   {"hr_at_10", report.hr_at_10},
                   {"ndcg_at_10", report.ndcg_at_10},
                   {"n_users", report.n_users},
                   {"n_under_occurrences", report.n_under_occurrences},
                   {"n_over_occurrences", report.n_over_occurrences},
                   {"n_long_tail_occurrences", report.n_long_tail_occurrences},
                   {"config_hash", report.config_hash}};
  j["mu_under"] = report.mu_under ? nlohmann::json(*report.mu_under) : nlohmann::json();
  j["mu_over"] = report.mu_over ? nlohmann::json(*report.mu_over) : nlohmann::json();
  j["mu_long_tail"] =
      report.mu_long_tail ? nlohmann::json(*report.mu_long_tail) : nlohmann::json();
  if (!report.per_user.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const PerUserRow& r : report.per_user) {
      rows.push_back({{"user", r.user},
                      {"positive_rank", r.positive_rank},
                      {"n_under_cands", r.n_under_cands},
                      {"n_over_cands", r.n_over_cands},
                      {"n_lt_cands", r.n_lt_cands}});
    }
    j["per_user"] = std::move(rows);
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing report: " + path);
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read report: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format", "") != "PROTOFAIR-REPORT-v1") {
    throw DataError(path + ": not a report file");
  }
  EvalReport r;
  read_field(j, "hr_at_10", r.hr_at_10);
  read_field(j, "ndcg_at_10", r.ndcg_at_10);
  read_field(j, "n_users", r.n_users);
  read_field(j, "n_under_occurrences", r.n_under_occurrences);
  read_field(j, "n_over_occurrences", r.n_over_occurrences);
  read_field(j, "n_long_tail_occurrences", r.n_long_tail_occurrences);
  read_field(j, "config_hash", r.config_hash);
  if (!j.at("mu_under").is_null()) r.mu_under = j.at("mu_under").get<double>();
  if (!j.at("mu_over").is_null()) r.mu_over = j.at("mu_over").get<double>();
  if (!j.at("mu_long_tail").is_null()) r.mu_long_tail = j.at("mu_long_tail").get<double>();
  if (j.contains("per_user")) {
    for (const auto& row : j.at("per_user")) {
      PerUserRow r2;
      read_field(row, "user", r2.user);
      read_field(row, "positive_rank", r2.positive_rank);
      read_field(row, "n_under_cands", r2.n_under_cands);
      read_field(row, "n_over_cands", r2.n_over_cands);
      read_field(row, "n_lt_cands", r2.n_lt_cands);
      r.per_user.push_back(r2);
    }
  }
  return r;
}

std::map<std::string, std::string> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read labels file: " + path);
  std::map<std::string, std::string> labels;
  std::string line;
  bool header_seen = false;
  char delim = '\0';
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      const auto heads = split_fields(line, delim);
      if (heads.size() < 2 || heads[0] != "item" || heads[1] != "label") {
        throw DataError(path + ": labels header must be 'item" + std::string(1, delim) +
                        "label'");
      }
      header_seen = true;
      continue;
    }
    const auto pos = line.find(delim);
    if (pos == std::string::npos) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": missing label field");
    }
    labels[line.substr(0, pos)] = line.substr(pos + 1);
  }
  if (!header_seen) throw DataError(path + ": empty labels file");
  return labels;
}

}  // namespace protofair
