#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "protofair/common.hpp"
#include "protofair/interactions.hpp"
#include "support.hpp"

using namespace protofair;
using protofair::testing::ScopedTempDir;

namespace {

std::string write_file(const ScopedTempDir& dir, const std::string& name,
                       const std::string& content) {
  std::string path = dir.file(name);
  std::ofstream out(path);
  out << content;
  return path;
}

std::vector<RawInteraction> make_raw(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<RawInteraction> raw;
  for (const auto& [u, i] : pairs) raw.push_back({u, i, 1.0, std::nullopt});
  return raw;
}

}  // namespace

TEST_CASE("load_interactions parses rows and keeps duplicates") {
  ScopedTempDir dir("pf_load");
  std::string path = write_file(dir, "x.csv", "user,item\nu1,i1\nu1,i2\nu1,i1\n");
  LoadResult r = load_interactions(path);
  CHECK(r.rows.size() == 3);  // loader does not dedup
  CHECK(r.issues.empty());
  CHECK(r.rows[0].user_key == "u1");
  CHECK(r.rows[1].item_key == "i2");
}

TEST_CASE("load_interactions reports malformed rows with line numbers") {
  ScopedTempDir dir("pf_load");
  std::string path = write_file(dir, "x.csv", "user,item\nu1,i1\nu2\nu3,i3\n");
  LoadResult r = load_interactions(path);
  CHECK(r.rows.size() == 2);
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].line_number == 3);
}

TEST_CASE("load_interactions aborts past the bad-row threshold") {
  ScopedTempDir dir("pf_load");
  std::string body = "user,item\n";
  for (int i = 0; i < 5; ++i) body += "only-one-column\n";
  std::string path = write_file(dir, "x.csv", body);
  LoadOptions opts;
  opts.max_bad_rows = 2;
  CHECK_THROWS_AS(load_interactions(path, opts), DataError);
}

TEST_CASE("load_interactions handles weights, timestamps and tabs") {
  ScopedTempDir dir("pf_load");
  std::string path =
      write_file(dir, "x.tsv", "user\titem\tweight\ttimestamp\nu1\ti1\t3\t100\nu1\ti2\t2\t50\n");
  LoadResult r = load_interactions(path);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].weight == 3.0);
  CHECK(r.rows[0].timestamp == 100);
  CHECK(r.rows[1].timestamp == 50);
}

TEST_CASE("load_interactions errors") {
  ScopedTempDir dir("pf_load");
  CHECK_THROWS_AS(load_interactions(dir.file("missing.csv")), DataError);
  std::string bad_header = write_file(dir, "h.csv", "user,thing\nu1,i1\n");
  CHECK_THROWS_AS(load_interactions(bad_header), DataError);
}

TEST_CASE("load_item_metadata uppercases and keeps the last occurrence") {
  ScopedTempDir dir("pf_meta");
  std::string path = write_file(dir, "m.csv", "item,country\ni1,jp\ni2,US\ni1,US\n");
  auto meta = load_item_metadata(path);
  CHECK(meta.size() == 2);
  CHECK(meta.at("i1") == "US");
  CHECK(meta.at("i2") == "US");

  std::string empty = write_file(dir, "e.csv", "item,country\n");
  CHECK(load_item_metadata(empty).empty());
}

TEST_CASE("build_table removes users below the interaction threshold") {
  // Users with 1, 2 and 5 interactions; min_user = 2 keeps the last two.
  std::vector<std::pair<std::string, std::string>> pairs = {{"a", "i1"}};
  for (int k = 0; k < 2; ++k) pairs.push_back({"b", "i" + std::to_string(k)});
  for (int k = 0; k < 5; ++k) pairs.push_back({"c", "i" + std::to_string(k)});
  auto [table, groups] = build_table(make_raw(pairs), 2, 0);
  CHECK(table.num_users == 2);
  CHECK(std::find(table.user_keys.begin(), table.user_keys.end(), "a") ==
        table.user_keys.end());
}

TEST_CASE("build_table deduplicates pairs and reindexes densely") {
  auto raw = make_raw({{"u1", "i1"}, {"u1", "i1"}, {"u1", "i2"}, {"u2", "i2"}});
  FilterStats stats;
  auto [table, groups] = build_table(raw, 0, 0, nullptr, false, &stats);
  CHECK(table.num_users == 2);
  CHECK(table.num_items == 2);
  CHECK(table.interaction_count() == 3);
  CHECK(stats.raw_rows == 4);
  CHECK(stats.pairs_before == 3);
  CHECK(stats.pairs_after == 3);
}

TEST_CASE("build_table reaches the filtering fixed point through a removal chain") {
  // i4 is cold; dropping it starves u3, which starves i3, which starves u2.
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"u1", "i1"}, {"u1", "i2"}, {"u4", "i1"}, {"u4", "i2"}, {"u5", "i1"},
      {"u5", "i2"}, {"u2", "i2"}, {"u2", "i3"}, {"u3", "i3"}, {"u3", "i4"}};
  auto [table, groups] = build_table(make_raw(pairs), 2, 2);

  // Independent fixed-point simulation over key sets.
  std::map<std::string, std::set<std::string>> by_user, by_item;
  for (const auto& [u, i] : pairs) {
    by_user[u].insert(i);
    by_item[i].insert(u);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = by_user.begin(); it != by_user.end();) {
      if (it->second.size() < 2) {
        for (const auto& i : it->second) by_item[i].erase(it->first);
        it = by_user.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    for (auto it = by_item.begin(); it != by_item.end();) {
      if (it->second.size() < 2) {
        for (const auto& u : it->second) by_user[u].erase(it->first);
        it = by_item.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  std::set<std::string> got_users(table.user_keys.begin(), table.user_keys.end());
  std::set<std::string> want_users;
  for (const auto& [u, s] : by_user) want_users.insert(u);
  CHECK(got_users == want_users);
  std::set<std::string> got_items(table.item_keys.begin(), table.item_keys.end());
  std::set<std::string> want_items;
  for (const auto& [i, s] : by_item) want_items.insert(i);
  CHECK(got_items == want_items);
  CHECK(want_users == std::set<std::string>{"u1", "u4", "u5"});
}

TEST_CASE("build_table filtering is idempotent") {
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"u1", "i1"}, {"u1", "i2"}, {"u2", "i1"}, {"u2", "i2"}, {"u3", "i1"},
      {"u3", "i3"}, {"u4", "i4"}};
  auto [table, groups] = build_table(make_raw(pairs), 2, 2);

  std::vector<RawInteraction> again;
  for (const auto& [u, i] : table.interactions)
    again.push_back({table.user_keys[u], table.item_keys[i], 1.0, std::nullopt});
  auto [table2, groups2] = build_table(again, 2, 2);
  CHECK(table2.num_users == table.num_users);
  CHECK(table2.num_items == table.num_items);
  CHECK(table2.interactions == table.interactions);
  CHECK(table2.user_keys == table.user_keys);
  CHECK(table2.item_keys == table.item_keys);
}

TEST_CASE("build_table drops items without required country metadata") {
  auto raw = make_raw({{"u1", "i1"}, {"u1", "i2"}, {"u2", "i1"}});
  std::map<std::string, std::string> meta = {{"i1", "JP"}};
  auto [table, groups] = build_table(raw, 0, 0, &meta, true);
  CHECK(table.num_items == 1);
  CHECK(table.item_keys == std::vector<std::string>{"i1"});
  CHECK(groups.item_country == std::vector<std::string>{"JP"});
}

TEST_CASE("build_table rejects an empty result") {
  auto raw = make_raw({{"u1", "i1"}});
  CHECK_THROWS_AS(build_table(raw, 5, 0), DataError);
}

TEST_CASE("assign_groups matches a brute-force quantile computation") {
  // Ten countries with totals 100, 90, ..., 10: one item each, item of
  // country c_j interacted by the first 100-10j users.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int j = 0; j < 10; ++j) {
    int count = 100 - 10 * j;
    for (int u = 0; u < count; ++u)
      pairs.push_back({"u" + std::to_string(u), "c" + std::to_string(j) + "_item"});
  }
  auto [table, g0] = build_table(make_raw(pairs), 0, 0);
  std::vector<std::string> country(table.num_items);
  for (int i = 0; i < table.num_items; ++i)
    country[i] = table.item_keys[i].substr(0, 2);  // "c0".."c9"
  GroupAssignment groups = assign_groups(table, country);

  // Brute force: sort per-country totals ascending, band by position.
  std::map<std::string, long> totals;
  for (int i = 0; i < table.num_items; ++i)
    totals[country[i]] += static_cast<long>(table.item_users[i].size());
  std::vector<std::pair<long, std::string>> flipped;
  for (auto& [code, total] : totals) flipped.push_back({total, code});
  std::sort(flipped.begin(), flipped.end());
  int c = static_cast<int>(flipped.size());
  auto ceil_frac = [c](int num, int den) { return (num * c + den - 1) / den; };
  std::set<std::string> want_under, want_over;
  for (int p = ceil_frac(1, 4); p < ceil_frac(1, 2); ++p)
    want_under.insert(flipped[p].second);
  for (int p = std::min(c - 1, ceil_frac(9, 10)); p < c; ++p)
    want_over.insert(flipped[p].second);
  CHECK(groups.underrepresented == want_under);
  CHECK(groups.overrepresented == want_over);

  // Counts 100..10 put the top-decile country at total 100 and the 25-50%
  // band at totals 40 and 50.
  CHECK(groups.overrepresented == std::set<std::string>{"c0"});
  CHECK(groups.underrepresented == std::set<std::string>{"c5", "c6"});
}

TEST_CASE("assign_groups requires at least four countries") {
  auto raw = make_raw({{"u1", "i1"}, {"u2", "i2"}, {"u1", "i2"}, {"u2", "i1"}});
  auto [table, g0] = build_table(raw, 0, 0);
  std::vector<std::string> one_country(table.num_items, "US");
  CHECK_THROWS_AS(assign_groups(table, one_country), DataError);
}

TEST_CASE("long tail holds the floor(0.10 M) least-interacted items") {
  // 20 items with distinct counts 1..20: user u_j interacts with every item
  // whose count exceeds j.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int j = 1; j <= 20; ++j)
    for (int u = 0; u < j; ++u)
      pairs.push_back({"u" + std::to_string(u), "i" + std::to_string(j)});
  auto [table, g0] = build_table(make_raw(pairs), 0, 0);
  REQUIRE(table.num_items == 20);
  std::set<int> tail = compute_long_tail(table);
  REQUIRE(tail.size() == 2);
  for (int i : tail) CHECK(table.item_users[i].size() <= 2);
}

TEST_CASE("long tail boundary ties break toward the smaller index") {
  // Ten items, all with a single interaction: only the lowest index enters.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int j = 0; j < 10; ++j) pairs.push_back({"u0", "i" + std::to_string(j)});
  auto [table, g0] = build_table(make_raw(pairs), 0, 0);
  std::set<int> tail = compute_long_tail(table);
  CHECK(tail == std::set<int>{0});
}

TEST_CASE("split holds out the latest interaction when timestamps exist") {
  std::vector<RawInteraction> raw = {{"u1", "a", 1.0, 1},
                                     {"u1", "b", 1.0, 3},
                                     {"u1", "c", 1.0, 2},
                                     {"u2", "a", 1.0, 5},
                                     {"u2", "b", 1.0, 4}};
  // Several filler users so every user keeps a large non-interacted pool.
  for (int j = 0; j < 120; ++j)
    raw.push_back({"filler" + std::to_string(j % 6), "f" + std::to_string(j), 1.0, 0});
  auto [table, g0] = build_table(raw, 0, 0);
  SplitDataset split = split_leave_one_out(table, 7, 10);
  int u1 = -1, u2 = -1;
  for (int u = 0; u < table.num_users; ++u) {
    if (table.user_keys[u] == "u1") u1 = u;
    if (table.user_keys[u] == "u2") u2 = u;
  }
  CHECK(table.item_keys[split.test_positive[u1]] == "b");
  CHECK(table.item_keys[split.test_positive[u2]] == "a");
}

TEST_CASE("split is deterministic and respects disjointness") {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 12; ++u)
    for (int j = 0; j < 6; ++j)
      pairs.push_back({"u" + std::to_string(u), "i" + std::to_string((u * 3 + j * 7) % 40)});
  // Cover all 40 items across three extra users so indices stay dense while
  // everyone keeps at least 20 non-interacted items.
  for (int j = 0; j < 40; ++j)
    pairs.push_back({"cover" + std::to_string(j / 14), "i" + std::to_string(j)});
  auto [table, g0] = build_table(make_raw(pairs), 0, 0);

  SplitDataset a = split_leave_one_out(table, 99, 20);
  SplitDataset b = split_leave_one_out(table, 99, 20);
  CHECK(a.test_positive == b.test_positive);
  CHECK(a.test_negatives == b.test_negatives);
  CHECK(a.train.interactions == b.train.interactions);

  for (int u = 0; u < table.num_users; ++u) {
    const auto& history = table.user_items[u];
    CHECK(std::binary_search(history.begin(), history.end(), a.test_positive[u]));
    const auto& train_items = a.train.user_items[u];
    CHECK(!std::binary_search(train_items.begin(), train_items.end(), a.test_positive[u]));
    REQUIRE(a.test_negatives[u].size() == 20);
    std::set<int> negs(a.test_negatives[u].begin(), a.test_negatives[u].end());
    CHECK(negs.size() == 20);  // without replacement
    for (int n : negs) CHECK(!std::binary_search(history.begin(), history.end(), n));
  }
}

TEST_CASE("split rejects infeasible inputs") {
  // A user with a single interaction cannot be split.
  auto raw = make_raw({{"u1", "i1"}, {"u2", "i1"}, {"u2", "i2"}});
  auto [table, g0] = build_table(raw, 0, 0);
  CHECK_THROWS_AS(split_leave_one_out(table, 1, 1), DataError);

  // Negative pool smaller than requested: 5 items, user saw 3, wants 99.
  auto raw2 = make_raw({{"u1", "i1"},
                        {"u1", "i2"},
                        {"u1", "i3"},
                        {"u2", "i4"},
                        {"u2", "i5"}});
  auto [table2, g2] = build_table(raw2, 0, 0);
  CHECK_THROWS_AS(split_leave_one_out(table2, 1, 99), DataError);
}

TEST_CASE("finalize validates indices and duplicates") {
  InteractionTable t;
  t.num_users = 2;
  t.num_items = 2;
  t.user_keys = {"a", "b"};
  t.item_keys = {"x", "y"};
  t.interactions = {{0, 0}, {0, 0}};
  CHECK_THROWS_AS(t.finalize(), DataError);
  t.interactions = {{0, 0}, {1, 2}};
  CHECK_THROWS_AS(t.finalize(), DataError);
  t.interactions = {{0, 0}, {1, 1}};
  t.finalize();
  CHECK(t.user_items[0] == std::vector<int>{0});
  CHECK(t.item_users[1] == std::vector<int>{1});
}
