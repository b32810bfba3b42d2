#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "protofair/common.hpp"
#include "protofair/evaluation.hpp"
#include "protofair/model.hpp"
#include "support.hpp"

using namespace protofair;

namespace {

// Fully independent evaluator: per-pair scoring, pair sort, occurrence scans.
struct BruteReport {
  double hr = 0.0, ndcg = 0.0;
  std::optional<double> mu_under, mu_over, mu_lt;
  long n_under = 0, n_over = 0, n_lt = 0;
};

BruteReport brute_evaluate(const PrototypeModel& model, const SplitDataset& split,
                           const GroupAssignment& groups, bool use_filtering) {
  BruteReport r;
  double hits = 0.0, gain = 0.0, su = 0.0, so = 0.0, sl = 0.0;
  int n_users = 0;
  for (int u = 0; u < static_cast<int>(split.test_positive.size()); ++u) {
    if (split.test_positive[u] < 0) continue;
    ++n_users;
    std::vector<int> cands = {split.test_positive[u]};
    cands.insert(cands.end(), split.test_negatives[u].begin(), split.test_negatives[u].end());
    std::vector<std::pair<double, int>> scored;
    for (int c : cands) scored.push_back({affinity(model, u, c, use_filtering), c});
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    int rank = 0;
    for (std::size_t p = 0; p < scored.size(); ++p)
      if (scored[p].second == split.test_positive[u]) rank = static_cast<int>(p) + 1;
    if (rank <= 10) {
      hits += 1.0;
      gain += 1.0 / std::log2(rank + 1.0);
    }
    for (std::size_t p = 0; p < scored.size(); ++p) {
      int item = scored[p].second;
      double pos = static_cast<double>(p + 1);
      if (groups.is_under(item)) {
        su += pos;
        ++r.n_under;
      }
      if (groups.is_over(item)) {
        so += pos;
        ++r.n_over;
      }
      if (groups.is_long_tail(item)) {
        sl += pos;
        ++r.n_lt;
      }
    }
  }
  r.hr = hits / n_users;
  r.ndcg = gain / n_users;
  if (r.n_under > 0) r.mu_under = su / r.n_under;
  if (r.n_over > 0) r.mu_over = so / r.n_over;
  if (r.n_lt > 0) r.mu_lt = sl / r.n_lt;
  return r;
}

RankedList list_with_ranks(const std::vector<int>& ordered, int positive_rank) {
  RankedList rl;
  rl.candidates = ordered;
  rl.positive_rank = positive_rank;
  return rl;
}

}  // namespace

TEST_CASE("order_by_score sorts descending with index tie-break") {
  std::vector<int> cands = {7, 3, 9, 5};
  std::vector<double> scores = {1.0, 2.0, 1.0, 0.5};
  std::vector<int> ordered = order_by_score(cands, scores);
  CHECK(ordered == std::vector<int>{3, 7, 9, 5});

  std::vector<double> equal(4, 1.0);
  CHECK(order_by_score(cands, equal) == std::vector<int>{3, 5, 7, 9});

  CHECK_THROWS_AS(order_by_score({1, 1}, {0.5, 0.6}), DataError);
  CHECK_THROWS_AS(order_by_score({1, 2}, {0.5}), DataError);
}

TEST_CASE("rank_candidates matches a brute-force sort") {
  PrototypeModel m = protofair::testing::fd_model(30, 4, 12, 3, 2, 2, 1, 1);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    int user = static_cast<int>(rng() % 4);
    std::vector<int> pool(12);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    int positive = pool[0];
    std::vector<int> negatives(pool.begin() + 1, pool.begin() + 5);
    for (bool filt : {false, true}) {
      RankedList rl = rank_candidates(m, user, positive, negatives, filt);
      std::vector<std::pair<double, int>> scored;
      scored.push_back({affinity(m, user, positive, filt), positive});
      for (int n : negatives) scored.push_back({affinity(m, user, n, filt), n});
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      REQUIRE(rl.candidates.size() == 5);
      for (int p = 0; p < 5; ++p) CHECK(rl.candidates[p] == scored[p].second);
      CHECK(rl.candidates[rl.positive_rank - 1] == positive);
    }
  }
}

TEST_CASE("utility metrics on hand instances") {
  std::vector<RankedList> all_first = {list_with_ranks({1, 2, 3}, 1),
                                       list_with_ranks({2, 1, 3}, 1)};
  UtilityMetrics top = utility_metrics(all_first);
  CHECK(top.hr_at_10 == 1.0);
  CHECK(top.ndcg_at_10 == 1.0);

  std::vector<int> eleven(11);
  std::iota(eleven.begin(), eleven.end(), 0);
  UtilityMetrics miss = utility_metrics({list_with_ranks(eleven, 11)});
  CHECK(miss.hr_at_10 == 0.0);
  CHECK(miss.ndcg_at_10 == 0.0);

  UtilityMetrics pair = utility_metrics(
      {list_with_ranks({1, 2, 3}, 1), list_with_ranks({1, 2, 3}, 2)});
  CHECK(pair.hr_at_10 == 1.0);
  double want = (1.0 + 1.0 / std::log2(3.0)) / 2.0;
  CHECK(pair.ndcg_at_10 == doctest::Approx(want).epsilon(1e-12));
  CHECK(pair.ndcg_at_10 == doctest::Approx(0.8155).epsilon(1e-4));
  CHECK(pair.ndcg_at_10 <= pair.hr_at_10);
}

TEST_CASE("group rank metrics average occurrences and go absent at zero") {
  GroupAssignment groups;
  groups.item_country = {"UU", "OO", "XX", "UU", "OO", "XX"};
  groups.underrepresented = {"UU"};
  groups.overrepresented = {"OO"};

  // Candidates at ranks 1..6; under items 0 and 3 sit at ranks 1 and 4.
  std::vector<RankedList> lists = {list_with_ranks({0, 1, 2, 3, 4, 5}, 1)};
  GroupRankMetrics m = group_rank_metrics(lists, groups);
  REQUIRE(m.mu_under.has_value());
  CHECK(*m.mu_under == doctest::Approx((1.0 + 4.0) / 2.0).epsilon(1e-12));
  CHECK(m.n_under_occurrences == 2);
  REQUIRE(m.mu_over.has_value());
  CHECK(*m.mu_over == doctest::Approx((2.0 + 5.0) / 2.0).epsilon(1e-12));

  // No group members among the candidates: absent, not zero.
  std::vector<RankedList> only_xx = {list_with_ranks({2, 5}, 1)};
  GroupRankMetrics absent = group_rank_metrics(only_xx, groups);
  CHECK(!absent.mu_under.has_value());
  CHECK(!absent.mu_over.has_value());
  CHECK(absent.n_under_occurrences == 0);
}

TEST_CASE("a group occupying the first n ranks averages to the prefix mean") {
  const int n_g = 7, total = 50;
  GroupAssignment groups;
  groups.item_country.assign(total, "XX");
  for (int i = 0; i < n_g; ++i) groups.item_country[i] = "UU";
  groups.underrepresented = {"UU"};
  groups.overrepresented = {"OO"};
  std::vector<int> ordered(total);
  std::iota(ordered.begin(), ordered.end(), 0);  // group items at ranks 1..7
  GroupRankMetrics m = group_rank_metrics({list_with_ranks(ordered, 1)}, groups);
  REQUIRE(m.mu_under.has_value());
  CHECK(*m.mu_under == doctest::Approx((n_g + 1) / 2.0).epsilon(1e-12));
}

TEST_CASE("long-tail items pinned to the last ten ranks average 95.5") {
  const int total = 100;
  GroupAssignment groups;
  groups.item_country.assign(total, "XX");
  for (int i = 90; i < total; ++i) groups.long_tail_items.insert(i);
  std::vector<int> ordered(total);
  std::iota(ordered.begin(), ordered.end(), 0);  // tail items at ranks 91..100
  LongTailMetric m = long_tail_metric({list_with_ranks(ordered, 1)}, groups);
  REQUIRE(m.mu_long_tail.has_value());
  CHECK(*m.mu_long_tail == doctest::Approx(95.5).epsilon(1e-12));
  CHECK(m.n_occurrences == 10);

  GroupAssignment no_tail;
  no_tail.item_country.assign(total, "XX");
  LongTailMetric absent = long_tail_metric({list_with_ranks(ordered, 1)}, no_tail);
  CHECK(!absent.mu_long_tail.has_value());
}

TEST_CASE("ranking is invariant under monotone score transforms") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> cands(15);
    std::iota(cands.begin(), cands.end(), 0);
    std::shuffle(cands.begin(), cands.end(), rng);
    std::vector<double> scores(15);
    for (double& s : scores) s = uni(rng);
    std::vector<int> base = order_by_score(cands, scores);

    auto transformed = [&](auto f) {
      std::vector<double> t(scores.size());
      std::transform(scores.begin(), scores.end(), t.begin(), f);
      return order_by_score(cands, t);
    };
    CHECK(transformed([](double s) { return 3.0 * s + 7.0; }) == base);
    CHECK(transformed([](double s) { return s * s * s; }) == base);
    CHECK(transformed([](double s) { return std::exp(s); }) == base);
    CHECK(transformed([](double s) { return std::tanh(s); }) == base);
  }
}

TEST_CASE("evaluate matches the independent brute-force evaluator exactly") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 3; ++trial) {
    const int n_users = 8, n_items = 18;
    PrototypeModel m =
        protofair::testing::fd_model(40 + trial, n_users, n_items, 3, 2, 3, 1, 2);

    SplitDataset split;
    split.test_positive.assign(n_users, -1);
    split.test_negatives.assign(n_users, {});
    std::vector<int> pool(n_items);
    std::iota(pool.begin(), pool.end(), 0);
    for (int u = 0; u < n_users; ++u) {
      std::shuffle(pool.begin(), pool.end(), rng);
      split.test_positive[u] = pool[0];
      split.test_negatives[u].assign(pool.begin() + 1, pool.begin() + 10);
    }

    GroupAssignment groups;
    const char* codes[] = {"UU", "OO", "XX"};
    for (int i = 0; i < n_items; ++i) groups.item_country.push_back(codes[i % 3]);
    groups.underrepresented = {"UU"};
    groups.overrepresented = {"OO"};
    for (int i = 0; i < n_items; i += 5) groups.long_tail_items.insert(i);

    for (bool filt : {false, true}) {
      EvalOptions opts;
      opts.use_filtering = filt;
      opts.detail = true;
      EvalReport got = evaluate(m, split, groups, opts);
      BruteReport want = brute_evaluate(m, split, groups, filt);
      CHECK(got.hr_at_10 == want.hr);
      CHECK(got.ndcg_at_10 == want.ndcg);
      CHECK(got.mu_under == want.mu_under);
      CHECK(got.mu_over == want.mu_over);
      CHECK(got.mu_long_tail == want.mu_lt);
      CHECK(got.n_under_occurrences == want.n_under);
      CHECK(got.n_over_occurrences == want.n_over);
      CHECK(got.n_long_tail_occurrences == want.n_lt);
      CHECK(got.n_users == n_users);
      CHECK(got.ndcg_at_10 <= got.hr_at_10 + 1e-12);

      // Detail rows count group candidates per user.
      REQUIRE(got.per_user.size() == static_cast<std::size_t>(n_users));
      for (const PerUserRow& row : got.per_user) {
        int nu = 0, no = 0, nl = 0;
        std::vector<int> cands = {split.test_positive[row.user]};
        cands.insert(cands.end(), split.test_negatives[row.user].begin(),
                     split.test_negatives[row.user].end());
        for (int c : cands) {
          if (groups.is_under(c)) ++nu;
          if (groups.is_over(c)) ++no;
          if (groups.is_long_tail(c)) ++nl;
        }
        CHECK(row.n_under_cands == nu);
        CHECK(row.n_over_cands == no);
        CHECK(row.n_lt_cands == nl);
      }
    }
  }
}

TEST_CASE("evaluate is deterministic and thread-count independent") {
  const int n_users = 12, n_items = 30;
  PrototypeModel m = protofair::testing::fd_model(50, n_users, n_items, 4, 3, 3, 2, 2);
  SplitDataset split;
  split.test_positive.assign(n_users, -1);
  split.test_negatives.assign(n_users, {});
  std::mt19937_64 rng(51);
  std::vector<int> pool(n_items);
  std::iota(pool.begin(), pool.end(), 0);
  for (int u = 0; u < n_users; ++u) {
    std::shuffle(pool.begin(), pool.end(), rng);
    split.test_positive[u] = pool[0];
    split.test_negatives[u].assign(pool.begin() + 1, pool.begin() + 16);
  }
  GroupAssignment groups;
  groups.item_country.assign(n_items, "XX");
  for (int i = 0; i < n_items; i += 2) groups.item_country[i] = "UU";
  groups.underrepresented = {"UU"};
  groups.overrepresented = {"OO"};
  groups.long_tail_items = {1, 3, 5};

  EvalOptions one;
  one.threads = 1;
  one.config_hash = "abc";
  EvalOptions four;
  four.threads = 4;
  four.config_hash = "abc";
  EvalReport a = evaluate(m, split, groups, one);
  EvalReport b = evaluate(m, split, groups, one);
  EvalReport c = evaluate(m, split, groups, four);
  CHECK(a.hr_at_10 == b.hr_at_10);
  CHECK(a.ndcg_at_10 == b.ndcg_at_10);
  CHECK(a.mu_under == b.mu_under);
  CHECK(a.hr_at_10 == c.hr_at_10);
  CHECK(a.ndcg_at_10 == c.ndcg_at_10);
  CHECK(a.mu_under == c.mu_under);
  CHECK(a.mu_over == c.mu_over);
  CHECK(a.mu_long_tail == c.mu_long_tail);
  CHECK(a.config_hash == "abc");
}

TEST_CASE("evaluate requires at least one test user") {
  PrototypeModel m = protofair::testing::fd_model(60, 2, 4, 2, 2, 2, 1, 1);
  SplitDataset split;
  split.test_positive = {-1, -1};
  split.test_negatives = {{}, {}};
  GroupAssignment groups;
  groups.item_country.assign(4, "XX");
  CHECK_THROWS_AS(evaluate(m, split, groups, {}), DataError);
}
