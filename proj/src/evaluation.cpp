#include "protofair/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "protofair/common.hpp"

namespace protofair {

std::vector<int> order_by_score(const std::vector<int>& candidates,
                                const std::vector<double>& scores) {
  if (candidates.size() != scores.size()) {
    throw DataError("candidate and score lists differ in length");
  }
  std::set<int> seen(candidates.begin(), candidates.end());
  if (seen.size() != candidates.size()) throw DataError("duplicate candidate in ranked list");

  std::vector<int> pos(candidates.size());
  std::iota(pos.begin(), pos.end(), 0);
  std::sort(pos.begin(), pos.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<int> ordered(candidates.size());
  for (std::size_t r = 0; r < pos.size(); ++r) ordered[r] = candidates[pos[r]];
  return ordered;
}

RankedList rank_candidates(const PrototypeModel& model, int user, int positive,
                           const std::vector<int>& negatives, bool use_filtering) {
  std::vector<int> cands;
  cands.reserve(negatives.size() + 1);
  cands.push_back(positive);
  cands.insert(cands.end(), negatives.begin(), negatives.end());

  const Eigen::VectorXd scores = score_all_items(model, user, cands, use_filtering);
  std::vector<double> score_vec(scores.data(), scores.data() + scores.size());

  RankedList out;
  out.user = user;
  out.candidates = order_by_score(cands, score_vec);
  const auto it = std::find(out.candidates.begin(), out.candidates.end(), positive);
  out.positive_rank = static_cast<int>(it - out.candidates.begin()) + 1;
  return out;
}

UtilityMetrics utility_metrics(const std::vector<RankedList>& lists) {
  if (lists.empty()) throw DataError("utility metrics need at least one ranked list");
  double hits = 0.0, gain = 0.0;
  for (const RankedList& rl : lists) {
    if (rl.positive_rank <= 10) {
      hits += 1.0;
      gain += 1.0 / std::log2(static_cast<double>(rl.positive_rank) + 1.0);
    }
  }
  UtilityMetrics m;
  m.hr_at_10 = hits / static_cast<double>(lists.size());
  m.ndcg_at_10 = gain / static_cast<double>(lists.size());
  if (m.ndcg_at_10 > m.hr_at_10 + 1e-12) {
    throw NumericError("NDCG@10 exceeded HR@10 in the single-positive protocol");
  }
  return m;
}

GroupRankMetrics group_rank_metrics(const std::vector<RankedList>& lists,
                                    const GroupAssignment& groups) {
  double under_sum = 0.0, over_sum = 0.0;
  GroupRankMetrics m;
  for (const RankedList& rl : lists) {
    for (std::size_t p = 0; p < rl.candidates.size(); ++p) {
      const int item = rl.candidates[p];
      const double rank = static_cast<double>(p + 1);
      if (groups.is_under(item)) {
        under_sum += rank;
        ++m.n_under_occurrences;
      }
      if (groups.is_over(item)) {
        over_sum += rank;
        ++m.n_over_occurrences;
      }
    }
  }
  if (m.n_under_occurrences > 0) m.mu_under = under_sum / m.n_under_occurrences;
  if (m.n_over_occurrences > 0) m.mu_over = over_sum / m.n_over_occurrences;
  return m;
}

LongTailMetric long_tail_metric(const std::vector<RankedList>& lists,
                                const GroupAssignment& groups) {
  double sum = 0.0;
  LongTailMetric m;
  for (const RankedList& rl : lists) {
    for (std::size_t p = 0; p < rl.candidates.size(); ++p) {
      if (groups.is_long_tail(rl.candidates[p])) {
        sum += static_cast<double>(p + 1);
        ++m.n_occurrences;
      }
    }
  }
  if (m.n_occurrences > 0) m.mu_long_tail = sum / m.n_occurrences;
  return m;
}

EvalReport evaluate(const PrototypeModel& model, const SplitDataset& split,
                    const GroupAssignment& groups, const EvalOptions& opts) {
  std::vector<int> users;
  for (int u = 0; u < static_cast<int>(split.test_positive.size()); ++u) {
    if (split.test_positive[u] >= 0 && !split.test_negatives[u].empty()) users.push_back(u);
  }
  if (users.empty()) throw DataError("no test users to evaluate");

  std::vector<RankedList> lists(users.size());
  const int n_threads = std::max(1, opts.threads);
  auto worker = [&](int t) {
    for (std::size_t j = t; j < users.size(); j += n_threads) {
      const int u = users[j];
      lists[j] = rank_candidates(model, u, split.test_positive[u], split.test_negatives[u],
                                 opts.use_filtering);
    }
  };
  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (std::thread& th : pool) th.join();
  }

  EvalReport report;
  report.n_users = static_cast<int>(users.size());
  report.config_hash = opts.config_hash;
  const UtilityMetrics um = utility_metrics(lists);
  report.hr_at_10 = um.hr_at_10;
  report.ndcg_at_10 = um.ndcg_at_10;
  const GroupRankMetrics gm = group_rank_metrics(lists, groups);
  report.mu_under = gm.mu_under;
  report.mu_over = gm.mu_over;
  report.n_under_occurrences = gm.n_under_occurrences;
  report.n_over_occurrences = gm.n_over_occurrences;
  const LongTailMetric lt = long_tail_metric(lists, groups);
  report.mu_long_tail = lt.mu_long_tail;
  report.n_long_tail_occurrences = lt.n_occurrences;

  if (opts.detail) {
    report.per_user.reserve(lists.size());
    for (const RankedList& rl : lists) {
      PerUserRow row;
      row.user = rl.user;
      row.positive_rank = rl.positive_rank;
      for (int item : rl.candidates) {
        if (groups.is_under(item)) ++row.n_under_cands;
        if (groups.is_over(item)) ++row.n_over_cands;
        if (groups.is_long_tail(item)) ++row.n_lt_cands;
      }
      report.per_user.push_back(row);
    }
  }
  return report;
}

}  // namespace protofair
