#pragma once

#include <optional>
#include <string>
#include <vector>

#include "protofair/interactions.hpp"
#include "protofair/model.hpp"

namespace protofair {

// One user's scored candidate list, best first. positive_rank is 1-based.
struct RankedList {
  int user = 0;
  std::vector<int> candidates;
  int positive_rank = 0;
};

// Candidate order under (score descending, item index ascending). Pure so
// the tie contract is testable without a model.
std::vector<int> order_by_score(const std::vector<int>& candidates,
                                const std::vector<double>& scores);

RankedList rank_candidates(const PrototypeModel& model, int user, int positive,
                           const std::vector<int>& negatives, bool use_filtering);

struct UtilityMetrics {
  double hr_at_10 = 0.0;
  double ndcg_at_10 = 0.0;
};

// HR@10 = fraction of users with the positive in the top 10; NDCG@10 uses
// the single-relevant-item gain 1/log2(rank+1).
UtilityMetrics utility_metrics(const std::vector<RankedList>& lists);

struct GroupRankMetrics {
  std::optional<double> mu_under, mu_over;
  long n_under_occurrences = 0, n_over_occurrences = 0;
};

// Mean rank position over every candidate occurrence whose country belongs
// to the group; zero occurrences leave the metric absent.
GroupRankMetrics group_rank_metrics(const std::vector<RankedList>& lists,
                                    const GroupAssignment& groups);

struct LongTailMetric {
  std::optional<double> mu_long_tail;
  long n_occurrences = 0;
};

LongTailMetric long_tail_metric(const std::vector<RankedList>& lists,
                                const GroupAssignment& groups);

struct PerUserRow {
  int user = 0;
  int positive_rank = 0;
  int n_under_cands = 0, n_over_cands = 0, n_lt_cands = 0;
};

struct EvalReport {
  double hr_at_10 = 0.0;
  double ndcg_at_10 = 0.0;
  std::optional<double> mu_under, mu_over, mu_long_tail;
  int n_users = 0;
  long n_under_occurrences = 0, n_over_occurrences = 0, n_long_tail_occurrences = 0;
  std::string config_hash;
  std::vector<PerUserRow> per_user;  // filled when detail is requested
};

struct EvalOptions {
  bool use_filtering = false;
  int threads = 1;
  bool detail = false;
  std::string config_hash;
};

// Ranks every test user's candidates and aggregates all metrics. Thread
// fan-out is per user; aggregation runs in user order, so the report is
// independent of the thread count.
EvalReport evaluate(const PrototypeModel& model, const SplitDataset& split,
                    const GroupAssignment& groups, const EvalOptions& opts = {});

}  // namespace protofair
