#include "protofair/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "protofair/common.hpp"

namespace protofair {

std::pair<InteractionTable, GroupAssignment> generate_synthetic(const SynthSpec& spec,
                                                                std::uint64_t seed) {
  if (spec.n_users < 1 || spec.n_items < 1 || spec.draws_per_user < 1)
    throw ConfigError("synthetic spec needs positive n_users, n_items, draws_per_user");
  if (spec.draws_per_user > spec.n_items)
    throw ConfigError("infeasible synthetic spec: draws_per_user (" +
                      std::to_string(spec.draws_per_user) + ") exceeds n_items (" +
                      std::to_string(spec.n_items) + ")");
  if (spec.gamma < 0.0) throw ConfigError("synthetic gamma must be >= 0");
  if (spec.countries.empty()) throw ConfigError("synthetic spec needs >= 1 country");
  double share_sum = 0.0;
  for (const auto& c : spec.countries) {
    if (c.code.empty()) throw ConfigError("synthetic country code must be nonempty");
    if (c.item_share <= 0.0 || c.multiplier <= 0.0)
      throw ConfigError("synthetic country shares and multipliers must be positive");
    share_sum += c.item_share;
  }

  std::mt19937_64 rng(seed);

  // Country labels per item: exact counts by largest remainder, then a seeded
  // shuffle so the popularity rank does not correlate with the country blocks.
  const int m = spec.n_items;
  std::vector<int> counts(spec.countries.size(), 0);
  std::vector<double> remainders(spec.countries.size());
  int assigned = 0;
  for (std::size_t c = 0; c < spec.countries.size(); ++c) {
    double exact = spec.countries[c].item_share / share_sum * m;
    counts[c] = static_cast<int>(exact);
    remainders[c] = exact - counts[c];
    assigned += counts[c];
  }
  std::vector<std::size_t> by_remainder(spec.countries.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < m; ++k, ++assigned) ++counts[by_remainder[k % counts.size()]];

  std::vector<int> item_country_id;
  item_country_id.reserve(m);
  for (std::size_t c = 0; c < spec.countries.size(); ++c)
    item_country_id.insert(item_country_id.end(), counts[c], static_cast<int>(c));
  std::shuffle(item_country_id.begin(), item_country_id.end(), rng);

  // Popularity weight of item j: (j+1)^(-gamma) times its country multiplier.
  std::vector<double> weight(m);
  std::vector<double> cumulative(m);
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    weight[j] = std::pow(static_cast<double>(j + 1), -spec.gamma) *
                spec.countries[item_country_id[j]].multiplier;
    total += weight[j];
    cumulative[j] = total;
  }

  auto draw_item = [&]() {
    std::uniform_real_distribution<double> uni(0.0, total);
    double x = uni(rng);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    if (it == cumulative.end()) return m - 1;
    return static_cast<int>(it - cumulative.begin());
  };

  InteractionTable table;
  table.num_users = spec.n_users;
  table.num_items = m;
  std::vector<bool> drawn(m);
  for (int u = 0; u < spec.n_users; ++u) {
    std::fill(drawn.begin(), drawn.end(), false);
    for (int k = 0; k < spec.draws_per_user; ++k) {
      int item = draw_item();
      while (drawn[item]) item = draw_item();
      drawn[item] = true;
      table.interactions.emplace_back(u, item);
    }
  }

  // Drop items that received no interactions, keeping the index order, so the
  // table satisfies the dense-coverage invariant.
  std::vector<int> hits(m, 0);
  for (const auto& [u, i] : table.interactions) ++hits[i];
  std::vector<int> remap(m, -1);
  int next = 0;
  std::vector<int> surviving_country;
  for (int j = 0; j < m; ++j) {
    if (hits[j] == 0) continue;
    remap[j] = next++;
    surviving_country.push_back(item_country_id[j]);
    table.item_keys.push_back("i" + std::to_string(j));
  }
  table.num_items = next;
  for (auto& [u, i] : table.interactions) i = remap[i];
  for (int u = 0; u < spec.n_users; ++u) table.user_keys.push_back("u" + std::to_string(u));
  table.finalize();

  GroupAssignment groups;
  groups.item_country.reserve(next);
  for (int cid : surviving_country) groups.item_country.push_back(spec.countries[cid].code);
  bool any_explicit = std::any_of(spec.countries.begin(), spec.countries.end(),
                                  [](const SynthCountry& c) { return !c.group.empty(); });
  for (const auto& c : spec.countries) {
    // Explicit group tags win; otherwise countries at or above multiplier 1
    // count as overrepresented and the rest as underrepresented.
    if (any_explicit) {
      if (c.group == "over") groups.overrepresented.insert(c.code);
      else if (c.group == "under") groups.underrepresented.insert(c.code);
      else if (!c.group.empty())
        throw ConfigError("synthetic country group must be 'over', 'under' or empty");
    } else {
      if (c.multiplier >= 1.0) groups.overrepresented.insert(c.code);
      else groups.underrepresented.insert(c.code);
    }
  }
  groups.long_tail_items = compute_long_tail(table);
  return {std::move(table), std::move(groups)};
}

}  // namespace protofair
