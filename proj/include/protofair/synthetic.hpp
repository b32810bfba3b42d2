#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protofair/interactions.hpp"

namespace protofair {

struct SynthCountry {
  std::string code;
  double item_share = 1.0;   // fraction of items assigned this country
  double multiplier = 1.0;   // popularity multiplier for its items
  std::string group;         // "", "over" or "under"; empty = infer from multiplier
};

// Controlled skewed-popularity generator: item popularity follows
// rank^(-gamma) scaled per country, users draw items without replacement.
struct SynthSpec {
  int n_users = 0;
  int n_items = 0;
  int draws_per_user = 0;
  double gamma = 0.0;
  std::vector<SynthCountry> countries;
};

std::pair<InteractionTable, GroupAssignment> generate_synthetic(const SynthSpec& spec,
                                                                std::uint64_t seed);

}  // namespace protofair
