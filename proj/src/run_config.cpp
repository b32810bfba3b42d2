#include "protofair/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "protofair/common.hpp"
#include "protofair/json_util.hpp"

namespace protofair {

namespace {

DataConfig data_from_json(const nlohmann::json& j) {
  check_known_keys(j, "data config",
                   {"interactions", "metadata", "labels", "min_user_interactions",
                    "min_item_interactions", "require_country", "min_country_coverage",
                    "n_test_negatives", "groups"});
  DataConfig d;
  read_field(j, "interactions", d.interactions);
  read_field(j, "metadata", d.metadata);
  read_field(j, "labels", d.labels);
  read_field(j, "min_user_interactions", d.min_user_interactions);
  read_field(j, "min_item_interactions", d.min_item_interactions);
  read_field(j, "require_country", d.require_country);
  read_field(j, "min_country_coverage", d.min_country_coverage);
  read_field(j, "n_test_negatives", d.n_test_negatives);
  if (j.contains("groups")) {
    const auto& g = j.at("groups");
    check_known_keys(g, "data.groups", {"over", "under"});
    read_field(g, "over", d.over_countries);
    read_field(g, "under", d.under_countries);
  }
  return d;
}

nlohmann::json data_to_json(const DataConfig& d) {
  nlohmann::json j{{"interactions", d.interactions},
                   {"metadata", d.metadata},
                   {"labels", d.labels},
                   {"min_user_interactions", d.min_user_interactions},
                   {"min_item_interactions", d.min_item_interactions},
                   {"require_country", d.require_country},
                   {"min_country_coverage", d.min_country_coverage},
                   {"n_test_negatives", d.n_test_negatives}};
  j["groups"] = nlohmann::json{{"over", d.over_countries}, {"under", d.under_countries}};
  return j;
}

SynthSpec synth_from_json(const nlohmann::json& j) {
  check_known_keys(j, "synth config",
                   {"n_users", "n_items", "draws_per_user", "gamma", "countries"});
  SynthSpec s;
  read_field(j, "n_users", s.n_users);
  read_field(j, "n_items", s.n_items);
  read_field(j, "draws_per_user", s.draws_per_user);
  read_field(j, "gamma", s.gamma);
  if (j.contains("countries")) {
    for (const auto& cj : j.at("countries")) {
      check_known_keys(cj, "synth country", {"code", "item_share", "multiplier", "group"});
      SynthCountry c;
      read_field(cj, "code", c.code);
      read_field(cj, "item_share", c.item_share);
      read_field(cj, "multiplier", c.multiplier);
      read_field(cj, "group", c.group);
      s.countries.push_back(std::move(c));
    }
  }
  return s;
}

nlohmann::json synth_to_json(const SynthSpec& s) {
  nlohmann::json countries = nlohmann::json::array();
  for (const SynthCountry& c : s.countries) {
    countries.push_back({{"code", c.code},
                         {"item_share", c.item_share},
                         {"multiplier", c.multiplier},
                         {"group", c.group}});
  }
  return nlohmann::json{{"n_users", s.n_users},
                        {"n_items", s.n_items},
                        {"draws_per_user", s.draws_per_user},
                        {"gamma", s.gamma},
                        {"countries", std::move(countries)}};
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (data.min_country_coverage < 0.0 || data.min_country_coverage > 1.0) {
    throw ConfigError("min_country_coverage must lie in [0,1]");
  }
  if (data.n_test_negatives < 1) throw ConfigError("n_test_negatives must be >= 1");
  if (explain.n_protos < 1) throw ConfigError("explain.n_protos must be >= 1");
  if (explain.m_exemplars < 1) throw ConfigError("explain.m_exemplars must be >= 1");
  if (explain.projection != "items" && explain.projection != "prototypes" &&
      explain.projection != "both") {
    throw ConfigError("explain.projection must be items, prototypes or both");
  }
  std::set<std::string> names;
  for (const AblationVariant& v : ablations) {
    if (v.name.empty()) throw ConfigError("ablation variants need a name");
    if (!names.insert(v.name).second) {
      throw ConfigError("duplicate ablation variant name '" + v.name + "'");
    }
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_known_keys(j, "run config",
                   {"seed", "out_dir", "threads", "data", "synth", "train", "eval", "explain"});
  RunConfig cfg;
  read_field(j, "seed", cfg.seed);
  read_field(j, "out_dir", cfg.out_dir);
  read_field(j, "threads", cfg.threads);
  if (j.contains("data")) cfg.data = data_from_json(j.at("data"));
  if (j.contains("synth")) cfg.synth = synth_from_json(j.at("synth"));
  if (j.contains("train")) {
    nlohmann::json t = j.at("train");
    if (t.contains("ablations")) {
      for (const auto& vj : t.at("ablations")) {
        check_known_keys(vj, "ablation variant", {"name", "overrides", "grid"});
        AblationVariant v;
        read_field(vj, "name", v.name);
        v.overrides = vj.value("overrides", nlohmann::json::object());
        v.grid = vj.value("grid", nlohmann::json::object());
        if (!v.overrides.is_object()) throw ConfigError("ablation overrides must be an object");
        if (!v.grid.is_object()) throw ConfigError("ablation grid must be an object");
        cfg.ablations.push_back(std::move(v));
      }
      t.erase("ablations");
    }
    if (t.contains("seed")) {
      throw ConfigError("train.seed is not configurable; the top-level seed is fanned out");
    }
    cfg.train = train_config_from_json(t);
  }
  cfg.train.seed = cfg.seed;
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_known_keys(e, "eval config", {"comparison", "detail"});
    read_field(e, "comparison", cfg.eval.comparison);
    read_field(e, "detail", cfg.eval.detail);
  }
  if (j.contains("explain")) {
    const auto& e = j.at("explain");
    check_known_keys(e, "explain config",
                     {"items", "variant", "n_protos", "m_exemplars", "projection"});
    read_field(e, "items", cfg.explain.items);
    read_field(e, "variant", cfg.explain.variant);
    read_field(e, "n_protos", cfg.explain.n_protos);
    read_field(e, "m_exemplars", cfg.explain.m_exemplars);
    read_field(e, "projection", cfg.explain.projection);
  }
  cfg.validate();
  return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json train = train_config_to_json(cfg.train);
  train.erase("seed");
  nlohmann::json ablations = nlohmann::json::array();
  for (const AblationVariant& v : cfg.ablations) {
    ablations.push_back({{"name", v.name}, {"overrides", v.overrides}, {"grid", v.grid}});
  }
  train["ablations"] = std::move(ablations);
  return nlohmann::json{
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"threads", cfg.threads},
      {"data", data_to_json(cfg.data)},
      {"synth", synth_to_json(cfg.synth)},
      {"train", std::move(train)},
      {"eval", nlohmann::json{{"comparison", cfg.eval.comparison}, {"detail", cfg.eval.detail}}},
      {"explain", nlohmann::json{{"items", cfg.explain.items},
                                 {"variant", cfg.explain.variant},
                                 {"n_protos", cfg.explain.n_protos},
                                 {"m_exemplars", cfg.explain.m_exemplars},
                                 {"projection", cfg.explain.projection}}}};
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // bare words are strings
  }

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set path has an empty segment: '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key)) (*node)[key] = nlohmann::json::object();
    node = &(*node)[key];
    if (!node->is_object()) {
      throw ConfigError("--set path '" + path + "' descends into a non-object");
    }
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  return run_config_from_json(doc);
}

std::vector<std::pair<std::string, TrainConfig>> expand_variants(const RunConfig& cfg) {
  const nlohmann::json base = train_config_to_json(cfg.train);
  std::vector<std::pair<std::string, TrainConfig>> out;

  auto realize = [&](const std::string& name, const nlohmann::json& patch) {
    nlohmann::json merged = base;
    for (const auto& [key, value] : patch.items()) merged[key] = value;
    TrainConfig tc = train_config_from_json(merged);
    tc.seed = cfg.seed;  // identical base seed across variants for paired runs
    tc.validate();
    out.emplace_back(name, std::move(tc));
  };

  if (cfg.ablations.empty()) {
    realize("default", nlohmann::json::object());
    return out;
  }
  for (const AblationVariant& v : cfg.ablations) {
    if (v.grid.empty()) {
      realize(v.name, v.overrides);
      continue;
    }
    // Cartesian product over the grid axes (axes in key order).
    std::vector<std::pair<std::string, nlohmann::json>> axes;
    for (const auto& [field, values] : v.grid.items()) {
      if (!values.is_array() || values.empty()) {
        throw ConfigError("grid axis '" + field + "' must be a nonempty array");
      }
      axes.emplace_back(field, values);
    }
    std::vector<std::size_t> idx(axes.size(), 0);
    bool done = false;
    while (!done) {
      nlohmann::json patch = v.overrides;
      std::string name = v.name;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const nlohmann::json& value = axes[a].second[idx[a]];
        patch[axes[a].first] = value;
        std::string vs = value.dump();
        vs.erase(std::remove(vs.begin(), vs.end(), '"'), vs.end());
        name += "_" + axes[a].first + "-" + vs;
      }
      realize(name, patch);
      std::size_t a = 0;
      for (; a < axes.size(); ++a) {
        if (++idx[a] < axes[a].second.size()) break;
        idx[a] = 0;
      }
      done = a == axes.size();
    }
  }
  std::set<std::string> names;
  for (const auto& [name, tc] : out) {
    if (!names.insert(name).second) {
      throw ConfigError("duplicate expanded variant name '" + name + "'");
    }
  }
  return out;
}

}  // namespace protofair
