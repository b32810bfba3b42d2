#include "protofair/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "protofair/common.hpp"

namespace protofair {

std::vector<PrototypeMatch> nearest_prototypes(const PrototypeModel& model, int item, int n) {
  if (item < 0 || item >= model.num_items()) {
    throw DataError("item index out of range: " + std::to_string(item));
  }
  const int n_protos = model.n_item_protos();
  if (n < 1 || n > n_protos) {
    throw ConfigError("nearest-prototype count must lie in [1, " + std::to_string(n_protos) +
                      "]");
  }
  const TransformedVector sims =
      transform(model.items.row(item).transpose(), model.item_protos);
  std::vector<int> order(n_protos);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (sims.values[a] != sims.values[b]) return sims.values[a] > sims.values[b];
    return a < b;
  });
  std::vector<PrototypeMatch> out;
  out.reserve(n);
  for (int j = 0; j < n; ++j) out.push_back({order[j], sims.values[order[j]]});
  return out;
}

std::vector<ExemplarRef> prototype_exemplars(const PrototypeModel& model, int prototype, int m,
                                             const std::set<int>& exclude) {
  if (prototype < 0 || prototype >= model.n_item_protos()) {
    throw DataError("prototype index out of range: " + std::to_string(prototype));
  }
  if (m < 1) throw ConfigError("exemplar count must be >= 1");

  const Eigen::VectorXd proto = model.item_protos.row(prototype).transpose();
  std::vector<std::pair<double, int>> scored;
  scored.reserve(model.num_items());
  for (int i = 0; i < model.num_items(); ++i) {
    if (exclude.count(i) > 0) continue;
    scored.emplace_back(shifted_cosine_floored(model.items.row(i).transpose(), proto), i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ExemplarRef> out;
  for (std::size_t j = 0; j < scored.size() && j < static_cast<std::size_t>(m); ++j) {
    ExemplarRef ref;
    ref.item = scored[j].second;
    ref.similarity = scored[j].first;
    out.push_back(ref);
  }
  return out;
}

Explanation explain_item(const PrototypeModel& model, int item, int n_protos, int m_exemplars,
                         const GroupAssignment& groups,
                         const std::map<int, std::string>& labels) {
  Explanation ex;
  ex.item = item;
  auto label_of = [&](int i) -> std::string {
    const auto it = labels.find(i);
    if (it == labels.end()) {
      ex.labels_missing = true;
      return "";
    }
    return it->second;
  };
  ex.label = label_of(item);
  ex.country = item < static_cast<int>(groups.item_country.size()) ? groups.item_country[item]
                                                                   : std::string();

  for (const PrototypeMatch& pm : nearest_prototypes(model, item, n_protos)) {
    ProtoBlock block;
    block.prototype = pm.prototype;
    block.similarity = pm.similarity;
    block.exemplars = prototype_exemplars(model, pm.prototype, m_exemplars, {item});
    for (ExemplarRef& ref : block.exemplars) {
      ref.country = ref.item < static_cast<int>(groups.item_country.size())
                        ? groups.item_country[ref.item]
                        : std::string();
      ref.same_country = !ex.country.empty() && ref.country == ex.country;
      ref.label = label_of(ref.item);
    }
    ex.prototypes.push_back(std::move(block));
  }
  return ex;
}

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string display_name(const std::string& label, int index,
                         const std::vector<std::string>& keys) {
  if (!label.empty()) return label;
  if (index < static_cast<int>(keys.size())) return keys[index];
  return "#" + std::to_string(index);
}

}  // namespace

std::string format_explanation(const Explanation& ex, const std::vector<std::string>& item_keys) {
  std::ostringstream out;
  out << "item " << display_name(ex.label, ex.item, item_keys);
  if (!ex.country.empty()) out << " [" << ex.country << "]";
  out << "\n";

  std::size_t depth = 0;
  for (const ProtoBlock& b : ex.prototypes) depth = std::max(depth, b.exemplars.size());

  std::vector<std::vector<std::string>> cells;  // [row][col]
  std::vector<std::string> heads;
  for (const ProtoBlock& b : ex.prototypes) {
    heads.push_back("proto " + std::to_string(b.prototype) + " (" + two_decimals(b.similarity) +
                    ")");
  }
  cells.assign(depth, std::vector<std::string>(ex.prototypes.size()));
  for (std::size_t c = 0; c < ex.prototypes.size(); ++c) {
    const ProtoBlock& b = ex.prototypes[c];
    for (std::size_t r = 0; r < b.exemplars.size(); ++r) {
      const ExemplarRef& ref = b.exemplars[r];
      std::string cell = display_name(ref.label, ref.item, item_keys) + " (" +
                         two_decimals(ref.similarity) + ")";
      if (ref.same_country) cell += "*";
      cells[r][c] = std::move(cell);
    }
  }

  std::vector<std::size_t> width(heads.size());
  for (std::size_t c = 0; c < heads.size(); ++c) {
    width[c] = heads[c].size();
    for (std::size_t r = 0; r < depth; ++r) width[c] = std::max(width[c], cells[r][c].size());
  }
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << std::string(width[c] - row[c].size(), ' ');
      out << (c + 1 < row.size() ? "  " : "");
    }
    out << "\n";
  };
  emit_row(heads);
  for (std::size_t r = 0; r < depth; ++r) emit_row(cells[r]);
  if (ex.prototypes.empty()) out << "(no prototypes)\n";
  return out.str();
}

Pca2d pca_2d(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  if (d < 2) throw DataError("projection needs embedding_dim >= 2");
  if (n < 2) throw DataError("projection needs at least 2 rows");

  Pca2d out;
  out.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - out.mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");

  out.eigenvalues = solver.eigenvalues().reverse();
  out.components.resize(d, 2);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd comp = solver.eigenvectors().col(d - 1 - c);
    int arg = 0;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp[arg] < 0.0) comp = -comp;
    out.components.col(c) = comp;
  }
  out.projection = centered * out.components;
  return out;
}

void export_embedding_projection(const PrototypeModel& model, ProjectionSubject which,
                                 const GroupAssignment& groups,
                                 const std::vector<std::string>& item_keys,
                                 const std::string& out_path) {
  std::vector<std::string> ids, kinds, countries;
  const bool items = which != ProjectionSubject::kPrototypes;
  const bool protos = which != ProjectionSubject::kItems;

  int n_rows = (items ? model.num_items() : 0) + (protos ? model.n_item_protos() : 0);
  Eigen::MatrixXd stacked(n_rows, model.dim());
  int r = 0;
  if (items) {
    for (int i = 0; i < model.num_items(); ++i, ++r) {
      stacked.row(r) = model.items.row(i);
      ids.push_back(i < static_cast<int>(item_keys.size()) ? item_keys[i]
                                                           : std::to_string(i));
      kinds.push_back("item");
      countries.push_back(i < static_cast<int>(groups.item_country.size())
                              ? groups.item_country[i]
                              : std::string());
    }
  }
  if (protos) {
    for (int l = 0; l < model.n_item_protos(); ++l, ++r) {
      stacked.row(r) = model.item_protos.row(l);
      ids.push_back("p" + std::to_string(l));
      kinds.push_back("prototype");
      countries.push_back("");
    }
  }

  const Pca2d pca = pca_2d(stacked);
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write projection file: " + out_path);
  out << "# PROTOFAIR-PROJECTION-v1\n";
  out << "id,kind,country,x,y\n";
  out.precision(17);
  for (int i = 0; i < n_rows; ++i) {
    out << ids[i] << "," << kinds[i] << "," << countries[i] << "," << pca.projection(i, 0)
        << "," << pca.projection(i, 1) << "\n";
  }
  if (!out) throw DataError("failed writing projection file: " + out_path);
}

double mean_pairwise_abs_cosine(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  if (n < 2) throw DataError("pairwise cosine needs at least 2 rows");
  double sum = 0.0;
  int count = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      sum += std::abs(shifted_cosine_floored(rows.row(a).transpose(), rows.row(b).transpose()) -
                      1.0);
      ++count;
    }
  }
  return sum / count;
}

}  // namespace protofair
