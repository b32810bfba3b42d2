#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "protofair/interactions.hpp"
#include "protofair/model.hpp"

namespace protofair {

struct PrototypeMatch {
  int prototype = 0;
  double similarity = 0.0;  // shifted cosine, in [0, 2]
};

struct ExemplarRef {
  int item = 0;
  double similarity = 0.0;
  std::string country;
  bool same_country = false;  // shares the target item's country
  std::string label;
};

struct ProtoBlock {
  int prototype = 0;
  double similarity = 0.0;
  std::vector<ExemplarRef> exemplars;  // non-increasing similarity
};

struct Explanation {
  int item = 0;
  std::string label;
  std::string country;
  std::vector<ProtoBlock> prototypes;  // non-increasing similarity
  bool labels_missing = false;
};

// Top-n item prototypes by shifted cosine to the item embedding; similarity
// ties break toward the lower prototype index.
std::vector<PrototypeMatch> nearest_prototypes(const PrototypeModel& model, int item, int n);

// Top-m items by shifted cosine to one item prototype, skipping `exclude`.
// Returns fewer than m when the remaining pool is smaller.
std::vector<ExemplarRef> prototype_exemplars(const PrototypeModel& model, int prototype, int m,
                                             const std::set<int>& exclude = {});

// Composition of the two lookups, with country marking and optional labels.
// Items missing from `labels` keep an empty label and set labels_missing.
Explanation explain_item(const PrototypeModel& model, int item, int n_protos, int m_exemplars,
                         const GroupAssignment& groups,
                         const std::map<int, std::string>& labels = {});

// Fixed-width text table: target row, then one column per prototype whose
// cells list exemplars with similarities to two decimals.
std::string format_explanation(const Explanation& ex, const std::vector<std::string>& item_keys);

struct Pca2d {
  Eigen::MatrixXd projection;   // n x 2
  Eigen::MatrixXd components;   // d x 2, first column = leading component
  Eigen::VectorXd eigenvalues;  // all d covariance eigenvalues, descending
  Eigen::RowVectorXd mean;
};

// Deterministic linear PCA: covariance eigenvectors of the mean-centered
// rows, each component's sign fixed so its largest-magnitude loading is
// positive. Needs at least 2 rows and 2 columns.
Pca2d pca_2d(const Eigen::MatrixXd& rows);

enum class ProjectionSubject { kItems, kPrototypes, kBoth };

// Writes `id,kind,country,x,y` rows for the item-space embeddings. The PCA
// basis is fitted on exactly the exported rows.
void export_embedding_projection(const PrototypeModel& model, ProjectionSubject which,
                                 const GroupAssignment& groups,
                                 const std::vector<std::string>& item_keys,
                                 const std::string& out_path);

// Dispersion statistic over prototype rows: mean |cos| across distinct pairs.
double mean_pairwise_abs_cosine(const Eigen::MatrixXd& rows);

}  // namespace protofair
