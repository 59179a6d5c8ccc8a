#pragma once

#include <map>
#include <string>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/shapley.hpp"

namespace uit {

/// Spearman rank correlations: symmetric, unit diagonal, entries in [-1, 1].
struct CorrelationMatrix {
  std::vector<std::vector<double>> rho;
  std::vector<std::string> feature_names;
};

struct MergeStep {
  int a = 0;       // cluster ids; leaves are 0..d-1, merges d, d+1, ...
  int b = 0;
  double height = 0.0;
  int id = 0;      // id of the merged cluster
};

struct Dendrogram {
  int n_leaves = 0;
  std::vector<MergeStep> merges;  // d-1 steps, non-decreasing heights
};

enum class Linkage { Single, Complete, Average };

struct ClusterResult {
  Dendrogram dendrogram;
  /// Flat cluster index per feature after cutting at the distance
  /// threshold; ids numbered by each cluster's lowest feature index.
  std::vector<int> assignment;
  int n_clusters = 0;
};

struct VifIteration {
  std::string removed;
  double vif = 0.0;
};

struct VifReport {
  std::vector<VifIteration> iterations;  // removal order
  std::map<std::string, double> final_vifs;
  double threshold = 10.0;
};

/// Pearson correlation of average-tied ranks. Constant columns have no
/// defined rank correlation and are rejected.
CorrelationMatrix spearman(const Dataset& ds);

/// Agglomerative clustering on distance 1 - |rho|. Pair ties break on the
/// lower cluster id. Cutting keeps every merge with height <= threshold.
ClusterResult cluster_features(const CorrelationMatrix& corr,
                               double distance_threshold,
                               Linkage linkage = Linkage::Average);

/// One feature per flat cluster: the highest mean |SHAP| member, ties to the
/// lexicographically smallest name. Order follows cluster numbering.
std::vector<std::string> select_representatives(const ClusterResult& clusters,
                                                const CorrelationMatrix& corr,
                                                const FeatureRanking& ranking);

/// Iteratively removes the highest-VIF feature until all remaining VIFs are
/// below the threshold. VIF_j = 1/(1-R^2) from regressing z-scored column j
/// on the other z-scored columns with an intercept; R^2 >= 1 - 1e-12 counts
/// as infinite. Index ties remove the lower dataset column.
std::pair<Dataset, VifReport> vif_filter(const Dataset& ds, double threshold);

std::string correlation_to_csv(const CorrelationMatrix& corr);
std::string dendrogram_to_json(const Dendrogram& dendro);
std::string vif_report_to_json(const VifReport& report);

}  // namespace uit
