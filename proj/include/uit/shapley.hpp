#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/gbtree.hpp"

namespace uit {

/// Per-observation, per-feature attributions on the margin (log-odds) scale.
/// For every row, base_value + sum over features equals the model margin.
struct ShapMatrix {
  std::vector<std::vector<double>> values;  // [row][feature]
  double base_value = 0.0;
  std::vector<std::string> feature_names;
};

struct RankEntry {
  std::string name;
  double mean_abs_shap = 0.0;
};

/// Features sorted by descending mean |phi|, ties broken by name. The
/// retained set is everything strictly above the threshold.
struct FeatureRanking {
  std::vector<RankEntry> entries;
  double threshold = 0.0;

  std::vector<std::string> retained() const;
};

struct ShapConfig {
  std::size_t background_cap = 256;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// Direct evaluation of the subset sum: the value function is the mean
/// model margin over background rows with features in S taken from x and
/// the rest from the background row. Enumerates all 2^d subsets, so d is
/// capped at 20. Reference implementation the fast path is checked against.
std::vector<double> shap_exact_oracle(const TreeEnsemble& model,
                                      const std::vector<double>& x,
                                      const Dataset& background);

/// Polynomial-time interventional attribution. Per (row, background row,
/// tree) a single pass over reachable nodes classifies each decision
/// feature as foreground- or background-constrained and applies the
/// closed-form weight for conjunction games; averaging over the background
/// matches shap_exact_oracle. Rows are processed in parallel with
/// deterministic output.
ShapMatrix shap_tree(const TreeEnsemble& model, const Dataset& ds,
                     const Dataset& background,
                     const ShapConfig& cfg = ShapConfig{});

FeatureRanking rank_features(const ShapMatrix& shap, double threshold);

struct BeeswarmRecord {
  std::string feature;
  double shap_value = 0.0;
  double raw_value = 0.0;
  int rank = 0;  // 0 = most important
};

/// Long-format plot data: one record per (row, feature), ordered by rank
/// then row. raw must be row-aligned with the attribution matrix.
std::vector<BeeswarmRecord> beeswarm_export(const ShapMatrix& shap,
                                            const Dataset& raw);

std::string shap_matrix_to_csv(const ShapMatrix& shap);
std::string shap_sidecar_json(const ShapMatrix& shap);
std::string ranking_to_csv(const FeatureRanking& ranking);
std::string beeswarm_to_csv(const std::vector<BeeswarmRecord>& records);

}  // namespace uit
