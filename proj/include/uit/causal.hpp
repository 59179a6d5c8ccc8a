#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/gbtree.hpp"

namespace uit {

struct TreatmentAssignment {
  std::vector<int> w;  // 1 = treated
  std::string source_feature;
  std::string binarization;  // "native" or "median>c"
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
};

/// Cross-fitted nuisance estimates: every row's prediction comes from a
/// model that never saw that row. e_hat is clipped into
/// [clip, 1-clip] as the overlap guard.
struct NuisanceModels {
  std::vector<double> e_hat;    // propensity
  std::vector<double> mu1_hat;  // outcome under treatment
  std::vector<double> mu0_hat;  // outcome under control
  double clip = 0.05;
};

struct NuisanceConfig {
  BoostConfig propensity;   // logistic, W from controls
  BoostConfig outcome;      // objective chosen from the outcome values
  double clip = 0.05;
  double early_stop_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct CausalTreeNode {
  int feature = -1;  // -1 for leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double tau = 0.0;           // estimation-half mean score (leaves)
  double delta_tau_sq = 0.0;  // achieved split score (internal nodes)
  int n_est_treated = 0;
  int n_est_control = 0;
};

/// Honest causal tree: structure grown only on the splitting half, leaf
/// effects estimated only on the estimation half. A leaf whose estimation
/// sample lacks min_leaf rows per arm inherits the nearest sufficient
/// ancestor's estimate, so structure never depends on estimation rows.
struct CausalTree {
  std::vector<CausalTreeNode> nodes;

  int leaf_index(const double* x) const {
    int n = 0;
    while (nodes[n].feature >= 0) {
      n = x[nodes[n].feature] < nodes[n].threshold ? nodes[n].left
                                                   : nodes[n].right;
    }
    return n;
  }
};

struct CausalForestConfig {
  int n_trees = 1000;
  int max_depth = 10;
  double subsample_fraction = 0.5;  // share of the bootstrap kept per tree
  double honest_fraction = 0.8;     // share of the subsample used for splits
  int min_leaf = 5;                 // per arm, both halves
  int quantile_grid = 64;           // 0 = exhaustive split search
  std::uint64_t seed = 0;
  int threads = 0;
};

struct CausalForestModel {
  std::vector<CausalTree> trees;
  CausalForestConfig cfg;
  std::vector<std::string> feature_names;
};

struct AteResult {
  double ate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;   // ate - 1.96 se
  double ci_high = 0.0;  // ate + 1.96 se
  double p_value = 1.0;  // two-sided normal
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  bool significant = false;  // p <= 0.05
};

struct SweepEntry {
  std::string treatment;
  double mean_abs_shap = 0.0;
  std::optional<AteResult> ate;
  std::string error;  // non-empty when the treatment failed
  double cate_mean = 0.0;
  double cate_sd = 0.0;
};

/// Binary columns (exactly two distinct values) pass through with the larger
/// value treated; numeric columns split at the median (treated = above).
TreatmentAssignment binarize_treatment(const Dataset& ds,
                                       const std::string& feature);

/// Cross-fitted propensity and outcome regressions. The propensity model
/// must not see the treatment's source feature; drop it before calling.
NuisanceModels fit_nuisance(const Dataset& ds, const TreatmentAssignment& w,
                            const std::vector<double>& y, const FoldPlan& folds,
                            const NuisanceConfig& cfg);

/// Doubly robust scores whose mean estimates the average treatment effect:
///   mu1 - mu0 + W (Y - mu1)/e - (1-W) (Y - mu0)/(1-e)
std::vector<double> aipw_scores(const std::vector<double>& y,
                                const TreatmentAssignment& w,
                                const NuisanceModels& nuisance);

/// Grows one honest tree from explicit structure/estimation row sets.
/// Exposed so tests can assert structure invariance directly.
CausalTree grow_causal_tree(const Dataset& ds, const std::vector<int>& w,
                            const std::vector<double>& scores,
                            const std::vector<std::size_t>& structure_rows,
                            const std::vector<std::size_t>& estimation_rows,
                            const CausalForestConfig& cfg);

/// Per tree: bootstrap with replacement, subsample, honest structure /
/// estimation split, greedy (tau_left - tau_right)^2 splits over the
/// structure half, estimation-half leaf effects.
CausalForestModel fit_causal_forest(const Dataset& ds,
                                    const TreatmentAssignment& w,
                                    const std::vector<double>& y,
                                    const NuisanceModels& nuisance,
                                    const CausalForestConfig& cfg);

/// Per-row mean of leaf effects across all trees.
std::vector<double> estimate_cate(const CausalForestModel& model,
                                  const Dataset& ds);

AteResult estimate_ate(const std::vector<double>& scores,
                       std::size_t n_treated = 0, std::size_t n_control = 0);

struct SweepConfig {
  NuisanceConfig nuisance;
  CausalForestConfig forest;
  int k_folds = 5;
  std::uint64_t seed = 0;
};

/// Full nuisance + forest + ATE pipeline per treatment, the remaining
/// retained features serving as controls. Per-treatment failures are
/// recorded and the sweep continues. Input order (the SHAP ranking) is
/// preserved.
std::vector<SweepEntry> treatment_sweep(
    const Dataset& ds, const std::vector<double>& y,
    const std::vector<std::pair<std::string, double>>& treatments,
    const SweepConfig& cfg);

std::string ate_table_csv(const std::vector<SweepEntry>& entries);
std::string ate_table_json(const std::vector<SweepEntry>& entries);
std::string ci_bars_csv(const std::vector<SweepEntry>& entries);

}  // namespace uit
