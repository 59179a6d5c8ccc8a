#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/report.hpp"

namespace uit {

enum class Objective { Logistic, SquaredError };

struct BoostConfig {
  int max_trees = 500;
  int max_depth = 6;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double l2_lambda = 1.0;
  int early_stopping_rounds = 50;
  std::uint64_t seed = 0;
  Objective objective = Objective::Logistic;
};

/// One regression tree stored as parallel node arrays. Leaves have
/// split_feature == -1 and carry the additive output in value. Routing:
/// x[feature] < threshold goes left, ties go right.
struct Tree {
  std::vector<int> split_feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;
  std::vector<double> gain;  // accepted split gain; diagnostic, not serialized

  int leaf_index(const double* x) const {
    int n = 0;
    while (split_feature[n] >= 0) {
      n = x[split_feature[n]] < threshold[n] ? left[n] : right[n];
    }
    return n;
  }
  double output(const double* x) const { return value[leaf_index(x)]; }
  std::size_t size() const { return split_feature.size(); }
};

/// Boosted ensemble with additive raw scores. For the logistic objective the
/// raw score is log-odds and prediction = sigmoid(base_score + lr * sum of
/// tree outputs); trees store unscaled leaf values.
struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;
  double learning_rate = 0.1;
  Objective objective = Objective::Logistic;
  std::vector<std::string> feature_names;

  double margin(const double* x) const {
    // per-tree scaling keeps prefix additivity exact
    double acc = base_score;
    for (const auto& t : trees) acc += learning_rate * t.output(x);
    return acc;
  }
};

struct CvResult {
  std::vector<MetricSet> folds;
  MetricSet mean;
};

/// Greedy second-order boosting with exact split search over sorted unique
/// values. Adds trees while validation loss improves; the returned ensemble
/// is truncated to the best validation round (possibly zero trees).
TreeEnsemble fit(const Dataset& train, const Dataset& valid,
                 const BoostConfig& cfg);

/// Same optimizer with explicit targets: {0,1} values for the logistic
/// objective, arbitrary reals for squared error. Dataset labels are ignored.
TreeEnsemble fit_values(const Dataset& train,
                        const std::vector<double>& y_train,
                        const Dataset& valid,
                        const std::vector<double>& y_valid,
                        const BoostConfig& cfg);

std::vector<double> predict_margin(const TreeEnsemble& model,
                                   const Dataset& ds);
/// Probabilities in (0,1); logistic objective only.
std::vector<double> predict_proba(const TreeEnsemble& model,
                                  const Dataset& ds);

/// Per-fold fit/evaluate: each fold trains on the other k-1 folds with an
/// internal stratified slice for early stopping and is scored on the held-out
/// fold at threshold 0.5.
CvResult cross_validate(const Dataset& ds, const FoldPlan& folds,
                        const BoostConfig& cfg);

std::string ensemble_to_json(const TreeEnsemble& model);
TreeEnsemble ensemble_from_json(const std::string& text);
void save_ensemble(const TreeEnsemble& model, const std::string& path);
TreeEnsemble load_ensemble(const std::string& path);

double sigmoid(double z);

}  // namespace uit
