#include "uit/gbtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

constexpr double kMinGain = 1e-12;
constexpr double kProbEps = 1e-15;

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  NodeStats left;
};

double leaf_weight(const NodeStats& s, double lambda) {
  return -s.g / (s.h + lambda);
}

double split_gain(const NodeStats& parent, const NodeStats& left,
                  const NodeStats& right, double lambda) {
  auto score = [lambda](const NodeStats& s) {
    return s.g * s.g / (s.h + lambda);
  };
  return 0.5 * (score(left) + score(right) - score(parent));
}

double validation_loss(Objective objective, const std::vector<double>& margins,
                       const std::vector<double>& targets) {
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (objective == Objective::Logistic) {
      double p = sigmoid(margins[i]);
      p = std::min(1.0 - kProbEps, std::max(kProbEps, p));
      loss += targets[i] > 0.5 ? -std::log(p) : -std::log(1.0 - p);
    } else {
      double d = margins[i] - targets[i];
      loss += d * d;
    }
  }
  return loss / static_cast<double>(targets.size());
}

}  // namespace

TreeEnsemble fit_values(const Dataset& train,
                        const std::vector<double>& y_train,
                        const Dataset& valid,
                        const std::vector<double>& y_valid,
                        const BoostConfig& cfg) {
  const std::size_t n = train.n_rows();
  const std::size_t n_features = train.n_cols();
  if (n == 0) fail(Errc::TooFewRows, "empty training set");
  if (valid.n_rows() == 0) fail(Errc::TooFewRows, "empty validation set");
  if (y_train.size() != n || y_valid.size() != valid.n_rows()) {
    fail(Errc::LengthMismatch, "target vectors do not match datasets");
  }
  if (cfg.max_depth < 1 || cfg.learning_rate <= 0.0 ||
      cfg.learning_rate > 1.0 || cfg.max_trees < 0 || cfg.l2_lambda < 0.0) {
    fail(Errc::InvalidSpec, "boost config out of range");
  }

  double y_mean = 0.0;
  for (double y : y_train) y_mean += y;
  y_mean /= static_cast<double>(n);

  TreeEnsemble model;
  model.learning_rate = cfg.learning_rate;
  model.objective = cfg.objective;
  model.feature_names = train.feature_names();
  if (cfg.objective == Objective::Logistic) {
    for (double y : y_train) {
      if (y != 0.0 && y != 1.0) {
        fail(Errc::UnparseableValue, "logistic target outside {0,1}");
      }
    }
    if (y_mean <= 0.0 || y_mean >= 1.0) {
      fail(Errc::OneClassOnly, "training targets are constant");
    }
    model.base_score = std::log(y_mean / (1.0 - y_mean));
  } else {
    model.base_score = y_mean;
  }

  // Presorted row indices per feature; ties broken by row index so tree
  // construction is a pure function of the data.
  std::vector<std::vector<std::uint32_t>> order(n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    auto& idx = order[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0u);
    const auto& col = train.col(f);
    std::sort(idx.begin(), idx.end(), [&col](std::uint32_t a, std::uint32_t b) {
      if (col[a] != col[b]) return col[a] < col[b];
      return a < b;
    });
  }

  std::vector<double> train_margin(n, model.base_score);
  std::vector<double> valid_margin(valid.n_rows(), model.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<double> valid_row(n_features);

  double best_loss = validation_loss(cfg.objective, valid_margin, y_valid);
  std::size_t best_n_trees = 0;
  int rounds_since_best = 0;

  std::vector<std::int32_t> node_of_row(n, 0);

  for (int round = 0; round < cfg.max_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      double y = y_train[i];
      if (cfg.objective == Objective::Logistic) {
        double p = sigmoid(train_margin[i]);
        grad[i] = p - y;
        hess[i] = p * (1.0 - p);
      } else {
        grad[i] = train_margin[i] - y;
        hess[i] = 1.0;
      }
    }

    Tree tree;
    auto add_node = [&tree]() {
      tree.split_feature.push_back(-1);
      tree.threshold.push_back(0.0);
      tree.left.push_back(-1);
      tree.right.push_back(-1);
      tree.value.push_back(0.0);
      tree.gain.push_back(0.0);
      return static_cast<int>(tree.split_feature.size()) - 1;
    };

    int root = add_node();
    std::fill(node_of_row.begin(), node_of_row.end(), root);
    NodeStats root_stats;
    for (std::size_t i = 0; i < n; ++i) {
      root_stats.g += grad[i];
      root_stats.h += hess[i];
    }
    root_stats.count = n;

    std::vector<int> frontier = {root};
    std::vector<NodeStats> stats = {root_stats};  // indexed by node id
    stats.resize(1);
    std::vector<SplitChoice> best;     // per node id
    std::vector<NodeStats> scan;       // per node id, left-side accumulation
    std::vector<double> scan_prev;     // previous value seen per node
    std::vector<char> scan_has_prev;

    for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
      std::size_t n_nodes = tree.size();
      best.assign(n_nodes, SplitChoice{});
      std::vector<char> open(n_nodes, 0);
      for (int id : frontier) open[id] = 1;

      for (std::size_t f = 0; f < n_features; ++f) {
        scan.assign(n_nodes, NodeStats{});
        scan_prev.assign(n_nodes, 0.0);
        scan_has_prev.assign(n_nodes, 0);
        const auto& col = train.col(f);
        for (std::uint32_t r : order[f]) {
          int node = node_of_row[r];
          if (!open[node]) continue;
          double v = col[r];
          NodeStats& ls = scan[node];
          if (scan_has_prev[node] && v > scan_prev[node] && ls.count > 0 &&
              ls.count < stats[node].count) {
            NodeStats rs{stats[node].g - ls.g, stats[node].h - ls.h,
                         stats[node].count - ls.count};
            if (ls.h >= cfg.min_child_weight && rs.h >= cfg.min_child_weight) {
              double gain = split_gain(stats[node], ls, rs, cfg.l2_lambda);
              // strict improvement keeps the first (lowest feature, lowest
              // threshold) candidate on exact ties
              if (gain > kMinGain && gain > best[node].gain) {
                best[node] = {gain, static_cast<int>(f), v, ls};
              }
            }
          }
          ls.g += grad[r];
          ls.h += hess[r];
          ls.count += 1;
          scan_prev[node] = v;
          scan_has_prev[node] = 1;
        }
      }

      std::vector<int> next_frontier;
      for (int id : frontier) {
        if (best[id].feature < 0) {
          tree.value[id] = leaf_weight(stats[id], cfg.l2_lambda);
          continue;
        }
        int l = add_node();
        int r = add_node();
        tree.split_feature[id] = best[id].feature;
        tree.threshold[id] = best[id].threshold;
        tree.left[id] = l;
        tree.right[id] = r;
        tree.gain[id] = best[id].gain;
        stats.resize(tree.size());
        stats[l] = best[id].left;
        stats[r] = {stats[id].g - best[id].left.g,
                    stats[id].h - best[id].left.h,
                    stats[id].count - best[id].left.count};
        next_frontier.push_back(l);
        next_frontier.push_back(r);
      }
      if (!next_frontier.empty()) {
        const auto& thr = tree.threshold;
        const auto& sf = tree.split_feature;
        for (std::size_t i = 0; i < n; ++i) {
          int node = node_of_row[i];
          if (node < static_cast<int>(open.size()) && open[node] &&
              sf[node] >= 0) {
            node_of_row[i] = train.at(i, static_cast<std::size_t>(sf[node])) <
                                     thr[node]
                                 ? tree.left[node]
                                 : tree.right[node];
          }
        }
      }
      frontier = std::move(next_frontier);
    }
    // nodes still open at the depth cap become leaves
    for (int id : frontier) {
      tree.value[id] = leaf_weight(stats[id], cfg.l2_lambda);
    }

    for (std::size_t i = 0; i < n; ++i) {
      train_margin[i] += cfg.learning_rate * tree.value[node_of_row[i]];
    }
    for (std::size_t i = 0; i < valid.n_rows(); ++i) {
      for (std::size_t f = 0; f < n_features; ++f) valid_row[f] = valid.at(i, f);
      valid_margin[i] += cfg.learning_rate * tree.output(valid_row.data());
    }
    model.trees.push_back(std::move(tree));

    double loss = validation_loss(cfg.objective, valid_margin, y_valid);
    if (loss < best_loss - 1e-12) {
      best_loss = loss;
      best_n_trees = model.trees.size();
      rounds_since_best = 0;
    } else {
      ++rounds_since_best;
      if (rounds_since_best >= cfg.early_stopping_rounds) break;
    }
  }

  model.trees.resize(best_n_trees);
  return model;
}

TreeEnsemble fit(const Dataset& train, const Dataset& valid,
                 const BoostConfig& cfg) {
  auto as_double = [](const std::vector<int>& labels) {
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out[i] = static_cast<double>(labels[i]);
    }
    return out;
  };
  return fit_values(train, as_double(train.labels()), valid,
                    as_double(valid.labels()), cfg);
}

namespace {

void check_schema(const TreeEnsemble& model, const Dataset& ds) {
  if (ds.feature_names() != model.feature_names) {
    fail(Errc::SchemaMismatch, "dataset columns do not match model features");
  }
}

}  // namespace

std::vector<double> predict_margin(const TreeEnsemble& model,
                                   const Dataset& ds) {
  check_schema(model, ds);
  std::vector<double> out(ds.n_rows());
  std::vector<double> row(ds.n_cols());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t f = 0; f < ds.n_cols(); ++f) row[f] = ds.at(i, f);
    out[i] = model.margin(row.data());
  }
  return out;
}

std::vector<double> predict_proba(const TreeEnsemble& model,
                                  const Dataset& ds) {
  if (model.objective != Objective::Logistic) {
    fail(Errc::InvalidSpec, "predict_proba requires the logistic objective");
  }
  std::vector<double> out = predict_margin(model, ds);
  for (double& v : out) v = sigmoid(v);
  return out;
}

CvResult cross_validate(const Dataset& ds, const FoldPlan& folds,
                        const BoostConfig& cfg) {
  if (folds.assignments.size() != ds.n_rows()) {
    fail(Errc::LengthMismatch, "fold plan does not cover dataset");
  }
  CvResult result;
  for (int fold = 0; fold < folds.k; ++fold) {
    auto train_rows = folds.complement_rows(fold);
    auto test_rows = folds.fold_rows(fold);
    Dataset train_all = ds.select_rows(train_rows);
    // internal stratified slice for early stopping
    auto [fit_rows, es_rows] = stratified_split(
        train_all.labels(), 0.2,
        derive_seed(cfg.seed, "cv.fold" + std::to_string(fold)));
    TreeEnsemble model =
        fit(train_all.select_rows(fit_rows), train_all.select_rows(es_rows),
            cfg);
    Dataset test = ds.select_rows(test_rows);
    auto proba = predict_proba(model, test);
    result.folds.push_back(metrics(confusion(test.labels(), proba)));
  }
  result.mean = mean_metrics(result.folds);
  return result;
}

std::string ensemble_to_json(const TreeEnsemble& model) {
  nlohmann::json j;
  j["base_score"] = model.base_score;
  j["learning_rate"] = model.learning_rate;
  j["objective"] =
      model.objective == Objective::Logistic ? "logistic" : "squared_error";
  j["feature_names"] = model.feature_names;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) {
    nlohmann::json tj;
    tj["split_feature"] = t.split_feature;
    tj["threshold"] = t.threshold;
    tj["left"] = t.left;
    tj["right"] = t.right;
    tj["value"] = t.value;
    trees.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees);
  return j.dump(2) + "\n";
}

TreeEnsemble ensemble_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TreeEnsemble model;
  model.base_score = j.at("base_score").get<double>();
  model.learning_rate = j.at("learning_rate").get<double>();
  std::string obj = j.at("objective").get<std::string>();
  model.objective =
      obj == "logistic" ? Objective::Logistic : Objective::SquaredError;
  model.feature_names =
      j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.split_feature = tj.at("split_feature").get<std::vector<int>>();
    t.threshold = tj.at("threshold").get<std::vector<double>>();
    t.left = tj.at("left").get<std::vector<int>>();
    t.right = tj.at("right").get<std::vector<int>>();
    t.value = tj.at("value").get<std::vector<double>>();
    t.gain.assign(t.size(), 0.0);
    model.trees.push_back(std::move(t));
  }
  return model;
}

void save_ensemble(const TreeEnsemble& model, const std::string& path) {
  write_file(path, ensemble_to_json(model));
}

TreeEnsemble load_ensemble(const std::string& path) {
  return ensemble_from_json(read_file(path));
}

}  // namespace uit
