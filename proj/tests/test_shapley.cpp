#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/gbtree.hpp"
#include "uit/rng.hpp"
#include "uit/shapley.hpp"

using namespace uit;

namespace {

Dataset make_numeric(const std::vector<std::vector<double>>& cols,
                     std::vector<int> labels) {
  std::vector<FeatureSpec> specs;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    specs.push_back({"f" + std::to_string(j), FeatureKind::Numeric, {}, false});
  }
  return Dataset(specs, cols, std::move(labels));
}

Dataset random_frame(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<std::vector<double>> cols(d);
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& c : cols) c.push_back(rng.uniform() * 2 - 1);
    labels.push_back(static_cast<int>(i % 2));
  }
  return make_numeric(cols, labels);
}

void push_node(Tree& t) {
  t.split_feature.push_back(-1);
  t.threshold.push_back(0.0);
  t.left.push_back(-1);
  t.right.push_back(-1);
  t.value.push_back(0.0);
  t.gain.push_back(0.0);
}

Tree random_tree(Rng& rng, std::size_t d, int max_depth) {
  Tree t;
  push_node(t);
  struct Todo {
    int node;
    int depth;
  };
  std::vector<Todo> todo = {{0, 0}};
  while (!todo.empty()) {
    Todo cur = todo.back();
    todo.pop_back();
    if (cur.depth >= max_depth || rng.uniform() < 0.3) {
      t.value[static_cast<std::size_t>(cur.node)] = rng.normal();
      continue;
    }
    int l = static_cast<int>(t.split_feature.size());
    push_node(t);
    push_node(t);
    t.split_feature[static_cast<std::size_t>(cur.node)] =
        static_cast<int>(rng.uniform_index(d));
    t.threshold[static_cast<std::size_t>(cur.node)] = rng.uniform() * 2 - 1;
    t.left[static_cast<std::size_t>(cur.node)] = l;
    t.right[static_cast<std::size_t>(cur.node)] = l + 1;
    todo.push_back({l, cur.depth + 1});
    todo.push_back({l + 1, cur.depth + 1});
  }
  return t;
}

TreeEnsemble random_ensemble(Rng& rng, std::size_t d, int n_trees,
                             int depth) {
  TreeEnsemble model;
  model.base_score = rng.normal() * 0.3;
  model.learning_rate = 0.4;
  for (std::size_t j = 0; j < d; ++j) {
    model.feature_names.push_back("f" + std::to_string(j));
  }
  for (int i = 0; i < n_trees; ++i) {
    model.trees.push_back(random_tree(rng, d, depth));
  }
  return model;
}

Tree stump(int feature, double threshold, double left, double right) {
  Tree t;
  t.split_feature = {feature, -1, -1};
  t.threshold = {threshold, 0.0, 0.0};
  t.left = {1, -1, -1};
  t.right = {2, -1, -1};
  t.value = {0.0, left, right};
  t.gain = {0.0, 0.0, 0.0};
  return t;
}

// interventional value function evaluated directly for small subsets
double value_of(const TreeEnsemble& model, const std::vector<double>& x,
                const Dataset& bg, unsigned mask) {
  double acc = 0.0;
  std::vector<double> z(x.size());
  for (std::size_t r = 0; r < bg.n_rows(); ++r) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      z[j] = (mask >> j) & 1u ? x[j] : bg.at(r, j);
    }
    acc += model.margin(z.data());
  }
  return acc / static_cast<double>(bg.n_rows());
}

}  // namespace

TEST_CASE("single feature attribution is f({x}) minus f(empty)") {
  Rng rng(1);
  TreeEnsemble model = random_ensemble(rng, 1, 3, 2);
  Dataset bg = random_frame(rng, 8, 1);
  std::vector<double> x = {0.37};
  auto phi = shap_exact_oracle(model, x, bg);
  double expected = value_of(model, x, bg, 1u) - value_of(model, x, bg, 0u);
  CHECK(phi[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("fast attribution equals the subset oracle on random ensembles") {
  Rng rng(2);
  for (int rep = 0; rep < 25; ++rep) {
    std::size_t d = 2 + rng.uniform_index(7);  // up to 8 features
    TreeEnsemble model = random_ensemble(rng, d, 4, 4);
    Dataset bg = random_frame(rng, 6, d);
    Dataset rows = random_frame(rng, 3, d);
    ShapConfig cfg;
    cfg.threads = 1;
    ShapMatrix fast = shap_tree(model, rows, bg, cfg);
    for (std::size_t i = 0; i < rows.n_rows(); ++i) {
      auto exact = shap_exact_oracle(model, rows.row(i), bg);
      for (std::size_t j = 0; j < d; ++j) {
        CHECK(std::abs(fast.values[i][j] - exact[j]) < 1e-6);
      }
    }
  }
}

TEST_CASE("efficiency: base plus attributions reproduces the margin") {
  Rng rng(3);
  std::size_t d = 5;
  TreeEnsemble model = random_ensemble(rng, d, 6, 4);
  Dataset bg = random_frame(rng, 12, d);
  Dataset rows = random_frame(rng, 10, d);
  ShapMatrix shap = shap_tree(model, rows, bg, ShapConfig{});
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    double sum = shap.base_value;
    for (double v : shap.values[i]) sum += v;
    std::vector<double> x = rows.row(i);
    CHECK(std::abs(sum - model.margin(x.data())) < 1e-9);
  }
  // oracle efficiency at d=5 as well
  auto exact = shap_exact_oracle(model, rows.row(0), bg);
  double sum = value_of(model, rows.row(0), bg, 0u);
  for (double v : exact) sum += v;
  std::vector<double> x0 = rows.row(0);
  CHECK(std::abs(sum - model.margin(x0.data())) < 1e-9);
}

TEST_CASE("symmetric features receive identical attributions") {
  // two stumps, one per feature, same geometry
  TreeEnsemble model;
  model.base_score = 0.0;
  model.learning_rate = 1.0;
  model.feature_names = {"f0", "f1"};
  model.trees.push_back(stump(0, 0.0, -1.0, 1.0));
  model.trees.push_back(stump(1, 0.0, -1.0, 1.0));

  Dataset bg = make_numeric({{-0.5, 0.5}, {-0.5, 0.5}}, {0, 1});
  Dataset rows = make_numeric({{0.7}, {0.7}}, {1});
  ShapMatrix shap = shap_tree(model, rows, bg, ShapConfig{});
  CHECK(shap.values[0][0] == shap.values[0][1]);

  auto exact = shap_exact_oracle(model, rows.row(0), bg);
  CHECK(exact[0] == doctest::Approx(exact[1]).epsilon(1e-12));
}

TEST_CASE("dummy features receive exactly zero") {
  Rng rng(4);
  std::size_t d = 4;
  TreeEnsemble model = random_ensemble(rng, d, 5, 3);
  // append an extra feature no tree references
  model.feature_names.push_back("f" + std::to_string(d));
  Dataset bg = random_frame(rng, 10, d + 1);
  Dataset rows = random_frame(rng, 6, d + 1);
  ShapMatrix shap = shap_tree(model, rows, bg, ShapConfig{});
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    CHECK(shap.values[i][d] == 0.0);
  }
  auto exact = shap_exact_oracle(model, rows.row(0), bg);
  CHECK(exact[d] == 0.0);
}

TEST_CASE("attribution is additive across trees") {
  Rng rng(5);
  std::size_t d = 4;
  TreeEnsemble two = random_ensemble(rng, d, 2, 3);
  TreeEnsemble first = two;
  first.trees.resize(1);
  TreeEnsemble second = two;
  second.trees.erase(second.trees.begin());
  // zero bases so the tree terms are isolated
  two.base_score = first.base_score = second.base_score = 0.0;

  Dataset bg = random_frame(rng, 8, d);
  Dataset rows = random_frame(rng, 5, d);
  ShapConfig cfg;
  cfg.threads = 1;
  ShapMatrix all = shap_tree(two, rows, bg, cfg);
  ShapMatrix a = shap_tree(first, rows, bg, cfg);
  ShapMatrix b = shap_tree(second, rows, bg, cfg);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(all.values[i][j] == a.values[i][j] + b.values[i][j]);
    }
  }
}

TEST_CASE("oracle rejects too many features") {
  Rng rng(6);
  std::size_t d = 21;
  TreeEnsemble model = random_ensemble(rng, d, 1, 2);
  Dataset bg = random_frame(rng, 4, d);
  try {
    shap_exact_oracle(model, bg.row(0), bg);
    FAIL("expected TooManyFeatures");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooManyFeatures);
  }
}

TEST_CASE("ranking sorts by mean absolute value and applies the threshold") {
  // ten features, exactly eight above the 0.022 retention threshold
  ShapMatrix shap;
  shap.base_value = 0.0;
  shap.feature_names = {"MarketBeta", "PriceBook",  "SpreadReturn",
                        "IsDirector", "PriceOpEarn", "MarketReturn",
                        "HMLBeta",    "AcqDisp",     "NoiseA",
                        "NoiseB"};
  std::vector<double> means = {0.41, 0.30, 0.19, 0.15, 0.09,
                               0.05, 0.04, 0.023, 0.021, 0.002};
  shap.values.push_back(means);  // single row: mean |phi| = |value|
  FeatureRanking ranking = rank_features(shap, 0.022);
  REQUIRE(ranking.entries.size() == 10);
  CHECK(ranking.entries[0].name == "MarketBeta");
  CHECK(ranking.retained().size() == 8);

  // threshold zero keeps everything with positive mass
  CHECK(rank_features(shap, 0.0).retained().size() == 10);

  // an all-zero column ranks last
  for (auto& row : shap.values) row.push_back(0.0);
  shap.feature_names.push_back("Dummy");
  FeatureRanking with_zero = rank_features(shap, 0.0);
  CHECK(with_zero.entries.back().name == "Dummy");
}

TEST_CASE("raising the threshold never grows the retained set") {
  Rng rng(7);
  ShapMatrix shap;
  shap.feature_names = {"a", "b", "c", "d", "e"};
  for (int i = 0; i < 30; ++i) {
    std::vector<double> row(5);
    for (auto& v : row) v = rng.normal() * 0.05;
    shap.values.push_back(row);
  }
  std::size_t prev = rank_features(shap, 0.0).retained().size();
  for (double t : {0.01, 0.02, 0.03, 0.05, 0.1}) {
    std::size_t cur = rank_features(shap, t).retained().size();
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("ranking is invariant to row order") {
  Rng rng(8);
  std::size_t d = 4;
  TreeEnsemble model = random_ensemble(rng, d, 5, 3);
  Dataset bg = random_frame(rng, 10, d);
  Dataset rows = random_frame(rng, 12, d);
  std::vector<std::size_t> perm(rows.n_rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng shuffler(9);
  shuffler.shuffle(perm);
  Dataset permuted = rows.select_rows(perm);

  ShapConfig cfg;
  cfg.threads = 1;
  FeatureRanking a = rank_features(shap_tree(model, rows, bg, cfg), 0.01);
  FeatureRanking b = rank_features(shap_tree(model, permuted, bg, cfg), 0.01);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].name == b.entries[i].name);
    CHECK(a.entries[i].mean_abs_shap ==
          doctest::Approx(b.entries[i].mean_abs_shap).epsilon(1e-12));
  }
}

TEST_CASE("beeswarm export is long-format and re-aggregates exactly") {
  ShapMatrix shap;
  shap.base_value = 0.1;
  shap.feature_names = {"f0", "f1"};
  shap.values = {{0.5, -0.2}, {-0.1, 0.3}, {0.2, 0.0}};
  Dataset raw = make_numeric({{1, 2, 3}, {4, 5, 6}}, {0, 1, 0});
  auto records = beeswarm_export(shap, raw);
  CHECK(records.size() == 6);
  // the strongest feature carries rank 0
  for (const auto& r : records) {
    if (r.feature == "f0") CHECK(r.rank == 0);
    if (r.feature == "f1") CHECK(r.rank == 1);
  }

  // re-aggregation reproduces the ranking means
  FeatureRanking ranking = rank_features(shap, 0.0);
  for (const auto& entry : ranking.entries) {
    double acc = 0.0;
    int count = 0;
    for (const auto& r : records) {
      if (r.feature == entry.name) {
        acc += std::abs(r.shap_value);
        ++count;
      }
    }
    CHECK(std::abs(acc / count - entry.mean_abs_shap) < 1e-12);
  }

  Dataset misaligned = make_numeric({{1, 2}, {4, 5}}, {0, 1});
  CHECK_THROWS_AS(beeswarm_export(shap, misaligned), Error);
}

TEST_CASE("background cap subsamples deterministically") {
  Rng rng(10);
  std::size_t d = 3;
  TreeEnsemble model = random_ensemble(rng, d, 4, 3);
  Dataset bg = random_frame(rng, 60, d);
  Dataset rows = random_frame(rng, 4, d);
  ShapConfig cfg;
  cfg.background_cap = 16;
  cfg.seed = 5;
  ShapMatrix a = shap_tree(model, rows, bg, cfg);
  ShapMatrix b = shap_tree(model, rows, bg, cfg);
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(a.values[i][j] == b.values[i][j]);
    }
  }
  CHECK(a.base_value == b.base_value);
}
