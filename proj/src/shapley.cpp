#include "uit/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <nlohmann/json.hpp>

#include "uit/parallel.hpp"
#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

namespace {

constexpr std::size_t kOracleFeatureCap = 20;
constexpr int kMaxConstrained = 128;  // path-constrained features per leaf

// Pascal's triangle for the conjunction-game weights.
class Binomials {
 public:
  explicit Binomials(int n) : n_(n), c_((n + 1) * (n + 1), 0.0) {
    for (int i = 0; i <= n; ++i) {
      at(i, 0) = 1.0;
      for (int j = 1; j <= i; ++j) {
        at(i, j) = at(i - 1, j - 1) + (j <= i - 1 ? at(i - 1, j) : 0.0);
      }
    }
  }
  double operator()(int n, int k) const { return c_[n * (n_ + 1) + k]; }

 private:
  double& at(int i, int j) { return c_[i * (n_ + 1) + j]; }
  int n_;
  std::vector<double> c_;
};

// Shapley weight of a leaf that requires `a` foreground features present and
// `b` background features absent: players outside the conjunction are
// dummies, so the value reduces to the (a+b)-player game.
//   j in F: +(a-1)! b! / (a+b)!  = 1 / (a * C(a+b, a))
//   j in G: -a! (b-1)! / (a+b)!  = 1 / (b * C(a+b, a))

struct TreeWalker {
  const Tree& tree;
  const double* x;
  const double* r;
  const Binomials& binom;
  std::vector<std::int8_t>& state;  // 0 free, 1 foreground, 2 background
  std::vector<int>& path;           // constrained features, stack order
  std::vector<double>& phi;

  void walk(int node, int a, int b) {
    int f = tree.split_feature[node];
    if (f < 0) {
      if (a == 0 && b == 0) return;
      double w = tree.value[node];
      double total = binom(a + b, a);
      double w_fore = a > 0 ? w / (a * total) : 0.0;
      double w_back = b > 0 ? w / (b * total) : 0.0;
      for (int feat : path) {
        if (state[feat] == 1) {
          phi[feat] += w_fore;
        } else {
          phi[feat] -= w_back;
        }
      }
      return;
    }
    double t = tree.threshold[node];
    int x_child = x[f] < t ? tree.left[node] : tree.right[node];
    int r_child = r[f] < t ? tree.left[node] : tree.right[node];
    if (x_child == r_child) {
      walk(x_child, a, b);
      return;
    }
    switch (state[f]) {
      case 1:
        walk(x_child, a, b);
        return;
      case 2:
        walk(r_child, a, b);
        return;
      default:
        if (static_cast<int>(path.size()) >= kMaxConstrained) {
          fail(Errc::TooManyFeatures, "tree path constrains too many features");
        }
        path.push_back(f);
        state[f] = 1;
        walk(x_child, a + 1, b);
        state[f] = 2;
        walk(r_child, a, b + 1);
        state[f] = 0;
        path.pop_back();
    }
  }
};

Dataset cap_background(const Dataset& background, const ShapConfig& cfg) {
  if (background.n_rows() <= cfg.background_cap) return background;
  Rng rng(derive_seed(cfg.seed, "shap.background"));
  auto keep =
      rng.sample_without_replacement(background.n_rows(), cfg.background_cap);
  return background.select_rows(keep);
}

}  // namespace

std::vector<double> shap_exact_oracle(const TreeEnsemble& model,
                                      const std::vector<double>& x,
                                      const Dataset& background) {
  const std::size_t d = model.feature_names.size();
  if (x.size() != d) fail(Errc::SchemaMismatch, "observation length");
  if (background.n_cols() != d) fail(Errc::SchemaMismatch, "background width");
  if (background.n_rows() == 0) fail(Errc::TooFewRows, "empty background");
  if (d > kOracleFeatureCap) {
    fail(Errc::TooManyFeatures,
         std::to_string(d) + " features exceed the enumeration cap of " +
             std::to_string(kOracleFeatureCap));
  }

  const std::size_t n_subsets = std::size_t{1} << d;
  const std::vector<double> bg = background.row_major();
  const std::size_t m = background.n_rows();

  // value function per subset mask
  std::vector<double> value(n_subsets, 0.0);
  std::vector<double> z(d);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    double acc = 0.0;
    for (std::size_t row = 0; row < m; ++row) {
      const double* b = &bg[row * d];
      for (std::size_t j = 0; j < d; ++j) {
        z[j] = (mask >> j) & 1u ? x[j] : b[j];
      }
      acc += model.margin(z.data());
    }
    value[mask] = acc / static_cast<double>(m);
  }

  // weight(s) = s! (d-s-1)! / d! = 1 / (d * C(d-1, s))
  Binomials binom(static_cast<int>(d));
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = 1.0 / (static_cast<double>(d) *
                       binom(static_cast<int>(d) - 1, static_cast<int>(s)));
  }

  std::vector<double> phi(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if ((mask >> j) & 1u) continue;
      int s = std::popcount(mask);
      phi[j] += weight[static_cast<std::size_t>(s)] *
                (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  }
  return phi;
}

ShapMatrix shap_tree(const TreeEnsemble& model, const Dataset& ds,
                     const Dataset& background, const ShapConfig& cfg) {
  if (ds.feature_names() != model.feature_names) {
    fail(Errc::SchemaMismatch, "dataset columns do not match model features");
  }
  if (background.feature_names() != model.feature_names) {
    fail(Errc::SchemaMismatch, "background columns do not match model");
  }
  if (background.n_rows() == 0) fail(Errc::TooFewRows, "empty background");

  Dataset bg_ds = cap_background(background, cfg);
  const std::size_t d = model.feature_names.size();
  const std::size_t n = ds.n_rows();
  const std::size_t m = bg_ds.n_rows();
  const std::vector<double> fg = ds.row_major();
  const std::vector<double> bg = bg_ds.row_major();

  ShapMatrix out;
  out.feature_names = model.feature_names;
  out.values.assign(n, std::vector<double>(d, 0.0));

  double base = 0.0;
  {
    double acc = 0.0;
    for (std::size_t row = 0; row < m; ++row) {
      acc += model.margin(&bg[row * d]);
    }
    base = acc / static_cast<double>(m);
  }
  out.base_value = base;

  const double inv_m = 1.0 / static_cast<double>(m);
  Binomials binom(kMaxConstrained);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    std::vector<std::int8_t> state(d, 0);
    std::vector<int> path;
    std::vector<double> tree_acc(d);
    auto& row_phi = out.values[i];
    const double* x = &fg[i * d];
    // normalize per tree, then sum across trees: single-tree attributions
    // add up exactly to the ensemble attribution
    for (const auto& tree : model.trees) {
      std::fill(tree_acc.begin(), tree_acc.end(), 0.0);
      for (std::size_t row = 0; row < m; ++row) {
        TreeWalker walker{tree, x, &bg[row * d], binom, state, path, tree_acc};
        walker.walk(0, 0, 0);
      }
      for (std::size_t j = 0; j < d; ++j) {
        row_phi[j] += model.learning_rate * tree_acc[j] * inv_m;
      }
    }
  });
  return out;
}

std::vector<std::string> FeatureRanking::retained() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.mean_abs_shap > threshold) out.push_back(e.name);
  }
  return out;
}

FeatureRanking rank_features(const ShapMatrix& shap, double threshold) {
  if (threshold < 0.0) fail(Errc::InvalidSpec, "threshold must be >= 0");
  FeatureRanking ranking;
  ranking.threshold = threshold;
  const std::size_t d = shap.feature_names.size();
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (const auto& row : shap.values) acc += std::abs(row[j]);
    double mean = shap.values.empty()
                      ? 0.0
                      : acc / static_cast<double>(shap.values.size());
    ranking.entries.push_back({shap.feature_names[j], mean});
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const RankEntry& a, const RankEntry& b) {
              if (a.mean_abs_shap != b.mean_abs_shap) {
                return a.mean_abs_shap > b.mean_abs_shap;
              }
              return a.name < b.name;
            });
  return ranking;
}

std::vector<BeeswarmRecord> beeswarm_export(const ShapMatrix& shap,
                                            const Dataset& raw) {
  if (raw.n_rows() != shap.values.size()) {
    fail(Errc::LengthMismatch, "attribution rows vs raw rows");
  }
  if (raw.feature_names() != shap.feature_names) {
    fail(Errc::SchemaMismatch, "raw columns do not match attribution matrix");
  }
  FeatureRanking ranking = rank_features(shap, 0.0);
  std::vector<BeeswarmRecord> records;
  records.reserve(shap.values.size() * shap.feature_names.size());
  for (std::size_t rank = 0; rank < ranking.entries.size(); ++rank) {
    const std::string& name = ranking.entries[rank].name;
    std::size_t j = *raw.find_column(name);
    for (std::size_t i = 0; i < shap.values.size(); ++i) {
      records.push_back(BeeswarmRecord{name, shap.values[i][j], raw.at(i, j),
                                       static_cast<int>(rank)});
    }
  }
  return records;
}

std::string shap_matrix_to_csv(const ShapMatrix& shap) {
  std::string out;
  for (std::size_t j = 0; j < shap.feature_names.size(); ++j) {
    if (j) out += ',';
    out += shap.feature_names[j];
  }
  out += '\n';
  for (const auto& row : shap.values) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += fmt_double(row[j]);
    }
    out += '\n';
  }
  return out;
}

std::string shap_sidecar_json(const ShapMatrix& shap) {
  nlohmann::json j;
  j["base_value"] = shap.base_value;
  j["feature_order"] = shap.feature_names;
  return j.dump(2) + "\n";
}

std::string ranking_to_csv(const FeatureRanking& ranking) {
  std::string out = "rank,feature,mean_abs_shap,retained\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i) + ',' + e.name + ',' + fmt_double(e.mean_abs_shap) +
           ',' + (e.mean_abs_shap > ranking.threshold ? "1" : "0") + '\n';
  }
  return out;
}

std::string beeswarm_to_csv(const std::vector<BeeswarmRecord>& records) {
  std::string out = "feature,shap_value,raw_value,rank\n";
  for (const auto& r : records) {
    out += r.feature + ',' + fmt_double(r.shap_value) + ',' +
           fmt_double(r.raw_value) + ',' + std::to_string(r.rank) + '\n';
  }
  return out;
}

}  // namespace uit
