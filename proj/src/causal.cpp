#include "uit/causal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "uit/parallel.hpp"
#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

namespace {

double erfc_tail_p(double z) {
  // two-sided normal p-value
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double median_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TreatmentAssignment binarize_treatment(const Dataset& ds,
                                       const std::string& feature) {
  auto col_idx = ds.find_column(feature);
  if (!col_idx) fail(Errc::MissingColumn, feature);
  const auto& col = ds.col(*col_idx);

  TreatmentAssignment out;
  out.source_feature = feature;
  out.w.resize(col.size());

  double lo = col[0];
  double hi = col[0];
  bool binary = true;
  for (double v : col) {
    if (v != lo && v != hi) {
      if (lo == hi) {
        (v < lo ? lo : hi) = v;
      } else {
        binary = false;
        break;
      }
    }
  }
  if (binary && lo == hi) fail(Errc::DegenerateArm, feature + " is constant");

  if (binary) {
    out.binarization = "native";
    for (std::size_t i = 0; i < col.size(); ++i) {
      out.w[i] = col[i] == hi ? 1 : 0;
    }
  } else {
    double cut = median_sorted(col);
    out.binarization = "median>" + fmt_double(cut);
    for (std::size_t i = 0; i < col.size(); ++i) {
      out.w[i] = col[i] > cut ? 1 : 0;
    }
  }
  for (int v : out.w) (v ? out.n_treated : out.n_control)++;
  if (out.n_treated == 0 || out.n_control == 0) {
    fail(Errc::DegenerateArm, feature);
  }
  return out;
}

NuisanceModels fit_nuisance(const Dataset& ds, const TreatmentAssignment& w,
                            const std::vector<double>& y, const FoldPlan& folds,
                            const NuisanceConfig& cfg) {
  const std::size_t n = ds.n_rows();
  if (w.w.size() != n || y.size() != n) {
    fail(Errc::LengthMismatch, "rows vs treatment vs outcome");
  }
  if (folds.assignments.size() != n) {
    fail(Errc::LengthMismatch, "fold plan does not cover dataset");
  }
  if (w.n_treated < 10 || w.n_control < 10) {
    fail(Errc::ArmTooSmall, w.source_feature + ": both arms need >= 10 rows");
  }

  bool binary_outcome =
      std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });

  NuisanceModels out;
  out.clip = cfg.clip;
  out.e_hat.assign(n, 0.5);
  out.mu1_hat.assign(n, 0.0);
  out.mu0_hat.assign(n, 0.0);

  BoostConfig outcome_cfg = cfg.outcome;
  outcome_cfg.objective =
      binary_outcome ? Objective::Logistic : Objective::SquaredError;

  auto predict_values = [&](const TreeEnsemble& model, const Dataset& data) {
    return model.objective == Objective::Logistic ? predict_proba(model, data)
                                                  : predict_margin(model, data);
  };

  // Fits on `rows` (targets t), predicts `predict_rows`; constant fallback
  // when the training targets are degenerate for the objective.
  auto cross_fit_one = [&](const std::vector<std::size_t>& rows,
                           const std::vector<double>& targets,
                           const BoostConfig& bcfg, std::uint64_t seed,
                           const std::vector<std::size_t>& predict_rows,
                           std::vector<double>& sink) {
    Dataset train_x = ds.select_rows(rows);
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= targets.empty() ? 1.0 : static_cast<double>(targets.size());
    bool degenerate =
        targets.size() < 4 ||
        (bcfg.objective == Objective::Logistic && (mean <= 0.0 || mean >= 1.0));
    if (degenerate) {
      for (std::size_t r : predict_rows) sink[r] = mean;
      return;
    }
    std::vector<int> strat(targets.size(), 0);
    if (bcfg.objective == Objective::Logistic) {
      for (std::size_t i = 0; i < targets.size(); ++i) {
        strat[i] = targets[i] > 0.5 ? 1 : 0;
      }
    }
    auto [fit_rows, es_rows] =
        stratified_split(strat, cfg.early_stop_fraction, seed);
    std::vector<double> y_fit;
    std::vector<double> y_es;
    y_fit.reserve(fit_rows.size());
    y_es.reserve(es_rows.size());
    for (std::size_t r : fit_rows) y_fit.push_back(targets[r]);
    for (std::size_t r : es_rows) y_es.push_back(targets[r]);
    if (bcfg.objective == Objective::Logistic) {
      double fm = 0.0;
      for (double v : y_fit) fm += v;
      fm /= static_cast<double>(y_fit.size());
      if (fm <= 0.0 || fm >= 1.0) {
        for (std::size_t r : predict_rows) sink[r] = mean;
        return;
      }
    }
    TreeEnsemble model =
        fit_values(train_x.select_rows(fit_rows), y_fit,
                   train_x.select_rows(es_rows), y_es, bcfg);
    Dataset target_x = ds.select_rows(predict_rows);
    auto preds = predict_values(model, target_x);
    for (std::size_t i = 0; i < predict_rows.size(); ++i) {
      sink[predict_rows[i]] = preds[i];
    }
  };

  for (int fold = 0; fold < folds.k; ++fold) {
    std::vector<std::size_t> in_fold = folds.fold_rows(fold);
    std::vector<std::size_t> out_fold = folds.complement_rows(fold);
    if (in_fold.empty() || out_fold.empty()) continue;

    // propensity: W from X on out-of-fold rows
    {
      std::vector<double> w_targets;
      w_targets.reserve(out_fold.size());
      for (std::size_t r : out_fold) {
        w_targets.push_back(static_cast<double>(w.w[r]));
      }
      BoostConfig pcfg = cfg.propensity;
      pcfg.objective = Objective::Logistic;
      cross_fit_one(out_fold, w_targets, pcfg,
                    derive_seed(cfg.seed, "nuisance.e.fold" + std::to_string(fold)),
                    in_fold, out.e_hat);
    }
    // outcome regressions per arm
    for (int arm = 0; arm <= 1; ++arm) {
      std::vector<std::size_t> arm_rows;
      for (std::size_t r : out_fold) {
        if (w.w[r] == arm) arm_rows.push_back(r);
      }
      std::vector<double> arm_targets;
      arm_targets.reserve(arm_rows.size());
      for (std::size_t r : arm_rows) arm_targets.push_back(y[r]);
      cross_fit_one(arm_rows, arm_targets, outcome_cfg,
                    derive_seed(cfg.seed, "nuisance.mu" + std::to_string(arm) +
                                              ".fold" + std::to_string(fold)),
                    in_fold, arm ? out.mu1_hat : out.mu0_hat);
    }
  }

  for (double& e : out.e_hat) {
    e = std::min(1.0 - cfg.clip, std::max(cfg.clip, e));
  }
  return out;
}

std::vector<double> aipw_scores(const std::vector<double>& y,
                                const TreatmentAssignment& w,
                                const NuisanceModels& nuisance) {
  const std::size_t n = y.size();
  if (w.w.size() != n || nuisance.e_hat.size() != n ||
      nuisance.mu1_hat.size() != n || nuisance.mu0_hat.size() != n) {
    fail(Errc::LengthMismatch, "aipw inputs");
  }
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = nuisance.e_hat[i];
    if (!(e >= nuisance.clip && e <= 1.0 - nuisance.clip)) {
      fail(Errc::PropensityOutOfRange, "e_hat[" + std::to_string(i) + "]");
    }
    double mu1 = nuisance.mu1_hat[i];
    double mu0 = nuisance.mu0_hat[i];
    double score = mu1 - mu0;
    if (w.w[i] == 1) {
      score += (y[i] - mu1) / e;
    } else {
      score -= (y[i] - mu0) / (1.0 - e);
    }
    scores[i] = score;
  }
  return scores;
}

namespace {

struct GrowContext {
  const Dataset& ds;
  const std::vector<int>& w;
  const std::vector<double>& scores;
  const CausalForestConfig& cfg;
  CausalTree tree;

  int add_node() {
    tree.nodes.emplace_back();
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  // Chooses the split maximizing (tau_left - tau_right)^2 on the structure
  // rows; both children must hold min_leaf structure rows per arm.
  struct Best {
    double delta = -1.0;
    int feature = -1;
    double threshold = 0.0;
  };

  Best search(const std::vector<std::size_t>& structure_rows) {
    Best best;
    const std::size_t d = ds.n_cols();
    std::vector<double> vals;
    std::vector<std::size_t> order;
    for (std::size_t f = 0; f < d; ++f) {
      const auto& col = ds.col(f);
      order.resize(structure_rows.size());
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) {
                  double va = col[structure_rows[a]];
                  double vb = col[structure_rows[b]];
                  if (va != vb) return va < vb;
                  return structure_rows[a] < structure_rows[b];
                });

      // candidate thresholds: all distinct boundaries, or a quantile grid
      vals.clear();
      for (std::size_t k = 1; k < order.size(); ++k) {
        double prev = col[structure_rows[order[k - 1]]];
        double cur = col[structure_rows[order[k]]];
        if (cur > prev) vals.push_back(cur);
      }
      if (vals.empty()) continue;
      std::vector<double> grid;
      if (cfg.quantile_grid > 0 &&
          vals.size() > static_cast<std::size_t>(cfg.quantile_grid)) {
        grid.reserve(static_cast<std::size_t>(cfg.quantile_grid));
        for (int q = 1; q <= cfg.quantile_grid; ++q) {
          std::size_t pos = static_cast<std::size_t>(
              static_cast<double>(q) * static_cast<double>(vals.size()) /
              (cfg.quantile_grid + 1.0));
          if (pos >= vals.size()) pos = vals.size() - 1;
          grid.push_back(vals[pos]);
        }
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      } else {
        grid = vals;
      }

      // single sorted pass accumulating left-side stats per threshold
      std::size_t cursor = 0;
      double sum_left = 0.0;
      int n_left_treated = 0;
      int n_left_control = 0;
      double sum_total = 0.0;
      int n_treated = 0;
      int n_control = 0;
      for (std::size_t k : order) {
        std::size_t r = structure_rows[k];
        sum_total += scores[r];
        (w[r] ? n_treated : n_control)++;
      }
      for (double t : grid) {
        while (cursor < order.size() &&
               col[structure_rows[order[cursor]]] < t) {
          std::size_t r = structure_rows[order[cursor]];
          sum_left += scores[r];
          (w[r] ? n_left_treated : n_left_control)++;
          ++cursor;
        }
        int n_right_treated = n_treated - n_left_treated;
        int n_right_control = n_control - n_left_control;
        if (n_left_treated < cfg.min_leaf || n_left_control < cfg.min_leaf ||
            n_right_treated < cfg.min_leaf || n_right_control < cfg.min_leaf) {
          continue;
        }
        int n_left = n_left_treated + n_left_control;
        int n_right = n_right_treated + n_right_control;
        double tau_left = sum_left / n_left;
        double tau_right = (sum_total - sum_left) / n_right;
        double delta = (tau_left - tau_right) * (tau_left - tau_right);
        if (delta > best.delta) {  // strict: ties keep lowest feature/threshold
          best = {delta, static_cast<int>(f), t};
        }
      }
    }
    return best;
  }

  // Structure growth never touches estimation rows; leaf effects are
  // resolved in a separate routing pass afterwards.
  int grow(std::vector<std::size_t> structure_rows, int depth) {
    int id = add_node();
    Best best;
    if (depth < cfg.max_depth &&
        structure_rows.size() >= static_cast<std::size_t>(2 * cfg.min_leaf)) {
      best = search(structure_rows);
    }
    if (best.feature < 0) {
      return id;  // leaf
    }

    const auto& col = ds.col(static_cast<std::size_t>(best.feature));
    std::vector<std::size_t> s_left;
    std::vector<std::size_t> s_right;
    for (std::size_t r : structure_rows) {
      (col[r] < best.threshold ? s_left : s_right).push_back(r);
    }
    structure_rows.clear();

    tree.nodes[id].feature = best.feature;
    tree.nodes[id].threshold = best.threshold;
    tree.nodes[id].delta_tau_sq = best.delta;
    int l = grow(std::move(s_left), depth + 1);
    int r = grow(std::move(s_right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

CausalTree grow_causal_tree(const Dataset& ds, const std::vector<int>& w,
                            const std::vector<double>& scores,
                            const std::vector<std::size_t>& structure_rows,
                            const std::vector<std::size_t>& estimation_rows,
                            const CausalForestConfig& cfg) {
  GrowContext ctx{ds, w, scores, cfg, {}};
  ctx.grow(structure_rows, 0);
  CausalTree tree = std::move(ctx.tree);

  // resolve effects top-down: thin nodes inherit the last sufficient ancestor
  double root_mean = 0.0;
  if (!estimation_rows.empty()) {
    for (std::size_t r : estimation_rows) root_mean += scores[r];
    root_mean /= static_cast<double>(estimation_rows.size());
  }
  struct Frame {
    int node;
    std::vector<std::size_t> rows;
    double inherited;
  };
  std::vector<Frame> stack;
  stack.push_back({0, estimation_rows, root_mean});
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    CausalTreeNode& node = tree.nodes[frame.node];
    int treated = 0;
    int control = 0;
    double sum = 0.0;
    for (std::size_t r : frame.rows) {
      (w[r] ? treated : control)++;
      sum += scores[r];
    }
    node.n_est_treated = treated;
    node.n_est_control = control;
    double here = frame.inherited;
    if (treated >= cfg.min_leaf && control >= cfg.min_leaf) {
      here = sum / static_cast<double>(treated + control);
    }
    node.tau = here;
    if (node.feature >= 0) {
      const auto& col = ds.col(static_cast<std::size_t>(node.feature));
      std::vector<std::size_t> left_rows;
      std::vector<std::size_t> right_rows;
      for (std::size_t r : frame.rows) {
        (col[r] < node.threshold ? left_rows : right_rows).push_back(r);
      }
      stack.push_back({node.left, std::move(left_rows), here});
      stack.push_back({node.right, std::move(right_rows), here});
    }
  }
  return tree;
}

CausalForestModel fit_causal_forest(const Dataset& ds,
                                    const TreatmentAssignment& w,
                                    const std::vector<double>& y,
                                    const NuisanceModels& nuisance,
                                    const CausalForestConfig& cfg) {
  if (cfg.n_trees < 1) fail(Errc::InvalidSpec, "n_trees must be >= 1");
  if (cfg.honest_fraction <= 0.0 || cfg.honest_fraction >= 1.0) {
    fail(Errc::InvalidSpec, "honest_fraction outside (0,1)");
  }
  if (cfg.subsample_fraction <= 0.0 || cfg.subsample_fraction > 1.0) {
    fail(Errc::InvalidSpec, "subsample_fraction outside (0,1]");
  }
  const std::size_t n = ds.n_rows();
  std::vector<double> scores = aipw_scores(y, w, nuisance);

  CausalForestModel model;
  model.cfg = cfg;
  model.feature_names = ds.feature_names();
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));

  parallel_for(static_cast<std::size_t>(cfg.n_trees), cfg.threads,
               [&](std::size_t b) {
    Rng rng(derive_seed(cfg.seed, "causal.tree" + std::to_string(b)));
    // bootstrap with replacement, then a subsample of it
    std::vector<std::size_t> bootstrap(n);
    for (auto& r : bootstrap) r = rng.uniform_index(n);
    rng.shuffle(bootstrap);
    std::size_t m = static_cast<std::size_t>(
        std::floor(cfg.subsample_fraction * static_cast<double>(n)));
    if (m < 2) m = std::min<std::size_t>(2, n);
    bootstrap.resize(m);
    std::size_t n_structure = static_cast<std::size_t>(
        std::floor(cfg.honest_fraction * static_cast<double>(m)));
    if (n_structure == 0) n_structure = 1;
    if (n_structure >= m) n_structure = m - 1;
    std::vector<std::size_t> structure_rows(bootstrap.begin(),
                                            bootstrap.begin() + n_structure);
    std::vector<std::size_t> estimation_rows(bootstrap.begin() + n_structure,
                                             bootstrap.end());
    model.trees[b] = grow_causal_tree(ds, w.w, scores, structure_rows,
                                      estimation_rows, cfg);
  });
  return model;
}

std::vector<double> estimate_cate(const CausalForestModel& model,
                                  const Dataset& ds) {
  if (ds.feature_names() != model.feature_names) {
    fail(Errc::SchemaMismatch, "dataset columns do not match forest features");
  }
  const std::size_t n = ds.n_rows();
  const std::size_t d = ds.n_cols();
  std::vector<double> fg = ds.row_major();
  std::vector<double> out(n, 0.0);
  parallel_for(n, model.cfg.threads, [&](std::size_t i) {
    const double* x = &fg[i * d];
    double acc = 0.0;
    for (const auto& tree : model.trees) {
      acc += tree.nodes[tree.leaf_index(x)].tau;
    }
    out[i] = acc / static_cast<double>(model.trees.size());
  });
  return out;
}

AteResult estimate_ate(const std::vector<double>& scores,
                       std::size_t n_treated, std::size_t n_control) {
  const std::size_t n = scores.size();
  if (n < 2) fail(Errc::TooFewRows, "need at least 2 scores");
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n - 1);
  double se = std::sqrt(var / static_cast<double>(n));

  AteResult out;
  out.ate = mean;
  out.se = se;
  out.ci_low = mean - 1.96 * se;
  out.ci_high = mean + 1.96 * se;
  if (se > 0.0) {
    out.p_value = erfc_tail_p(mean / se);
  } else {
    out.p_value = mean == 0.0 ? 1.0 : 0.0;
  }
  out.n_treated = n_treated;
  out.n_control = n_control;
  out.significant = out.p_value <= 0.05;
  return out;
}

std::vector<SweepEntry> treatment_sweep(
    const Dataset& ds, const std::vector<double>& y,
    const std::vector<std::pair<std::string, double>>& treatments,
    const SweepConfig& cfg) {
  std::vector<SweepEntry> entries;
  entries.reserve(treatments.size());
  for (const auto& [name, importance] : treatments) {
    SweepEntry entry;
    entry.treatment = name;
    entry.mean_abs_shap = importance;
    try {
      TreatmentAssignment w = binarize_treatment(ds, name);
      Dataset controls = ds.drop_column(name);
      FoldPlan folds = make_folds_for_labels(
          w.w, cfg.k_folds, derive_seed(cfg.seed, "sweep." + name));
      NuisanceConfig ncfg = cfg.nuisance;
      ncfg.seed = derive_seed(cfg.seed, "sweep.nuisance." + name);
      NuisanceModels nuisance = fit_nuisance(controls, w, y, folds, ncfg);
      std::vector<double> scores = aipw_scores(y, w, nuisance);
      entry.ate = estimate_ate(scores, w.n_treated, w.n_control);

      CausalForestConfig fcfg = cfg.forest;
      fcfg.seed = derive_seed(cfg.seed, "sweep.forest." + name);
      CausalForestModel forest =
          fit_causal_forest(controls, w, y, nuisance, fcfg);
      std::vector<double> cate = estimate_cate(forest, controls);
      double mean = 0.0;
      for (double c : cate) mean += c;
      mean /= static_cast<double>(cate.size());
      double var = 0.0;
      for (double c : cate) var += (c - mean) * (c - mean);
      var /= static_cast<double>(cate.size());
      entry.cate_mean = mean;
      entry.cate_sd = std::sqrt(var);
    } catch (const Error& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

namespace {

std::string stars(const AteResult& r) { return r.significant ? "***" : ""; }

}  // namespace

std::string ate_table_csv(const std::vector<SweepEntry>& entries) {
  std::string out = "treatment,ate,se,ci_low,ci_high,p_value,stars\n";
  for (const auto& e : entries) {
    out += e.treatment;
    if (e.ate) {
      out += ',' + fmt_sci2(e.ate->ate) + ',' + fmt_sci2(e.ate->se) + ',' +
             fmt_sci2(e.ate->ci_low) + ',' + fmt_sci2(e.ate->ci_high) + ',' +
             fmt_fixed4(e.ate->p_value) + ',' + stars(*e.ate);
    } else {
      out += ",NA,NA,NA,NA,NA,";
    }
    out += '\n';
  }
  return out;
}

std::string ate_table_json(const std::vector<SweepEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j;
    j["treatment"] = e.treatment;
    j["mean_abs_shap"] = e.mean_abs_shap;
    if (e.ate) {
      j["ate"] = e.ate->ate;
      j["se"] = e.ate->se;
      j["ci_low"] = e.ate->ci_low;
      j["ci_high"] = e.ate->ci_high;
      j["p_value"] = e.ate->p_value;
      j["significant"] = e.ate->significant;
      j["n_treated"] = e.ate->n_treated;
      j["n_control"] = e.ate->n_control;
      j["cate_mean"] = e.cate_mean;
      j["cate_sd"] = e.cate_sd;
    } else {
      j["error"] = e.error;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string ci_bars_csv(const std::vector<SweepEntry>& entries) {
  std::string out = "treatment,center,lower,upper,significant\n";
  for (const auto& e : entries) {
    if (!e.ate) continue;
    out += e.treatment + ',' + fmt_double(e.ate->ate) + ',' +
           fmt_double(e.ate->ci_low) + ',' + fmt_double(e.ate->ci_high) + ',' +
           (e.ate->significant ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace uit
