#include "uit/decorrelate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uit/textio.hpp"

namespace uit {

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&x](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return a < b;
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average, 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma;
    double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

CorrelationMatrix spearman(const Dataset& ds) {
  if (ds.n_rows() < 2) fail(Errc::TooFewRows, "need at least 2 rows");
  const std::size_t d = ds.n_cols();
  std::vector<std::vector<double>> ranks(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& col = ds.col(j);
    if (std::all_of(col.begin(), col.end(),
                    [&col](double v) { return v == col[0]; })) {
      fail(Errc::ZeroVariance, ds.spec(j).name);
    }
    ranks[j] = average_ranks(col);
  }
  CorrelationMatrix corr;
  corr.feature_names = ds.feature_names();
  corr.rho.assign(d, std::vector<double>(d, 1.0));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      double r = pearson(ranks[j], ranks[k]);
      r = std::clamp(r, -1.0, 1.0);
      corr.rho[j][k] = r;
      corr.rho[k][j] = r;
    }
  }
  return corr;
}

ClusterResult cluster_features(const CorrelationMatrix& corr,
                               double distance_threshold, Linkage linkage) {
  if (distance_threshold < 0.0) {
    fail(Errc::InvalidSpec, "distance threshold must be >= 0");
  }
  const int d = static_cast<int>(corr.feature_names.size());
  ClusterResult result;
  result.dendrogram.n_leaves = d;
  if (d == 0) return result;

  // active cluster list with Lance-Williams updates
  struct Cluster {
    int id;
    int size;
  };
  std::vector<Cluster> active;
  active.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) active.push_back({i, 1});

  // distance matrix over active positions
  std::vector<std::vector<double>> dist(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i != j) dist[i][j] = 1.0 - std::abs(corr.rho[i][j]);
    }
  }

  // parent links for flat-cluster extraction
  std::vector<int> members_min(2 * d - 1);  // lowest leaf per cluster id
  for (int i = 0; i < d; ++i) members_min[i] = i;
  std::vector<int> leaf_cluster(d);
  std::iota(leaf_cluster.begin(), leaf_cluster.end(), 0);

  int next_id = d;
  std::vector<std::vector<int>> leaves_of(2 * d - 1);
  for (int i = 0; i < d; ++i) leaves_of[i] = {i};

  while (active.size() > 1) {
    // smallest distance; ties to the pair with the lowest cluster ids
    std::size_t bi = 0;
    std::size_t bj = 1;
    double bd = std::numeric_limits<double>::infinity();
    int best_lo = -1;
    int best_hi = -1;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        double v = dist[i][j];
        int lo = std::min(active[i].id, active[j].id);
        int hi = std::max(active[i].id, active[j].id);
        bool better = v < bd || (v == bd && (lo < best_lo ||
                                             (lo == best_lo && hi < best_hi)));
        if (better) {
          bd = v;
          bi = i;
          bj = j;
          best_lo = lo;
          best_hi = hi;
        }
      }
    }
    int id_a = active[bi].id;
    int id_b = active[bj].id;
    if (id_a > id_b) std::swap(id_a, id_b);

    MergeStep step;
    step.a = id_a;
    step.b = id_b;
    step.height = bd;
    step.id = next_id;
    result.dendrogram.merges.push_back(step);

    int na = active[bi].size;
    int nb = active[bj].size;
    leaves_of[next_id] = leaves_of[active[bi].id];
    leaves_of[next_id].insert(leaves_of[next_id].end(),
                              leaves_of[active[bj].id].begin(),
                              leaves_of[active[bj].id].end());
    members_min[next_id] =
        std::min(members_min[active[bi].id], members_min[active[bj].id]);

    // update distances into position bi, drop bj
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == bi || k == bj) continue;
      double dk;
      switch (linkage) {
        case Linkage::Single:
          dk = std::min(dist[bi][k], dist[bj][k]);
          break;
        case Linkage::Complete:
          dk = std::max(dist[bi][k], dist[bj][k]);
          break;
        default:
          dk = (na * dist[bi][k] + nb * dist[bj][k]) /
               static_cast<double>(na + nb);
      }
      dist[bi][k] = dk;
      dist[k][bi] = dk;
    }
    active[bi] = {next_id, na + nb};
    ++next_id;

    std::size_t last = active.size() - 1;
    if (bj != last) {
      active[bj] = active[last];
      for (std::size_t k = 0; k < active.size(); ++k) {
        dist[bj][k] = dist[last][k];
        dist[k][bj] = dist[k][last];
      }
      dist[bj][bj] = 0.0;
    }
    active.pop_back();
  }

  // flat clusters: apply merges with height <= threshold
  std::vector<int> owner(d);
  std::iota(owner.begin(), owner.end(), 0);
  for (const auto& m : result.dendrogram.merges) {
    if (m.height <= distance_threshold) {
      for (int leaf : leaves_of[m.id]) owner[leaf] = m.id;
    }
  }
  // renumber by lowest member index
  std::vector<int> order;
  std::vector<int> seen;
  result.assignment.assign(d, -1);
  for (int leaf = 0; leaf < d; ++leaf) {
    int o = owner[leaf];
    auto it = std::find(seen.begin(), seen.end(), o);
    if (it == seen.end()) {
      seen.push_back(o);
      result.assignment[leaf] = static_cast<int>(seen.size()) - 1;
    } else {
      result.assignment[leaf] = static_cast<int>(it - seen.begin());
    }
  }
  result.n_clusters = static_cast<int>(seen.size());
  return result;
}

std::vector<std::string> select_representatives(const ClusterResult& clusters,
                                                const CorrelationMatrix& corr,
                                                const FeatureRanking& ranking) {
  std::map<std::string, double> importance;
  for (const auto& e : ranking.entries) importance[e.name] = e.mean_abs_shap;

  std::vector<std::string> reps(static_cast<std::size_t>(clusters.n_clusters));
  std::vector<double> best(static_cast<std::size_t>(clusters.n_clusters),
                           -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < corr.feature_names.size(); ++j) {
    const std::string& name = corr.feature_names[j];
    auto it = importance.find(name);
    if (it == importance.end()) fail(Errc::UnrankedFeature, name);
    int c = clusters.assignment[j];
    double score = it->second;
    if (score > best[c] || (score == best[c] && name < reps[c])) {
      best[c] = score;
      reps[c] = name;
    }
  }
  return reps;
}

std::pair<Dataset, VifReport> vif_filter(const Dataset& ds, double threshold) {
  if (threshold <= 1.0) fail(Errc::InvalidSpec, "VIF threshold must be > 1");
  const std::size_t n = ds.n_rows();
  VifReport report;
  report.threshold = threshold;

  std::vector<std::size_t> remaining(ds.n_cols());
  std::iota(remaining.begin(), remaining.end(), 0);

  // z-score once; columns with no variance carry no collinearity signal and
  // keep VIF 1
  std::vector<std::vector<double>> z(ds.n_cols());
  std::vector<char> constant(ds.n_cols(), 0);
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    const auto& col = ds.col(j);
    double mu = 0.0;
    for (double v : col) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    z[j].resize(n);
    if (var <= 0.0) {
      constant[j] = 1;
      continue;
    }
    double sd = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) z[j][i] = (col[i] - mu) / sd;
  }

  auto compute_vifs = [&](const std::vector<std::size_t>& cols) {
    std::vector<double> vifs(cols.size(), 1.0);
    if (cols.size() < 2) return vifs;
    if (n <= cols.size() + 1) {
      fail(Errc::TooFewRows, "need more rows than features for VIF");
    }
    for (std::size_t jj = 0; jj < cols.size(); ++jj) {
      if (constant[cols[jj]]) continue;
      std::size_t p = 0;
      for (std::size_t kk = 0; kk < cols.size(); ++kk) {
        if (kk != jj && !constant[cols[kk]]) ++p;
      }
      if (p == 0) continue;
      Eigen::MatrixXd X(n, p);
      Eigen::VectorXd y(n);
      std::size_t c = 0;
      for (std::size_t kk = 0; kk < cols.size(); ++kk) {
        if (kk == jj || constant[cols[kk]]) continue;
        for (std::size_t i = 0; i < n; ++i) X(i, c) = z[cols[kk]][i];
        ++c;
      }
      for (std::size_t i = 0; i < n; ++i) y(i) = z[cols[jj]][i];
      // columns are centered, so the intercept is implicit
      Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
      double sse = (y - X * beta).squaredNorm();
      double sst = y.squaredNorm();
      double r2 = 1.0 - sse / sst;
      if (r2 >= 1.0 - 1e-12) {
        vifs[jj] = std::numeric_limits<double>::infinity();
      } else {
        vifs[jj] = 1.0 / (1.0 - r2);
      }
    }
    return vifs;
  };

  while (remaining.size() >= 2) {
    auto vifs = compute_vifs(remaining);
    std::size_t worst = 0;
    for (std::size_t j = 1; j < vifs.size(); ++j) {
      if (vifs[j] > vifs[worst]) worst = j;  // ties keep the lower column
    }
    if (!(vifs[worst] >= threshold)) {
      for (std::size_t j = 0; j < remaining.size(); ++j) {
        report.final_vifs[ds.spec(remaining[j]).name] = vifs[j];
      }
      break;
    }
    report.iterations.push_back(
        {ds.spec(remaining[worst]).name, vifs[worst]});
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  if (remaining.size() < 2 && report.final_vifs.empty()) {
    for (std::size_t j : remaining) {
      report.final_vifs[ds.spec(j).name] = 1.0;
    }
  }
  return {ds.select_columns(remaining), std::move(report)};
}

std::string correlation_to_csv(const CorrelationMatrix& corr) {
  std::string out = "feature";
  for (const auto& name : corr.feature_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t i = 0; i < corr.feature_names.size(); ++i) {
    out += corr.feature_names[i];
    for (std::size_t j = 0; j < corr.feature_names.size(); ++j) {
      out += ',';
      out += fmt_double(corr.rho[i][j]);
    }
    out += '\n';
  }
  return out;
}

std::string dendrogram_to_json(const Dendrogram& dendro) {
  nlohmann::json j;
  j["n_leaves"] = dendro.n_leaves;
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : dendro.merges) {
    merges.push_back({{"a", m.a},
                      {"b", m.b},
                      {"height", m.height},
                      {"id", m.id}});
  }
  j["merges"] = std::move(merges);
  return j.dump(2) + "\n";
}

std::string vif_report_to_json(const VifReport& report) {
  nlohmann::json j;
  j["threshold"] = report.threshold;
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& it : report.iterations) {
    nlohmann::json entry;
    entry["removed"] = it.removed;
    if (std::isinf(it.vif)) {
      entry["vif"] = "inf";
    } else {
      entry["vif"] = it.vif;
    }
    iters.push_back(std::move(entry));
  }
  j["iterations"] = std::move(iters);
  nlohmann::json finals;
  for (const auto& [name, vif] : report.final_vifs) finals[name] = vif;
  j["final_vifs"] = std::move(finals);
  return j.dump(2) + "\n";
}

}  // namespace uit
