#include "uit/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

namespace {

void check_unique_names(const std::vector<FeatureSpec>& columns) {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) fail(Errc::InvalidSpec, "empty column name");
    if (c.name.find(',') != std::string::npos ||
        c.name.find('\n') != std::string::npos) {
      fail(Errc::InvalidSpec, "column name contains separator: " + c.name);
    }
    if (!seen.insert(c.name).second) {
      fail(Errc::InvalidSpec, "duplicate column name: " + c.name);
    }
  }
}

}  // namespace

Dataset::Dataset(std::vector<FeatureSpec> columns,
                 std::vector<std::vector<double>> values,
                 std::vector<int> labels, std::vector<std::string> ids,
                 std::string label_name)
    : columns_(std::move(columns)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      ids_(std::move(ids)),
      label_name_(std::move(label_name)) {
  check_unique_names(columns_);
  if (values_.size() != columns_.size()) {
    fail(Errc::LengthMismatch, "column count does not match specs");
  }
  for (std::size_t j = 0; j < values_.size(); ++j) {
    if (values_[j].size() != labels_.size()) {
      fail(Errc::LengthMismatch,
           "column " + columns_[j].name + " has wrong row count");
    }
  }
  for (int y : labels_) {
    if (y != 0 && y != 1) {
      fail(Errc::UnparseableValue, "label outside {0,1}");
    }
  }
  if (ids_.empty()) {
    ids_.resize(labels_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      ids_[i] = std::to_string(i);
    }
  } else if (ids_.size() != labels_.size()) {
    fail(Errc::LengthMismatch, "id count does not match rows");
  }
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Dataset::find_column(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return j;
  }
  return std::nullopt;
}

std::vector<double> Dataset::row(std::size_t i) const {
  std::vector<double> out(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) out[j] = values_[j][i];
  return out;
}

std::vector<double> Dataset::row_major() const {
  std::vector<double> out(n_rows() * n_cols());
  for (std::size_t j = 0; j < n_cols(); ++j) {
    const auto& v = values_[j];
    for (std::size_t i = 0; i < v.size(); ++i) out[i * n_cols() + j] = v[i];
  }
  return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  std::vector<std::vector<double>> values(n_cols());
  for (std::size_t j = 0; j < n_cols(); ++j) {
    values[j].reserve(rows.size());
    for (std::size_t r : rows) values[j].push_back(values_[j][r]);
  }
  std::vector<int> labels;
  std::vector<std::string> ids;
  labels.reserve(rows.size());
  ids.reserve(rows.size());
  for (std::size_t r : rows) {
    labels.push_back(labels_[r]);
    ids.push_back(ids_[r]);
  }
  return Dataset(columns_, std::move(values), std::move(labels),
                 std::move(ids), label_name_);
}

Dataset Dataset::select_columns(const std::vector<std::size_t>& cols) const {
  std::vector<FeatureSpec> specs;
  std::vector<std::vector<double>> values;
  specs.reserve(cols.size());
  values.reserve(cols.size());
  for (std::size_t j : cols) {
    specs.push_back(columns_[j]);
    values.push_back(values_[j]);
  }
  return Dataset(std::move(specs), std::move(values), labels_, ids_,
                 label_name_);
}

Dataset Dataset::drop_column(const std::string& name) const {
  auto j = find_column(name);
  if (!j) fail(Errc::MissingColumn, name);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < n_cols(); ++c) {
    if (c != *j) keep.push_back(c);
  }
  return select_columns(keep);
}

Dataset Dataset::with_labels(std::vector<int> labels) const {
  return Dataset(columns_, values_, std::move(labels), ids_, label_name_);
}

std::vector<std::size_t> FoldPlan::fold_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

// --- ingestion -------------------------------------------------------------

Dataset ingest_csv(const std::string& path,
                   const std::vector<FeatureSpec>& schema,
                   const std::string& label_column) {
  check_unique_names(schema);
  std::string content = read_file(path);

  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : content) {
      if (c == '\n') {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  if (lines.empty()) fail(Errc::MissingColumn, "empty file: " + path);

  auto header = split_line(lines[0]);
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;

  auto locate = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) fail(Errc::MissingColumn, name + " in " + path);
    return it->second;
  };
  std::size_t label_pos = locate(label_column);
  std::vector<std::size_t> col_pos;
  col_pos.reserve(schema.size());
  for (const auto& s : schema) col_pos.push_back(locate(s.name));
  if (header.size() != schema.size() + 1) {
    fail(Errc::SchemaMismatch,
         "header has " + std::to_string(header.size()) +
             " columns, schema declares " + std::to_string(schema.size() + 1));
  }

  std::size_t n = lines.size() - 1;
  std::vector<std::vector<double>> values(schema.size());
  for (auto& v : values) v.reserve(n);
  std::vector<int> labels;
  labels.reserve(n);

  for (std::size_t r = 0; r < n; ++r) {
    auto cells = split_line(lines[r + 1]);
    if (cells.size() != header.size()) {
      fail(Errc::UnparseableValue,
           "row " + std::to_string(r + 1) + " has " +
               std::to_string(cells.size()) + " cells");
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string& cell = cells[col_pos[j]];
      const FeatureSpec& spec = schema[j];
      if (cell.empty()) {
        fail(Errc::UnparseableValue, "missing value at row " +
                                         std::to_string(r + 1) + ", column " +
                                         spec.name);
      }
      if (spec.kind == FeatureKind::Categorical) {
        auto it =
            std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (it == spec.categories.end()) {
          fail(Errc::UnknownCategory, "'" + cell + "' at row " +
                                          std::to_string(r + 1) +
                                          ", column " + spec.name);
        }
        values[j].push_back(
            static_cast<double>(it - spec.categories.begin()));
      } else {
        bool ok = false;
        double v = parse_double(cell, ok);
        if (!ok || !std::isfinite(v)) {
          fail(Errc::UnparseableValue, "'" + cell + "' at row " +
                                           std::to_string(r + 1) +
                                           ", column " + spec.name);
        }
        values[j].push_back(v);
      }
    }
    const std::string& lab = cells[label_pos];
    if (lab == "0") {
      labels.push_back(0);
    } else if (lab == "1") {
      labels.push_back(1);
    } else {
      fail(Errc::UnparseableValue, "label '" + lab + "' at row " +
                                       std::to_string(r + 1));
    }
  }

  return Dataset(schema, std::move(values), std::move(labels), {},
                 label_column);
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    out += ds.spec(j).name;
    out += ',';
  }
  out += ds.label_name();
  out += '\n';
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < ds.n_cols(); ++j) {
      const FeatureSpec& spec = ds.spec(j);
      double v = ds.at(i, j);
      if (spec.kind == FeatureKind::Categorical) {
        out += spec.categories[static_cast<std::size_t>(v)];
      } else {
        out += fmt_double(v);
      }
      out += ',';
    }
    out += ds.label(i) ? '1' : '0';
    out += '\n';
  }
  return out;
}

void emit_csv(const Dataset& ds, const std::string& path) {
  write_file(path, to_csv(ds));
}

std::vector<FeatureSpec> load_schema(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (!j.is_array()) fail(Errc::InvalidSpec, "schema must be a JSON list");
  std::vector<FeatureSpec> out;
  for (const auto& item : j) {
    FeatureSpec s;
    s.name = item.at("name").get<std::string>();
    std::string kind = item.at("kind").get<std::string>();
    if (kind == "numeric") {
      s.kind = FeatureKind::Numeric;
    } else if (kind == "categorical") {
      s.kind = FeatureKind::Categorical;
      s.categories = item.at("categories").get<std::vector<std::string>>();
      if (s.categories.empty()) {
        fail(Errc::InvalidSpec, "categorical without categories: " + s.name);
      }
    } else {
      fail(Errc::InvalidSpec, "unknown kind '" + kind + "' for " + s.name);
    }
    if (item.contains("indicator")) s.indicator = item["indicator"].get<bool>();
    out.push_back(std::move(s));
  }
  check_unique_names(out);
  return out;
}

void save_schema(const std::vector<FeatureSpec>& schema,
                 const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : schema) {
    nlohmann::json item;
    item["name"] = s.name;
    item["kind"] = s.kind == FeatureKind::Numeric ? "numeric" : "categorical";
    if (s.kind == FeatureKind::Categorical) item["categories"] = s.categories;
    if (s.indicator) item["indicator"] = true;
    j.push_back(item);
  }
  write_file(path, j.dump(2) + "\n");
}

// --- preprocessing ----------------------------------------------------------

Dataset encode_onehot(const Dataset& ds) {
  std::vector<FeatureSpec> specs;
  std::vector<std::vector<double>> values;
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    const FeatureSpec& s = ds.spec(j);
    if (s.kind == FeatureKind::Numeric) {
      specs.push_back(s);
      values.push_back(ds.col(j));
      continue;
    }
    for (std::size_t c = 0; c < s.categories.size(); ++c) {
      FeatureSpec ind;
      ind.name = s.name + "=" + s.categories[c];
      ind.kind = FeatureKind::Numeric;
      ind.indicator = true;
      std::vector<double> v(ds.n_rows());
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        v[i] = ds.at(i, j) == static_cast<double>(c) ? 1.0 : 0.0;
      }
      specs.push_back(std::move(ind));
      values.push_back(std::move(v));
    }
  }
  return Dataset(std::move(specs), std::move(values), ds.labels(), ds.ids(),
                 ds.label_name());
}

std::pair<Dataset, NormalizationParams> normalize(const Dataset& ds) {
  NormalizationParams params;
  std::vector<std::vector<double>> values;
  values.reserve(ds.n_cols());
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    const FeatureSpec& s = ds.spec(j);
    if (s.kind == FeatureKind::Categorical || s.indicator) {
      values.push_back(ds.col(j));
      continue;
    }
    const auto& x = ds.col(j);
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());  // population variance
    double sigma = std::sqrt(var);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      fail(Errc::ZeroVariance, s.name);
    }
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mu) / sigma;
    values.push_back(std::move(z));
    params.entries.push_back({s.name, mu, sigma});
  }
  return {Dataset(ds.specs(), std::move(values), ds.labels(), ds.ids(),
                  ds.label_name()),
          std::move(params)};
}

Dataset apply_normalization(const Dataset& ds,
                            const NormalizationParams& params) {
  std::vector<std::vector<double>> values;
  values.reserve(ds.n_cols());
  std::unordered_map<std::string, const NormalizationEntry*> by_name;
  for (const auto& e : params.entries) by_name[e.name] = &e;
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    const FeatureSpec& s = ds.spec(j);
    auto it = by_name.find(s.name);
    if (it == by_name.end()) {
      values.push_back(ds.col(j));
      continue;
    }
    const NormalizationEntry& e = *it->second;
    std::vector<double> z(ds.n_rows());
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = (ds.at(i, j) - e.mu) / e.sigma;
    }
    values.push_back(std::move(z));
  }
  return Dataset(ds.specs(), std::move(values), ds.labels(), ds.ids(),
                 ds.label_name());
}

// --- label matching ---------------------------------------------------------

std::size_t levenshtein_distance(const std::string& a, const std::string& b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (m == 0) return n;
  if (n == 0) return m;
  std::vector<std::size_t> prev(n + 1);
  std::vector<std::size_t> cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

namespace {

std::string to_upper(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

double similarity(const std::string& a, const std::string& b, LevNorm norm) {
  if (a.empty() && b.empty()) return 1.0;
  double d = static_cast<double>(levenshtein_distance(a, b));
  if (norm == LevNorm::MaxLen) {
    return 1.0 - d / static_cast<double>(std::max(a.size(), b.size()));
  }
  return 1.0 - 2.0 * d / static_cast<double>(a.size() + b.size());
}

}  // namespace

std::set<std::size_t> match_labels(const std::vector<std::string>& owners,
                                   const std::vector<std::string>& defendants,
                                   double threshold, LevNorm norm) {
  if (threshold < 0.0 || threshold > 1.0) {
    fail(Errc::InvalidSpec, "threshold outside [0,1]");
  }
  std::vector<std::string> defs;
  defs.reserve(defendants.size());
  for (const auto& d : defendants) defs.push_back(to_upper(d));

  std::set<std::size_t> matched;
  for (std::size_t i = 0; i < owners.size(); ++i) {
    std::string owner = to_upper(owners[i]);
    double best = -1.0;
    for (const auto& d : defs) best = std::max(best, similarity(owner, d, norm));
    if (best > threshold) matched.insert(i);
  }
  return matched;
}

// --- resampling -------------------------------------------------------------

Dataset balanced_subsample(const Dataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    (ds.label(i) == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) fail(Errc::OneClassOnly, "balanced_subsample");

  auto& minority = pos.size() <= neg.size() ? pos : neg;
  auto& majority = pos.size() <= neg.size() ? neg : pos;
  Rng rng(derive_seed(seed, "balanced_subsample"));
  std::vector<std::size_t> majority_pick = majority;
  rng.shuffle(majority_pick);
  majority_pick.resize(minority.size());

  std::vector<std::size_t> keep = minority;
  keep.insert(keep.end(), majority_pick.begin(), majority_pick.end());
  std::sort(keep.begin(), keep.end());
  return ds.select_rows(keep);
}

FoldPlan make_folds_for_labels(const std::vector<int>& labels, int k,
                               std::uint64_t seed) {
  std::size_t n = labels.size();
  if (k < 2) fail(Errc::InvalidSpec, "k must be at least 2");
  if (static_cast<std::size_t>(k) > n) {
    fail(Errc::KTooLarge,
         "k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");
  }
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos : neg).push_back(i);

  Rng rng(derive_seed(seed, "make_folds"));
  rng.shuffle(pos);
  rng.shuffle(neg);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, -1);
  // one running counter across classes keeps overall fold sizes within 1
  std::size_t counter = 0;
  for (const auto* cls : {&neg, &pos}) {
    for (std::size_t r : *cls) {
      plan.assignments[r] = static_cast<int>(counter % k);
      ++counter;
    }
  }
  return plan;
}

FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed) {
  return make_folds_for_labels(ds.labels(), k, seed);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& labels, double test_fraction,
                 std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    fail(Errc::InvalidSpec, "test_fraction outside (0,1)");
  }
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? pos : neg).push_back(i);
  }
  Rng rng(derive_seed(seed, "stratified_split"));
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (auto* cls : {&neg, &pos}) {
    rng.shuffle(*cls);
    std::size_t n_test =
        cls->size() <= 1
            ? 0
            : static_cast<std::size_t>(
                  std::floor(test_fraction * static_cast<double>(cls->size()) +
                             0.5));
    if (n_test >= cls->size()) n_test = cls->size() - 1;
    for (std::size_t i = 0; i < cls->size(); ++i) {
      (i < n_test ? test : train).push_back((*cls)[i]);
    }
  }
  if (test.empty() && !train.empty()) {
    test.push_back(train.back());
    train.pop_back();
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

}  // namespace uit
