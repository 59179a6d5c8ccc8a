#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/rng.hpp"
#include "uit/textio.hpp"

using namespace uit;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "uit_dataset_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::vector<FeatureSpec> toy_schema() {
  FeatureSpec a{"alpha", FeatureKind::Numeric, {}, false};
  FeatureSpec b{"beta", FeatureKind::Numeric, {}, false};
  FeatureSpec c{"side", FeatureKind::Categorical, {"buy", "sell"}, false};
  return {a, b, c};
}

Dataset make_numeric(const std::vector<std::vector<double>>& cols,
                     std::vector<int> labels) {
  std::vector<FeatureSpec> specs;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    specs.push_back({"f" + std::to_string(j), FeatureKind::Numeric, {}, false});
  }
  return Dataset(specs, cols, std::move(labels));
}

// independent reference for the distance used by match_labels
std::size_t lev_oracle(const std::string& a, const std::string& b,
                       std::map<std::pair<std::size_t, std::size_t>,
                                std::size_t>& memo,
                       std::size_t i, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  auto key = std::make_pair(i, j);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  std::size_t best = lev_oracle(a, b, memo, i + 1, j + 1) +
                     (a[i] == b[j] ? 0 : 1);
  best = std::min(best, lev_oracle(a, b, memo, i + 1, j) + 1);
  best = std::min(best, lev_oracle(a, b, memo, i, j + 1) + 1);
  memo[key] = best;
  return best;
}

std::size_t lev_oracle(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  return lev_oracle(a, b, memo, 0, 0);
}

}  // namespace

TEST_CASE("ingest builds the dataset in file order") {
  std::string path = temp_path("toy.csv");
  write_file(path,
             "alpha,beta,side,label\n"
             "1,2.5,buy,1\n"
             "2,3.5,sell,0\n"
             "3,-1,buy,1\n"
             "4,0,sell,0\n");
  Dataset ds = ingest_csv(path, toy_schema(), "label");
  CHECK(ds.n_rows() == 4);
  CHECK(ds.n_cols() == 3);
  CHECK(ds.at(0, 0) == 1.0);
  CHECK(ds.at(2, 1) == -1.0);
  CHECK(ds.at(1, 2) == 1.0);  // "sell" is category index 1
  CHECK(ds.label(0) == 1);
  CHECK(ds.label(3) == 0);
}

TEST_CASE("ingest rejects bad labels, categories, and missing cells") {
  std::string path = temp_path("bad.csv");
  write_file(path, "alpha,beta,side,label\n1,2,buy,2\n");
  try {
    ingest_csv(path, toy_schema(), "label");
    FAIL("expected UnparseableValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnparseableValue);
  }

  write_file(path, "alpha,beta,side,label\n1,2,hold,1\n");
  try {
    ingest_csv(path, toy_schema(), "label");
    FAIL("expected UnknownCategory");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownCategory);
  }

  write_file(path, "alpha,beta,side,label\n1,,buy,1\n");
  try {
    ingest_csv(path, toy_schema(), "label");
    FAIL("expected UnparseableValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnparseableValue);
  }

  write_file(path, "alpha,side,label\n1,buy,1\n");
  try {
    ingest_csv(path, toy_schema(), "label");
    FAIL("expected MissingColumn");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingColumn);
  }
}

TEST_CASE("csv round-trip is byte identical on canonical files") {
  // write-then-read oracle over generated datasets
  Rng rng(20240901);
  for (int rep = 0; rep < 5; ++rep) {
    std::size_t n = 20 + rng.uniform_index(30);
    std::vector<std::vector<double>> cols(3);
    std::vector<double> cat(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      cols[0].push_back(rng.normal() * 1e3);
      cols[1].push_back(rng.uniform() * 1e-4);
      cols[2].push_back(std::floor(rng.uniform() * 7.0));
      cat[i] = static_cast<double>(rng.uniform_index(2));
      labels[i] = static_cast<int>(rng.uniform_index(2));
    }
    if (labels[0] == labels[1]) labels[1] = 1 - labels[0];
    std::vector<FeatureSpec> specs = {
        {"x0", FeatureKind::Numeric, {}, false},
        {"x1", FeatureKind::Numeric, {}, false},
        {"x2", FeatureKind::Numeric, {}, false},
        {"side", FeatureKind::Categorical, {"buy", "sell"}, false},
    };
    cols.push_back(cat);
    Dataset ds(specs, cols, labels);
    std::string path = temp_path("roundtrip" + std::to_string(rep) + ".csv");
    emit_csv(ds, path);
    std::string canonical = read_file(path);
    Dataset again = ingest_csv(path, specs, "label");
    emit_csv(again, path);
    CHECK(read_file(path) == canonical);
  }
}

TEST_CASE("normalize matches the z-score definition") {
  Dataset ds = make_numeric({{1.0, 2.0, 3.0}}, {0, 1, 0});
  auto [out, params] = normalize(ds);
  REQUIRE(params.entries.size() == 1);
  CHECK(params.entries[0].mu == doctest::Approx(2.0));
  CHECK(params.entries[0].sigma == doctest::Approx(0.816496580927726));
  CHECK(out.at(0, 0) == doctest::Approx(-1.224744871391589));
  CHECK(out.at(1, 0) == doctest::Approx(0.0));
  CHECK(out.at(2, 0) == doctest::Approx(1.224744871391589));

  // independent mean/std route
  double mu = (1.0 + 2.0 + 3.0) / 3.0;
  double sd = std::sqrt(((1 - mu) * (1 - mu) + (2 - mu) * (2 - mu) +
                         (3 - mu) * (3 - mu)) /
                        3.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.at(i, 0) ==
          doctest::Approx((ds.at(i, 0) - mu) / sd).epsilon(1e-12));
  }
}

TEST_CASE("normalize is idempotent on standardized input, rejects constants") {
  Dataset ds = make_numeric({{1.0, 2.0, 3.0, 4.0, 10.0}}, {0, 1, 0, 1, 0});
  auto [once, p1] = normalize(ds);
  auto [twice, p2] = normalize(once);
  (void)p1;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    CHECK(std::abs(once.at(i, 0) - twice.at(i, 0)) < 1e-9);
  }
  CHECK(std::abs(p2.entries[0].mu) < 1e-12);
  CHECK(p2.entries[0].sigma == doctest::Approx(1.0));

  Dataset constant = make_numeric({{5.0, 5.0, 5.0}}, {0, 1, 0});
  try {
    normalize(constant);
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroVariance);
  }
}

TEST_CASE("normalize then apply-params reproduces the normalized output") {
  Rng rng(7);
  std::vector<std::vector<double>> cols(4);
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    for (auto& c : cols) c.push_back(rng.normal() * 3 + 1);
    labels.push_back(i % 2);
  }
  Dataset ds = make_numeric(cols, labels);
  auto [normed, params] = normalize(ds);
  Dataset applied = apply_normalization(ds, params);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < ds.n_cols(); ++j) {
      CHECK(std::abs(normed.at(i, j) - applied.at(i, j)) < 1e-9);
    }
  }
  // training column moments after transform
  for (std::size_t j = 0; j < normed.n_cols(); ++j) {
    double mu = 0.0;
    for (double v : normed.col(j)) mu += v;
    mu /= static_cast<double>(normed.n_rows());
    double var = 0.0;
    for (double v : normed.col(j)) var += (v - mu) * (v - mu);
    var /= static_cast<double>(normed.n_rows());
    CHECK(std::abs(mu) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("one-hot encoding expands categorical columns") {
  std::string path = temp_path("onehot.csv");
  write_file(path,
             "alpha,beta,side,label\n"
             "1,2,buy,1\n"
             "2,3,sell,0\n");
  Dataset ds = ingest_csv(path, toy_schema(), "label");
  Dataset enc = encode_onehot(ds);
  CHECK(enc.n_cols() == 4);
  CHECK(enc.spec(2).name == "side=buy");
  CHECK(enc.spec(3).name == "side=sell");
  CHECK(enc.spec(2).indicator);
  CHECK(enc.at(0, 2) == 1.0);
  CHECK(enc.at(0, 3) == 0.0);
  CHECK(enc.at(1, 3) == 1.0);
  // indicators stay untouched by normalize
  auto [normed, params] = normalize(enc);
  CHECK(normed.at(0, 2) == 1.0);
  CHECK(params.entries.size() == 2);
}

TEST_CASE("match_labels thresholds normalized similarity") {
  CHECK(match_labels({"JOHN SMITH"}, {"JOHN SMITH"}) ==
        std::set<std::size_t>{0});

  // brute-force distance gives similarity below 0.85
  std::size_t d = lev_oracle("JOHN SMITH", "JANE DOE");
  CHECK(d == levenshtein_distance("JOHN SMITH", "JANE DOE"));
  double sim = 1.0 - static_cast<double>(d) / 10.0;
  CHECK(sim < 0.85);
  CHECK(match_labels({"JOHN SMITH"}, {"JANE DOE"}, 0.85).empty());

  // strict exceedance at threshold 1.0
  CHECK(match_labels({"JOHN SMITH"}, {"JOHN SMITB"}, 1.0).empty());
  CHECK(match_labels({"john smith"}, {"JOHN SMITH"}, 0.99) ==
        std::set<std::size_t>{0});
  CHECK(match_labels({}, {"JOHN"}).empty());
}

TEST_CASE("levenshtein agrees with the recursive oracle on random names") {
  Rng rng(99);
  const std::string alphabet = "ABCDEFG ";
  for (int rep = 0; rep < 40; ++rep) {
    std::string a;
    std::string b;
    std::size_t la = 3 + rng.uniform_index(8);
    std::size_t lb = 3 + rng.uniform_index(8);
    for (std::size_t i = 0; i < la; ++i) {
      a.push_back(alphabet[rng.uniform_index(alphabet.size())]);
    }
    for (std::size_t i = 0; i < lb; ++i) {
      b.push_back(alphabet[rng.uniform_index(alphabet.size())]);
    }
    CHECK(levenshtein_distance(a, b) == lev_oracle(a, b));
  }
}

TEST_CASE("match_labels is monotone in the threshold") {
  std::vector<std::string> owners = {"ALPHA BRAVO", "CHARLIE DELTA",
                                     "ECHO FOXTROT", "GOLF HOTEL"};
  std::vector<std::string> defendants = {"ALPHA BRAV", "CHARLIE D",
                                         "INDIA JULIET"};
  std::set<std::size_t> prev = match_labels(owners, defendants, 0.0);
  for (double t : {0.2, 0.4, 0.6, 0.8, 0.95, 1.0}) {
    std::set<std::size_t> cur = match_labels(owners, defendants, t);
    for (std::size_t idx : cur) CHECK(prev.count(idx) == 1);
    prev = cur;
  }
}

TEST_CASE("balanced_subsample equalizes class counts") {
  // minority kept whole, majority subsampled
  std::size_t n_unlawful = 1992;
  std::size_t n_lawful = 10000;
  std::vector<std::vector<double>> cols(1);
  std::vector<int> labels;
  for (std::size_t i = 0; i < n_unlawful + n_lawful; ++i) {
    cols[0].push_back(static_cast<double>(i));
    labels.push_back(i < n_unlawful ? 0 : 1);
  }
  Dataset ds = make_numeric(cols, labels);
  Dataset balanced = balanced_subsample(ds, 11);
  CHECK(balanced.n_rows() == 2 * n_unlawful);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < balanced.n_rows(); ++i) {
    pos += static_cast<std::size_t>(balanced.label(i));
  }
  CHECK(pos == n_unlawful);

  // determinism and minority preservation
  Dataset again = balanced_subsample(ds, 11);
  REQUIRE(again.n_rows() == balanced.n_rows());
  for (std::size_t i = 0; i < again.n_rows(); ++i) {
    CHECK(again.at(i, 0) == balanced.at(i, 0));
  }
  for (std::size_t i = 0; i < n_unlawful; ++i) {
    CHECK(balanced.at(i, 0) == static_cast<double>(i));
  }
}

TEST_CASE("balanced_subsample returns balanced input unchanged") {
  Dataset ds = make_numeric({{1, 2, 3, 4}}, {0, 1, 0, 1});
  Dataset out = balanced_subsample(ds, 5);
  REQUIRE(out.n_rows() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.at(i, 0) == ds.at(i, 0));

  Dataset one_class = make_numeric({{1, 2}}, {1, 1});
  try {
    balanced_subsample(one_class, 1);
    FAIL("expected OneClassOnly");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OneClassOnly);
  }
}

TEST_CASE("make_folds balances sizes and stratifies") {
  {
    Dataset ds = make_numeric({{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
                              {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
    FoldPlan plan = make_folds(ds, 5, 3);
    std::vector<int> sizes(5, 0);
    for (int f : plan.assignments) sizes[f]++;
    for (int s : sizes) CHECK(s == 2);
  }
  {
    Dataset ds = make_numeric({{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
                              {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
    FoldPlan plan = make_folds(ds, 5, 3);
    std::vector<int> sizes(5, 0);
    for (int f : plan.assignments) sizes[f]++;
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<int>{2, 2, 2, 2, 3});
  }
  {
    // stratification counting check over several seeded plans
    std::vector<std::vector<double>> cols(1);
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) {
      cols[0].push_back(i);
      labels.push_back(i % 2);
    }
    Dataset ds = make_numeric(cols, labels);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      FoldPlan plan = make_folds(ds, 5, seed);
      for (int f = 0; f < 5; ++f) {
        int pos = 0;
        int neg = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (plan.assignments[i] == f) (labels[i] ? pos : neg)++;
        }
        CHECK(std::abs(pos - neg) <= 1);
      }
    }
  }
}

TEST_CASE("make_folds partitions rows and rejects oversized k") {
  Dataset ds = make_numeric({{0, 1, 2, 3, 4}}, {0, 1, 0, 1, 0});
  FoldPlan plan = make_folds(ds, 2, 9);
  std::vector<int> seen(ds.n_rows(), 0);
  for (int f = 0; f < plan.k; ++f) {
    for (std::size_t r : plan.fold_rows(f)) seen[r]++;
  }
  for (int s : seen) CHECK(s == 1);

  try {
    make_folds(ds, 6, 0);
    FAIL("expected KTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::KTooLarge);
  }
}

TEST_CASE("schema json round-trips") {
  std::string path = temp_path("schema.json");
  save_schema(toy_schema(), path);
  auto loaded = load_schema(path);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[2].kind == FeatureKind::Categorical);
  CHECK(loaded[2].categories == std::vector<std::string>{"buy", "sell"});
}
