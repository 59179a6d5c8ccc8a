#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uit/error.hpp"

namespace uit {

enum class FeatureKind { Numeric, Categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> categories;  // categorical only
  /// One-hot or binary flag column. Indicator columns are exempt from
  /// z-scoring and pass through treatment binarization unchanged.
  bool indicator = false;
};

/// Column-major numeric table with binary labels.
/// Label convention: 1 = lawful (positive class), 0 = unlawful. Every
/// downstream metric definition depends on this orientation.
///
/// Categorical cells store the index into spec.categories; encode_onehot
/// expands them into indicator columns before modeling. Immutable after
/// construction, so instances are safe to share across threads.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<FeatureSpec> columns,
          std::vector<std::vector<double>> values, std::vector<int> labels,
          std::vector<std::string> ids = {}, std::string label_name = "label");

  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_cols() const { return columns_.size(); }

  const FeatureSpec& spec(std::size_t j) const { return columns_[j]; }
  const std::vector<FeatureSpec>& specs() const { return columns_; }
  const std::vector<double>& col(std::size_t j) const { return values_[j]; }
  double at(std::size_t row, std::size_t col) const {
    return values_[col][row];
  }
  int label(std::size_t row) const { return labels_[row]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& label_name() const { return label_name_; }

  std::vector<std::string> feature_names() const;
  std::optional<std::size_t> find_column(const std::string& name) const;

  /// Gathers one observation as a dense row (feature order).
  std::vector<double> row(std::size_t i) const;
  /// Dense row-major copy, n_rows x n_cols.
  std::vector<double> row_major() const;

  Dataset select_rows(const std::vector<std::size_t>& rows) const;
  Dataset select_columns(const std::vector<std::size_t>& cols) const;
  Dataset drop_column(const std::string& name) const;
  /// Same rows and columns, different labels.
  Dataset with_labels(std::vector<int> labels) const;

 private:
  std::vector<FeatureSpec> columns_;
  std::vector<std::vector<double>> values_;  // [col][row]
  std::vector<int> labels_;
  std::vector<std::string> ids_;
  std::string label_name_ = "label";
};

struct NormalizationEntry {
  std::string name;
  double mu = 0.0;
  double sigma = 1.0;
};

/// Per-column z-score parameters fitted on training data; apply_normalization
/// reuses them on held-out rows.
struct NormalizationParams {
  std::vector<NormalizationEntry> entries;
};

struct FoldPlan {
  int k = 5;
  std::vector<int> assignments;  // fold index per row
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_rows(int fold) const;
  std::vector<std::size_t> complement_rows(int fold) const;
};

// --- ingestion -------------------------------------------------------------

/// Reads a UTF-8 comma-separated file with a header row. The header must
/// contain exactly the schema names plus label_column; dataset column order
/// follows the schema. Numerics use '.' decimals and no quoting; categorical
/// cells must match a declared category. Any missing or malformed cell
/// aborts with its location.
Dataset ingest_csv(const std::string& path,
                   const std::vector<FeatureSpec>& schema,
                   const std::string& label_column);

/// Canonical CSV form: schema-ordered feature columns, label last, shortest
/// round-trip numerics, '\n' line ends. emit_csv(ingest_csv(f)) is
/// byte-identical to a canonical f.
void emit_csv(const Dataset& ds, const std::string& path);
std::string to_csv(const Dataset& ds);

std::vector<FeatureSpec> load_schema(const std::string& path);
void save_schema(const std::vector<FeatureSpec>& schema,
                 const std::string& path);

// --- preprocessing ----------------------------------------------------------

/// Expands categorical columns into one indicator column per category,
/// named "feature=category". Numeric columns pass through.
Dataset encode_onehot(const Dataset& ds);

/// Z-scores numeric non-indicator columns with population standard
/// deviation. Constant columns are a hard error; drop them upstream.
std::pair<Dataset, NormalizationParams> normalize(const Dataset& ds);

/// Applies previously fitted parameters (matched by column name).
Dataset apply_normalization(const Dataset& ds,
                            const NormalizationParams& params);

// --- label matching ---------------------------------------------------------

enum class LevNorm {
  MaxLen,   // 1 - distance / max(len_a, len_b)
  MeanLen,  // 1 - 2 * distance / (len_a + len_b)
};

std::size_t levenshtein_distance(const std::string& a, const std::string& b);

/// Owner i matches iff its best normalized similarity against any defendant
/// strictly exceeds threshold. Both sides are uppercased first.
std::set<std::size_t> match_labels(const std::vector<std::string>& owners,
                                   const std::vector<std::string>& defendants,
                                   double threshold = 0.85,
                                   LevNorm norm = LevNorm::MaxLen);

// --- resampling -------------------------------------------------------------

/// Equalizes class counts: minority class kept whole, majority class
/// subsampled without replacement from the seed. Output preserves original
/// row order.
Dataset balanced_subsample(const Dataset& ds, std::uint64_t seed);

/// Stratified k-fold assignment; fold sizes balanced within one row overall
/// and per class.
FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed);

/// Internal helper shared with nuisance cross-fitting: stratified folds over
/// an arbitrary binary vector.
FoldPlan make_folds_for_labels(const std::vector<int>& labels, int k,
                               std::uint64_t seed);

/// Seeded stratified holdout; returns (train rows, test rows) in ascending
/// order. Classes with a single row stay in train.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& labels, double test_fraction,
                 std::uint64_t seed);

}  // namespace uit
