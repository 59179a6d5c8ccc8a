#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uit/causal.hpp"
#include "uit/dataset.hpp"
#include "uit/decorrelate.hpp"
#include "uit/gbtree.hpp"
#include "uit/report_bundle.hpp"
#include "uit/shapley.hpp"
#include "uit/synth.hpp"

namespace uit {

enum class DecorrelateOrder { ClusterThenVif, VifThenCluster };

struct DataSource {
  std::string csv;
  std::string schema;
  std::string label_column = "label";
};

/// One configuration drives the whole flow; stage subcommands reuse the same
/// keys so the monolithic run and the stage-wise runs stay byte-identical.
struct PipelineConfig {
  std::optional<DataSource> data;
  std::optional<SynthSpec> synth;
  bool balance = true;
  int folds = 5;
  double test_fraction = 0.2;
  BoostConfig boost;
  double shap_threshold = 0.022;
  std::size_t shap_background_cap = 256;
  double cluster_distance_threshold = 0.3;
  Linkage cluster_linkage = Linkage::Average;
  double vif_threshold = 10.0;
  DecorrelateOrder decorrelate_order = DecorrelateOrder::ClusterThenVif;
  CausalForestConfig forest;
  BoostConfig nuisance_boost;
  double propensity_clip = 0.05;
  int causal_k_folds = 5;
  std::uint64_t seed = 0;
  int threads = 0;

  PipelineConfig();
};


PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);

// --- stage results ----------------------------------------------------------

struct ClassifyResult {
  Dataset processed;  // encoded, balanced, normalized
  NormalizationParams norm;
  FoldPlan folds;
  CvResult cv;
  TreeEnsemble model;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

struct ShapResult {
  ShapMatrix shap;
  FeatureRanking ranking;
};

struct DecorrelateResult {
  CorrelationMatrix corr;
  ClusterResult clusters;
  VifReport vif;
  std::vector<std::string> representatives;  // after clustering
  std::vector<std::string> final_features;   // after both steps
  Dataset reduced;                           // processed columns restricted
  TreeEnsemble reduced_model;
  ShapMatrix reduced_shap;
  FeatureRanking reranking;
};

struct CausalStageResult {
  std::vector<SweepEntry> sweep;
};

// --- pure stage functions ----------------------------------------------------

Dataset resolve_input(const PipelineConfig& cfg, const std::string& out_dir,
                      Manifest* manifest);

ClassifyResult classify_stage(const Dataset& raw, const PipelineConfig& cfg);

ShapResult shap_stage(const Dataset& processed, const TreeEnsemble& model,
                      const std::vector<std::size_t>& test_rows,
                      const PipelineConfig& cfg);

DecorrelateResult decorrelate_stage(const Dataset& processed,
                                    const FeatureRanking& ranking,
                                    const std::vector<std::size_t>& train_rows,
                                    const std::vector<std::size_t>& test_rows,
                                    const PipelineConfig& cfg);

CausalStageResult causal_stage(const Dataset& reduced,
                               const FeatureRanking& reranking,
                               const PipelineConfig& cfg);

// --- artifact writers --------------------------------------------------------

void write_classify_artifacts(const ClassifyResult& r,
                              const std::string& out_dir, Manifest& manifest);
void write_shap_artifacts(const ShapResult& r, const std::string& out_dir,
                          Manifest& manifest);
void write_decorrelate_artifacts(const DecorrelateResult& r,
                                 const std::string& out_dir,
                                 Manifest& manifest);
void write_causal_artifacts(const CausalStageResult& r,
                            const std::string& out_dir, Manifest& manifest);

/// Executes every stage in order and emits the full report bundle plus a
/// manifest. On stage failure the manifest is still written, with the stage
/// and cause recorded, before the error propagates.
Manifest run_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

/// Split-file helpers shared by the CLI stage subcommands.
void save_split(const std::vector<std::size_t>& train,
                const std::vector<std::size_t>& test, const std::string& path);
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> load_split(
    const std::string& path);
FeatureRanking ranking_from_csv(const std::string& text);

}  // namespace uit
