#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uit/causal.hpp"
#include "uit/decorrelate.hpp"
#include "uit/report.hpp"
#include "uit/shapley.hpp"

namespace uit {

/// Everything a finished run can hand to the report writer. Absent pieces
/// are simply skipped; at least one must be present.
struct RunArtifacts {
  std::optional<std::vector<MetricSet>> cv_folds;
  std::optional<MetricSet> cv_mean;
  std::optional<FeatureRanking> ranking;
  const ShapMatrix* shap = nullptr;  // with `raw` drives the beeswarm export
  const Dataset* raw = nullptr;
  std::optional<Dendrogram> dendrogram;
  std::optional<VifReport> vif;
  std::optional<std::vector<SweepEntry>> sweep;
};

struct ManifestEntry {
  std::string name;
  std::string path;  // relative to the run directory
  std::string digest;
};

struct Manifest {
  std::string status = "ok";  // ok | failed
  std::string stage;          // run | classify | shap | decorrelate | causal
  std::uint64_t master_seed = 0;
  nlohmann::json config;      // echo of the effective configuration
  std::map<std::string, std::uint64_t> stage_seeds;
  std::vector<ManifestEntry> artifacts;
  std::string error;          // failure message when status == failed
  std::string failed_stage;
};

/// Writes the present artifacts into out_dir (metrics.csv,
/// shap_ranking.csv, beeswarm.csv, dendrogram.json, vif.json,
/// ate_table.csv, ci_bars.csv) plus manifest.json, and returns the manifest.
Manifest emit_report(const RunArtifacts& artifacts, const std::string& out_dir,
                     Manifest manifest);

/// Registers an already-written file in the manifest.
void manifest_add_file(Manifest& manifest, const std::string& name,
                       const std::string& out_dir,
                       const std::string& filename);

std::string manifest_to_json(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::string& out_dir);

}  // namespace uit
