#include "uit/report_bundle.hpp"

#include <filesystem>

#include "uit/textio.hpp"

namespace uit {

namespace {

void write_artifact(Manifest& manifest, const std::string& out_dir,
                    const std::string& name, const std::string& filename,
                    const std::string& content) {
  std::filesystem::create_directories(out_dir);
  std::string path = out_dir + "/" + filename;
  write_file(path, content);
  manifest.artifacts.push_back({name, filename, fnv1a64_hex(content)});
}

}  // namespace

void manifest_add_file(Manifest& manifest, const std::string& name,
                       const std::string& out_dir,
                       const std::string& filename) {
  manifest.artifacts.push_back(
      {name, filename, digest_file(out_dir + "/" + filename)});
}

Manifest emit_report(const RunArtifacts& artifacts, const std::string& out_dir,
                     Manifest manifest) {
  bool any = artifacts.cv_folds.has_value() || artifacts.ranking.has_value() ||
             (artifacts.shap != nullptr && artifacts.raw != nullptr) ||
             artifacts.dendrogram.has_value() || artifacts.vif.has_value() ||
             artifacts.sweep.has_value();
  if (!any) fail(Errc::MissingInput, "no artifacts to report");

  if (artifacts.cv_folds) {
    MetricSet mean =
        artifacts.cv_mean ? *artifacts.cv_mean : mean_metrics(*artifacts.cv_folds);
    write_artifact(manifest, out_dir, "metrics", "metrics.csv",
                   metrics_table_csv(*artifacts.cv_folds, mean));
  }
  if (artifacts.ranking) {
    write_artifact(manifest, out_dir, "shap_ranking", "shap_ranking.csv",
                   ranking_to_csv(*artifacts.ranking));
  }
  if (artifacts.shap != nullptr && artifacts.raw != nullptr) {
    write_artifact(manifest, out_dir, "beeswarm", "beeswarm.csv",
                   beeswarm_to_csv(beeswarm_export(*artifacts.shap,
                                                   *artifacts.raw)));
  }
  if (artifacts.dendrogram) {
    write_artifact(manifest, out_dir, "dendrogram", "dendrogram.json",
                   dendrogram_to_json(*artifacts.dendrogram));
  }
  if (artifacts.vif) {
    write_artifact(manifest, out_dir, "vif", "vif.json",
                   vif_report_to_json(*artifacts.vif));
  }
  if (artifacts.sweep) {
    write_artifact(manifest, out_dir, "ate_table", "ate_table.csv",
                   ate_table_csv(*artifacts.sweep));
    write_artifact(manifest, out_dir, "ci_bars", "ci_bars.csv",
                   ci_bars_csv(*artifacts.sweep));
  }
  write_manifest(manifest, out_dir);
  return manifest;
}

std::string manifest_to_json(const Manifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["tool"] = "uit 0.1.0";
  j["status"] = manifest.status;
  j["stage"] = manifest.stage;
  j["master_seed"] = manifest.master_seed;
  j["config"] = manifest.config.is_null() ? nlohmann::json::object()
                                          : manifest.config;
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [name, seed] : manifest.stage_seeds) seeds[name] = seed;
  j["stage_seeds"] = std::move(seeds);
  nlohmann::json files = nlohmann::json::array();
  for (const auto& a : manifest.artifacts) {
    files.push_back(
        {{"name", a.name}, {"path", a.path}, {"digest", a.digest}});
  }
  j["artifacts"] = std::move(files);
  if (manifest.status == "failed") {
    j["error"] = manifest.error;
    j["failed_stage"] = manifest.failed_stage;
  }
  return j.dump(2) + "\n";
}

void write_manifest(const Manifest& manifest, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/manifest.json", manifest_to_json(manifest));
}

}  // namespace uit
