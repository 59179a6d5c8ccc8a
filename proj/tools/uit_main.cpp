// Command-line front end: `uit run` executes the whole flow from one config;
// the stage subcommands consume the previous stage's artifacts so runs can be
// composed and reproduced piecewise.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uit/pipeline.hpp"
#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace {

bool log_enabled() {
  const char* v = std::getenv("UIT_LOG");
  return v != nullptr && std::string(v) != "" && std::string(v) != "0";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[uit] " << msg << "\n";
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string in_dir;
  long long seed = -1;
  int threads = -1;
};

uit::PipelineConfig load_effective_config(const CommonArgs& args) {
  uit::PipelineConfig cfg = args.config_path.empty()
                                ? uit::PipelineConfig{}
                                : uit::load_config(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.threads >= 0) cfg.threads = args.threads;
  return cfg;
}

uit::Manifest make_manifest(const std::string& stage,
                            const uit::PipelineConfig& cfg) {
  uit::Manifest manifest;
  manifest.stage = stage;
  manifest.master_seed = cfg.seed;
  manifest.config = uit::config_to_json(cfg);
  return manifest;
}

int fail_manifest(uit::Manifest manifest, const std::string& stage,
                  const std::exception& e, const std::string& out_dir) {
  manifest.status = "failed";
  manifest.failed_stage = stage;
  manifest.error = e.what();
  try {
    uit::write_manifest(manifest, out_dir);
  } catch (...) {
    // keep the original failure
  }
  std::cerr << "error in stage " << stage << ": " << e.what() << "\n";
  return 2;
}

void require_file(const std::string& path, const std::string& what) {
  std::ifstream probe(path);
  if (!probe.good()) {
    uit::fail(uit::Errc::MissingInput, what + " not found: " + path);
  }
}

uit::Dataset load_processed(const std::string& dir) {
  require_file(dir + "/processed.csv", "processed dataset");
  require_file(dir + "/processed_schema.json", "processed schema");
  auto schema = uit::load_schema(dir + "/processed_schema.json");
  // the label column is the last header cell
  std::string csv = uit::read_file(dir + "/processed.csv");
  auto header = uit::split_line(csv.substr(0, csv.find('\n')));
  return uit::ingest_csv(dir + "/processed.csv", schema, header.back());
}

int cmd_run(const CommonArgs& args) {
  uit::PipelineConfig cfg = load_effective_config(args);
  try {
    log_line("running full pipeline into " + args.out_dir);
    uit::run_pipeline(cfg, args.out_dir);
    return 0;
  } catch (const std::exception& e) {
    // run_pipeline already wrote the failure manifest
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  uit::Manifest manifest;
  manifest.stage = "synth";
  try {
    uit::SynthSpec spec = uit::synth_spec_from_json(uit::read_file(spec_path));
    manifest.master_seed = spec.seed;
    manifest.config = nlohmann::json::parse(uit::synth_spec_to_json(spec));
    uit::SynthData data = uit::generate(spec);
    std::filesystem::create_directories(out_dir);
    uit::emit_csv(data.dataset, out_dir + "/data.csv");
    uit::save_schema(data.dataset.specs(), out_dir + "/data_schema.json");
    uit::write_file(out_dir + "/ground_truth.json",
                    uit::ground_truth_to_json(data.truth));
    uit::manifest_add_file(manifest, "data", out_dir, "data.csv");
    uit::manifest_add_file(manifest, "data_schema", out_dir,
                           "data_schema.json");
    uit::manifest_add_file(manifest, "ground_truth", out_dir,
                           "ground_truth.json");
    uit::write_manifest(manifest, out_dir);
    return 0;
  } catch (const std::exception& e) {
    return fail_manifest(manifest, "synth", e, out_dir);
  }
}

int cmd_classify(const CommonArgs& args) {
  uit::PipelineConfig cfg = load_effective_config(args);
  uit::Manifest manifest = make_manifest("classify", cfg);
  try {
    uit::Dataset raw = uit::resolve_input(cfg, args.out_dir, &manifest);
    uit::ClassifyResult result = uit::classify_stage(raw, cfg);
    uit::write_classify_artifacts(result, args.out_dir, manifest);
    uit::RunArtifacts artifacts;
    artifacts.cv_folds = result.cv.folds;
    artifacts.cv_mean = result.cv.mean;
    uit::emit_report(artifacts, args.out_dir, std::move(manifest));
    return 0;
  } catch (const std::exception& e) {
    return fail_manifest(manifest, "classify", e, args.out_dir);
  }
}

int cmd_shap(const CommonArgs& args) {
  uit::PipelineConfig cfg = load_effective_config(args);
  uit::Manifest manifest = make_manifest("shap", cfg);
  const std::string in = args.in_dir.empty() ? args.out_dir : args.in_dir;
  try {
    require_file(in + "/model.json", "trained model");
    require_file(in + "/split.json", "train/test split");
    uit::Dataset processed = load_processed(in);
    uit::TreeEnsemble model = uit::load_ensemble(in + "/model.json");
    auto [train_rows, test_rows] = uit::load_split(in + "/split.json");
    (void)train_rows;
    uit::ShapResult result =
        uit::shap_stage(processed, model, test_rows, cfg);
    uit::write_shap_artifacts(result, args.out_dir, manifest);
    uit::write_manifest(manifest, args.out_dir);
    return 0;
  } catch (const std::exception& e) {
    return fail_manifest(manifest, "shap", e, args.out_dir);
  }
}

int cmd_decorrelate(const CommonArgs& args) {
  uit::PipelineConfig cfg = load_effective_config(args);
  uit::Manifest manifest = make_manifest("decorrelate", cfg);
  const std::string in = args.in_dir.empty() ? args.out_dir : args.in_dir;
  try {
    require_file(in + "/shap_ranking_initial.csv", "initial SHAP ranking");
    require_file(in + "/split.json", "train/test split");
    uit::Dataset processed = load_processed(in);
    uit::FeatureRanking ranking = uit::ranking_from_csv(
        uit::read_file(in + "/shap_ranking_initial.csv"));
    auto [train_rows, test_rows] = uit::load_split(in + "/split.json");
    uit::DecorrelateResult result = uit::decorrelate_stage(
        processed, ranking, train_rows, test_rows, cfg);
    uit::write_decorrelate_artifacts(result, args.out_dir, manifest);
    uit::RunArtifacts artifacts;
    artifacts.ranking = result.reranking;
    uit::Dataset reduced_test = result.reduced.select_rows(test_rows);
    artifacts.shap = &result.reduced_shap;
    artifacts.raw = &reduced_test;
    artifacts.dendrogram = result.clusters.dendrogram;
    artifacts.vif = result.vif;
    uit::emit_report(artifacts, args.out_dir, std::move(manifest));
    return 0;
  } catch (const std::exception& e) {
    return fail_manifest(manifest, "decorrelate", e, args.out_dir);
  }
}

int cmd_causal(const CommonArgs& args) {
  uit::PipelineConfig cfg = load_effective_config(args);
  uit::Manifest manifest = make_manifest("causal", cfg);
  const std::string in = args.in_dir.empty() ? args.out_dir : args.in_dir;
  try {
    require_file(in + "/retained.json", "retained feature list");
    require_file(in + "/shap_ranking.csv", "post-decorrelation ranking");
    uit::Dataset processed = load_processed(in);
    nlohmann::json retained =
        nlohmann::json::parse(uit::read_file(in + "/retained.json"));
    auto final_features =
        retained.at("final_features").get<std::vector<std::string>>();
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < processed.n_cols(); ++j) {
      for (const auto& name : final_features) {
        if (processed.spec(j).name == name) cols.push_back(j);
      }
    }
    uit::Dataset reduced = processed.select_columns(cols);
    uit::FeatureRanking reranking =
        uit::ranking_from_csv(uit::read_file(in + "/shap_ranking.csv"));
    uit::CausalStageResult result =
        uit::causal_stage(reduced, reranking, cfg);
    uit::write_causal_artifacts(result, args.out_dir, manifest);
    uit::RunArtifacts artifacts;
    artifacts.sweep = result.sweep;
    uit::emit_report(artifacts, args.out_dir, std::move(manifest));
    return 0;
  } catch (const std::exception& e) {
    return fail_manifest(manifest, "causal", e, args.out_dir);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Insider-trading analysis pipeline: boosted classification, Shapley "
      "attribution, feature decorrelation, and causal-forest treatment "
      "effects"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "Execute the full pipeline");
  run->add_option("--config", run_args.config_path, "Pipeline config JSON")
      ->required();
  run->add_option("--out", run_args.out_dir, "Output directory")->required();
  run->add_option("--seed", run_args.seed, "Override the master seed");
  run->add_option("--threads", run_args.threads, "Worker threads (0 = auto)");

  std::string synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", synth_spec, "Generator spec JSON")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  CommonArgs classify_args;
  auto* classify =
      app.add_subcommand("classify", "Preprocess, cross-validate, fit");
  classify->add_option("--config", classify_args.config_path,
                       "Pipeline config JSON")
      ->required();
  classify->add_option("--out", classify_args.out_dir, "Output directory")
      ->required();
  classify->add_option("--seed", classify_args.seed, "Override the master seed");
  classify->add_option("--threads", classify_args.threads, "Worker threads");

  CommonArgs shap_args;
  auto* shap = app.add_subcommand("shap", "Attribute the fitted model");
  shap->add_option("--config", shap_args.config_path, "Pipeline config JSON");
  shap->add_option("--in", shap_args.in_dir,
                   "Directory with classify outputs (default: --out)");
  shap->add_option("--out", shap_args.out_dir, "Output directory")->required();
  shap->add_option("--seed", shap_args.seed, "Override the master seed");
  shap->add_option("--threads", shap_args.threads, "Worker threads");

  CommonArgs deco_args;
  auto* deco = app.add_subcommand(
      "decorrelate", "Cluster, pick representatives, VIF filter, re-rank");
  deco->add_option("--config", deco_args.config_path, "Pipeline config JSON");
  deco->add_option("--in", deco_args.in_dir,
                   "Directory with classify+shap outputs (default: --out)");
  deco->add_option("--out", deco_args.out_dir, "Output directory")->required();
  deco->add_option("--seed", deco_args.seed, "Override the master seed");
  deco->add_option("--threads", deco_args.threads, "Worker threads");

  CommonArgs causal_args;
  auto* causal = app.add_subcommand(
      "causal", "Treatment sweep with honest forests and AIPW inference");
  causal->add_option("--config", causal_args.config_path,
                     "Pipeline config JSON");
  causal->add_option("--in", causal_args.in_dir,
                     "Directory with decorrelate outputs (default: --out)");
  causal->add_option("--out", causal_args.out_dir, "Output directory")
      ->required();
  causal->add_option("--seed", causal_args.seed, "Override the master seed");
  causal->add_option("--threads", causal_args.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*run) return cmd_run(run_args);
  if (*synth) return cmd_synth(synth_spec, synth_out);
  if (*classify) return cmd_classify(classify_args);
  if (*shap) return cmd_shap(shap_args);
  if (*deco) return cmd_decorrelate(deco_args);
  if (*causal) return cmd_causal(causal_args);
  return 1;
}
