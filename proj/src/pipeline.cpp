#include "uit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <tuple>

#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

PipelineConfig::PipelineConfig() {
  // classifier defaults; the cross-validation scheme itself is fixed at
  // k=5 with early stopping
  boost.max_trees = 500;
  boost.max_depth = 6;
  boost.learning_rate = 0.1;
  boost.min_child_weight = 1.0;
  boost.l2_lambda = 1.0;
  boost.early_stopping_rounds = 50;
  // causal forest defaults
  forest.n_trees = 1000;
  forest.max_depth = 10;
  forest.honest_fraction = 0.8;
  forest.subsample_fraction = 0.5;
  forest.min_leaf = 5;
  forest.quantile_grid = 64;
  // nuisance models are smaller by default
  nuisance_boost.max_trees = 100;
  nuisance_boost.max_depth = 4;
  nuisance_boost.learning_rate = 0.2;
  nuisance_boost.early_stopping_rounds = 10;
}

namespace {

BoostConfig boost_from_json(const nlohmann::json& j, BoostConfig base) {
  base.max_trees = j.value("max_trees", base.max_trees);
  base.max_depth = j.value("max_depth", base.max_depth);
  base.learning_rate = j.value("learning_rate", base.learning_rate);
  base.min_child_weight = j.value("min_child_weight", base.min_child_weight);
  base.l2_lambda = j.value("l2_lambda", base.l2_lambda);
  base.early_stopping_rounds =
      j.value("early_stopping_rounds", base.early_stopping_rounds);
  return base;
}

nlohmann::json boost_to_json(const BoostConfig& b) {
  nlohmann::json j;
  j["max_trees"] = b.max_trees;
  j["max_depth"] = b.max_depth;
  j["learning_rate"] = b.learning_rate;
  j["min_child_weight"] = b.min_child_weight;
  j["l2_lambda"] = b.l2_lambda;
  j["early_stopping_rounds"] = b.early_stopping_rounds;
  return j;
}

Linkage linkage_from_string(const std::string& s) {
  if (s == "single") return Linkage::Single;
  if (s == "complete") return Linkage::Complete;
  if (s == "average") return Linkage::Average;
  fail(Errc::InvalidSpec, "unknown linkage: " + s);
}

std::string linkage_to_string(Linkage l) {
  switch (l) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    default: return "average";
  }
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  if (j.contains("data")) {
    DataSource src;
    src.csv = j["data"].at("csv").get<std::string>();
    src.schema = j["data"].at("schema").get<std::string>();
    src.label_column = j["data"].value("label_column", std::string("label"));
    cfg.data = std::move(src);
  }
  if (j.contains("synth")) {
    cfg.synth = synth_spec_from_json(j["synth"].dump());
  }
  cfg.balance = j.value("balance", cfg.balance);
  cfg.folds = j.value("folds", cfg.folds);
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  if (j.contains("boost")) cfg.boost = boost_from_json(j["boost"], cfg.boost);
  if (j.contains("shap")) {
    cfg.shap_threshold = j["shap"].value("threshold", cfg.shap_threshold);
    cfg.shap_background_cap =
        j["shap"].value("background_cap", cfg.shap_background_cap);
  }
  if (j.contains("cluster")) {
    cfg.cluster_distance_threshold =
        j["cluster"].value("distance_threshold", cfg.cluster_distance_threshold);
    cfg.cluster_linkage = linkage_from_string(
        j["cluster"].value("linkage", std::string("average")));
  }
  if (j.contains("vif")) {
    cfg.vif_threshold = j["vif"].value("threshold", cfg.vif_threshold);
  }
  std::string order = j.value("decorrelate_order", std::string("cluster_then_vif"));
  if (order == "cluster_then_vif") {
    cfg.decorrelate_order = DecorrelateOrder::ClusterThenVif;
  } else if (order == "vif_then_cluster") {
    cfg.decorrelate_order = DecorrelateOrder::VifThenCluster;
  } else {
    fail(Errc::InvalidSpec, "unknown decorrelate_order: " + order);
  }
  if (j.contains("causal")) {
    const auto& c = j["causal"];
    cfg.forest.n_trees = c.value("trees", cfg.forest.n_trees);
    cfg.forest.max_depth = c.value("max_depth", cfg.forest.max_depth);
    cfg.forest.honest_fraction =
        c.value("honest_fraction", cfg.forest.honest_fraction);
    cfg.forest.subsample_fraction =
        c.value("subsample_fraction", cfg.forest.subsample_fraction);
    cfg.forest.min_leaf = c.value("min_leaf", cfg.forest.min_leaf);
    cfg.forest.quantile_grid = c.value("quantile_grid", cfg.forest.quantile_grid);
    cfg.causal_k_folds = c.value("k_folds", cfg.causal_k_folds);
    cfg.propensity_clip = c.value("clip", cfg.propensity_clip);
    if (c.contains("nuisance")) {
      cfg.nuisance_boost = boost_from_json(c["nuisance"], cfg.nuisance_boost);
    }
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  if (cfg.data) {
    j["data"] = {{"csv", cfg.data->csv},
                 {"schema", cfg.data->schema},
                 {"label_column", cfg.data->label_column}};
  }
  if (cfg.synth) {
    j["synth"] = nlohmann::json::parse(synth_spec_to_json(*cfg.synth));
  }
  j["balance"] = cfg.balance;
  j["folds"] = cfg.folds;
  j["test_fraction"] = cfg.test_fraction;
  j["boost"] = boost_to_json(cfg.boost);
  j["shap"] = {{"threshold", cfg.shap_threshold},
               {"background_cap", cfg.shap_background_cap}};
  j["cluster"] = {{"distance_threshold", cfg.cluster_distance_threshold},
                  {"linkage", linkage_to_string(cfg.cluster_linkage)}};
  j["vif"] = {{"threshold", cfg.vif_threshold}};
  j["decorrelate_order"] =
      cfg.decorrelate_order == DecorrelateOrder::ClusterThenVif
          ? "cluster_then_vif"
          : "vif_then_cluster";
  j["causal"] = {{"trees", cfg.forest.n_trees},
                 {"max_depth", cfg.forest.max_depth},
                 {"honest_fraction", cfg.forest.honest_fraction},
                 {"subsample_fraction", cfg.forest.subsample_fraction},
                 {"min_leaf", cfg.forest.min_leaf},
                 {"quantile_grid", cfg.forest.quantile_grid},
                 {"k_folds", cfg.causal_k_folds},
                 {"clip", cfg.propensity_clip},
                 {"nuisance", boost_to_json(cfg.nuisance_boost)}};
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j;
}

PipelineConfig load_config(const std::string& path) {
  return config_from_json(nlohmann::json::parse(read_file(path)));
}

// --- stages -------------------------------------------------------------

Dataset resolve_input(const PipelineConfig& cfg, const std::string& out_dir,
                      Manifest* manifest) {
  if (cfg.data && cfg.synth) {
    fail(Errc::InvalidSpec, "config declares both data and synth sources");
  }
  if (cfg.data) {
    auto schema = load_schema(cfg.data->schema);
    return ingest_csv(cfg.data->csv, schema, cfg.data->label_column);
  }
  if (cfg.synth) {
    SynthData synth = generate(*cfg.synth);
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      emit_csv(synth.dataset, out_dir + "/data.csv");
      save_schema(synth.dataset.specs(), out_dir + "/data_schema.json");
      write_file(out_dir + "/ground_truth.json",
                 ground_truth_to_json(synth.truth));
      if (manifest) {
        manifest_add_file(*manifest, "data", out_dir, "data.csv");
        manifest_add_file(*manifest, "data_schema", out_dir,
                          "data_schema.json");
        manifest_add_file(*manifest, "ground_truth", out_dir,
                          "ground_truth.json");
      }
    }
    return synth.dataset;
  }
  fail(Errc::MissingInput, "config has neither data nor synth source");
}

ClassifyResult classify_stage(const Dataset& raw, const PipelineConfig& cfg) {
  Dataset encoded = encode_onehot(raw);
  Dataset balanced = cfg.balance
                         ? balanced_subsample(
                               encoded, derive_seed(cfg.seed, "stage.balance"))
                         : encoded;
  auto [processed, norm] = normalize(balanced);

  ClassifyResult result{std::move(processed), std::move(norm), {}, {}, {}, {}, {}};
  result.folds =
      make_folds(result.processed, cfg.folds, derive_seed(cfg.seed, "stage.folds"));
  BoostConfig bcfg = cfg.boost;
  bcfg.seed = derive_seed(cfg.seed, "stage.boost");
  result.cv = cross_validate(result.processed, result.folds, bcfg);

  // single stratified holdout for attribution after the CV metrics
  std::tie(result.train_rows, result.test_rows) =
      stratified_split(result.processed.labels(), cfg.test_fraction,
                       derive_seed(cfg.seed, "stage.split"));
  Dataset train = result.processed.select_rows(result.train_rows);
  auto [fit_rows, es_rows] = stratified_split(
      train.labels(), 0.2, derive_seed(cfg.seed, "stage.boost.es"));
  result.model =
      fit(train.select_rows(fit_rows), train.select_rows(es_rows), bcfg);
  return result;
}

ShapResult shap_stage(const Dataset& processed, const TreeEnsemble& model,
                      const std::vector<std::size_t>& test_rows,
                      const PipelineConfig& cfg) {
  Dataset test = processed.select_rows(test_rows);
  ShapConfig scfg;
  scfg.background_cap = cfg.shap_background_cap;
  scfg.seed = derive_seed(cfg.seed, "stage.shap");
  scfg.threads = cfg.threads;
  ShapResult result;
  result.shap = shap_tree(model, test, test, scfg);
  result.ranking = rank_features(result.shap, cfg.shap_threshold);
  return result;
}

namespace {

// refit + re-rank on a reduced feature set, reusing the classify split
std::tuple<TreeEnsemble, ShapMatrix, FeatureRanking> rerank_on(
    const Dataset& reduced, const std::vector<std::size_t>& train_rows,
    const std::vector<std::size_t>& test_rows, const PipelineConfig& cfg) {
  BoostConfig bcfg = cfg.boost;
  bcfg.seed = derive_seed(cfg.seed, "stage.rerank.boost");
  Dataset train = reduced.select_rows(train_rows);
  auto [fit_rows, es_rows] = stratified_split(
      train.labels(), 0.2, derive_seed(cfg.seed, "stage.rerank.es"));
  TreeEnsemble model =
      fit(train.select_rows(fit_rows), train.select_rows(es_rows), bcfg);
  Dataset test = reduced.select_rows(test_rows);
  ShapConfig scfg;
  scfg.background_cap = cfg.shap_background_cap;
  scfg.seed = derive_seed(cfg.seed, "stage.rerank.shap");
  scfg.threads = cfg.threads;
  ShapMatrix shap = shap_tree(model, test, test, scfg);
  FeatureRanking ranking = rank_features(shap, cfg.shap_threshold);
  return {std::move(model), std::move(shap), std::move(ranking)};
}

std::vector<std::size_t> columns_in_order(const Dataset& ds,
                                          const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < ds.n_cols(); ++j) {
    if (std::find(names.begin(), names.end(), ds.spec(j).name) != names.end()) {
      cols.push_back(j);
    }
  }
  return cols;
}

}  // namespace

DecorrelateResult decorrelate_stage(const Dataset& processed,
                                    const FeatureRanking& ranking,
                                    const std::vector<std::size_t>& train_rows,
                                    const std::vector<std::size_t>& test_rows,
                                    const PipelineConfig& cfg) {
  DecorrelateResult result;
  result.corr = spearman(processed);

  if (cfg.decorrelate_order == DecorrelateOrder::ClusterThenVif) {
    result.clusters = cluster_features(result.corr,
                                       cfg.cluster_distance_threshold,
                                       cfg.cluster_linkage);
    result.representatives =
        select_representatives(result.clusters, result.corr, ranking);
    Dataset after_cluster =
        processed.select_columns(columns_in_order(processed, result.representatives));
    auto [filtered, vif] = vif_filter(after_cluster, cfg.vif_threshold);
    result.vif = std::move(vif);
    result.final_features = filtered.feature_names();
    result.reduced = std::move(filtered);
  } else {
    auto [filtered, vif] = vif_filter(processed, cfg.vif_threshold);
    result.vif = std::move(vif);
    CorrelationMatrix corr2 = spearman(filtered);
    result.clusters = cluster_features(corr2, cfg.cluster_distance_threshold,
                                       cfg.cluster_linkage);
    result.representatives =
        select_representatives(result.clusters, corr2, ranking);
    result.final_features = result.representatives;
    result.reduced =
        filtered.select_columns(columns_in_order(filtered, result.representatives));
  }

  std::tie(result.reduced_model, result.reduced_shap, result.reranking) =
      rerank_on(result.reduced, train_rows, test_rows, cfg);
  return result;
}

CausalStageResult causal_stage(const Dataset& reduced,
                               const FeatureRanking& reranking,
                               const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, double>> treatments;
  for (const auto& e : reranking.entries) {
    if (e.mean_abs_shap > reranking.threshold &&
        reduced.find_column(e.name)) {
      treatments.emplace_back(e.name, e.mean_abs_shap);
    }
  }
  SweepConfig scfg;
  scfg.nuisance.propensity = cfg.nuisance_boost;
  scfg.nuisance.propensity.objective = Objective::Logistic;
  scfg.nuisance.outcome = cfg.nuisance_boost;
  scfg.nuisance.clip = cfg.propensity_clip;
  scfg.forest = cfg.forest;
  scfg.forest.threads = cfg.threads;
  scfg.k_folds = cfg.causal_k_folds;
  scfg.seed = derive_seed(cfg.seed, "stage.causal");

  std::vector<double> y(reduced.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<double>(reduced.label(i));
  }
  CausalStageResult result;
  result.sweep = treatment_sweep(reduced, y, treatments, scfg);
  return result;
}

// --- artifact writers ---------------------------------------------------

void save_split(const std::vector<std::size_t>& train,
                const std::vector<std::size_t>& test, const std::string& path) {
  nlohmann::json j;
  j["train"] = train;
  j["test"] = test;
  write_file(path, j.dump(2) + "\n");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> load_split(
    const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  return {j.at("train").get<std::vector<std::size_t>>(),
          j.at("test").get<std::vector<std::size_t>>()};
}

FeatureRanking ranking_from_csv(const std::string& text) {
  FeatureRanking ranking;
  ranking.threshold = 0.0;
  std::vector<std::string> lines = split_line(text, '\n');
  bool threshold_set = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = split_line(lines[i]);
    if (cells.size() != 4) fail(Errc::UnparseableValue, "ranking row " + lines[i]);
    bool ok = false;
    double mean = parse_double(cells[2], ok);
    if (!ok) fail(Errc::UnparseableValue, "ranking value " + cells[2]);
    ranking.entries.push_back({cells[1], mean});
    // recover the retention threshold from the retained flags: it sits
    // between the lowest retained and highest dropped mean
    if (cells[3] == "0" && !threshold_set) {
      ranking.threshold = mean;
      threshold_set = true;
    }
  }
  return ranking;
}

namespace {

void write_text_artifact(Manifest& manifest, const std::string& out_dir,
                         const std::string& name, const std::string& filename,
                         const std::string& content) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/" + filename, content);
  manifest.artifacts.push_back({name, filename, fnv1a64_hex(content)});
}

}  // namespace

void write_classify_artifacts(const ClassifyResult& r,
                              const std::string& out_dir, Manifest& manifest) {
  write_text_artifact(manifest, out_dir, "processed", "processed.csv",
                      to_csv(r.processed));
  save_schema(r.processed.specs(), out_dir + "/processed_schema.json");
  manifest_add_file(manifest, "processed_schema", out_dir,
                    "processed_schema.json");
  nlohmann::json norm = nlohmann::json::array();
  for (const auto& e : r.norm.entries) {
    norm.push_back({{"name", e.name}, {"mu", e.mu}, {"sigma", e.sigma}});
  }
  write_text_artifact(manifest, out_dir, "norm_params", "norm_params.json",
                      norm.dump(2) + "\n");
  save_split(r.train_rows, r.test_rows, out_dir + "/split.json");
  manifest_add_file(manifest, "split", out_dir, "split.json");
  write_text_artifact(manifest, out_dir, "model", "model.json",
                      ensemble_to_json(r.model));
}

void write_shap_artifacts(const ShapResult& r, const std::string& out_dir,
                          Manifest& manifest) {
  write_text_artifact(manifest, out_dir, "shap_values", "shap_values.csv",
                      shap_matrix_to_csv(r.shap));
  write_text_artifact(manifest, out_dir, "shap_meta", "shap_meta.json",
                      shap_sidecar_json(r.shap));
  write_text_artifact(manifest, out_dir, "shap_ranking_initial",
                      "shap_ranking_initial.csv", ranking_to_csv(r.ranking));
}

void write_decorrelate_artifacts(const DecorrelateResult& r,
                                 const std::string& out_dir,
                                 Manifest& manifest) {
  write_text_artifact(manifest, out_dir, "correlation", "correlation.csv",
                      correlation_to_csv(r.corr));
  nlohmann::json retained;
  retained["representatives"] = r.representatives;
  retained["final_features"] = r.final_features;
  write_text_artifact(manifest, out_dir, "retained", "retained.json",
                      retained.dump(2) + "\n");
  write_text_artifact(manifest, out_dir, "model_reduced", "model_reduced.json",
                      ensemble_to_json(r.reduced_model));
  write_text_artifact(manifest, out_dir, "shap_reduced_values",
                      "shap_reduced_values.csv",
                      shap_matrix_to_csv(r.reduced_shap));
  write_text_artifact(manifest, out_dir, "shap_reduced_meta",
                      "shap_reduced_meta.json",
                      shap_sidecar_json(r.reduced_shap));
}

void write_causal_artifacts(const CausalStageResult& r,
                            const std::string& out_dir, Manifest& manifest) {
  write_text_artifact(manifest, out_dir, "ate_table_json", "ate_table.json",
                      ate_table_json(r.sweep));
}

Manifest run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
  Manifest manifest;
  manifest.stage = "run";
  manifest.master_seed = cfg.seed;
  manifest.config = config_to_json(cfg);
  for (const char* tag :
       {"stage.balance", "stage.folds", "stage.boost", "stage.split",
        "stage.shap", "stage.rerank.boost", "stage.rerank.shap",
        "stage.causal"}) {
    manifest.stage_seeds[tag] = derive_seed(cfg.seed, tag);
  }

  std::string current = "ingest";
  try {
    Dataset raw = resolve_input(cfg, out_dir, &manifest);

    current = "classify";
    ClassifyResult classify = classify_stage(raw, cfg);
    write_classify_artifacts(classify, out_dir, manifest);

    current = "shap";
    ShapResult shap =
        shap_stage(classify.processed, classify.model, classify.test_rows, cfg);
    write_shap_artifacts(shap, out_dir, manifest);

    current = "decorrelate";
    DecorrelateResult deco =
        decorrelate_stage(classify.processed, shap.ranking,
                          classify.train_rows, classify.test_rows, cfg);
    write_decorrelate_artifacts(deco, out_dir, manifest);

    current = "causal";
    CausalStageResult causal =
        causal_stage(deco.reduced, deco.reranking, cfg);
    write_causal_artifacts(causal, out_dir, manifest);

    current = "report";
    RunArtifacts artifacts;
    artifacts.cv_folds = classify.cv.folds;
    artifacts.cv_mean = classify.cv.mean;
    artifacts.ranking = deco.reranking;
    Dataset reduced_test = deco.reduced.select_rows(classify.test_rows);
    artifacts.shap = &deco.reduced_shap;
    artifacts.raw = &reduced_test;
    artifacts.dendrogram = deco.clusters.dendrogram;
    artifacts.vif = deco.vif;
    artifacts.sweep = causal.sweep;
    return emit_report(artifacts, out_dir, std::move(manifest));
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.failed_stage = current;
    manifest.error = e.what();
    write_manifest(manifest, out_dir);
    throw;
  }
}

}  // namespace uit
