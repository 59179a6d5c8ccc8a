#include "uit/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "uit/gbtree.hpp"
#include "uit/rng.hpp"
#include "uit/textio.hpp"

namespace uit {

namespace {

const char* kBlockNamePool[] = {
    "PriceBook",     "Return",        "ExcessReturns", "PriceSales",
    "TotalVolatility", "SMBBeta",     "HMLBeta",       "CurrentRatio",
    "AssetTurnover", "ReturnOnEquity", "OperatingMargin",
    "PriceOperatingEarnings", "SpreadReturn", "MarketReturn",
    "ShillerIndex",  "TrailingPEG",
};
constexpr std::size_t kBlockNamePoolSize =
    sizeof(kBlockNamePool) / sizeof(kBlockNamePool[0]);

void validate(const SynthSpec& spec) {
  if (spec.n_rows < 100) fail(Errc::InvalidSpec, "n_rows must be >= 100");
  if (spec.n_noise_features < 0) fail(Errc::InvalidSpec, "negative noise count");
  if (spec.confounding_strength < 0.0) {
    fail(Errc::InvalidSpec, "confounding_strength must be >= 0");
  }
  for (const auto& b : spec.blocks) {
    if (b.size < 1) fail(Errc::InvalidSpec, "block size must be >= 1");
    if (b.rho < 0.0 || b.rho >= 1.0) {
      fail(Errc::InvalidSpec, "block rho outside [0, 1)");
    }
  }
  for (const auto& e : spec.effects) {
    if (e.feature.empty()) fail(Errc::InvalidSpec, "effect without feature name");
  }
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_rows;

  std::vector<FeatureSpec> specs;
  std::vector<std::vector<double>> values;
  auto add_column = [&](const std::string& name, std::vector<double> v,
                        bool indicator) {
    FeatureSpec s;
    s.name = name;
    s.indicator = indicator;
    specs.push_back(std::move(s));
    values.push_back(std::move(v));
  };

  // observed confounder; drives both treatment flags and the outcome
  std::vector<double> confounder(n);
  {
    Rng rng(derive_seed(spec.seed, "synth.confounder"));
    for (auto& v : confounder) v = rng.normal();
  }
  add_column("MarketBeta", confounder, false);

  // block-correlated covariates
  std::size_t name_cursor = 0;
  auto next_name = [&](int block, int member) {
    if (name_cursor < kBlockNamePoolSize) {
      return std::string(kBlockNamePool[name_cursor++]);
    }
    return "Factor" + std::to_string(block) + "_" + std::to_string(member);
  };
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    std::vector<double> shared(n);
    {
      Rng rng(derive_seed(spec.seed, "synth.block" + std::to_string(b)));
      for (auto& v : shared) v = rng.normal();
    }
    double w_shared = std::sqrt(block.rho);
    double w_own = std::sqrt(1.0 - block.rho);
    for (int j = 0; j < block.size; ++j) {
      Rng rng(derive_seed(spec.seed, "synth.block" + std::to_string(b) +
                                         ".member" + std::to_string(j)));
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = w_shared * shared[i] + w_own * rng.normal();
      }
      add_column(next_name(static_cast<int>(b), j), std::move(col), false);
    }
  }

  // treatment flags, confounded through the observed confounder
  GroundTruth truth;
  truth.outcome = spec.outcome;
  std::vector<std::vector<int>> flags(spec.effects.size());
  std::vector<std::vector<double>> taus(spec.effects.size());
  for (std::size_t e = 0; e < spec.effects.size(); ++e) {
    const auto& effect = spec.effects[e];
    Rng rng(derive_seed(spec.seed, "synth.flag." + effect.feature));
    std::vector<int> w(n);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      double p = sigmoid(spec.confounding_strength * confounder[i]);
      w[i] = rng.bernoulli(p) ? 1 : 0;
      col[i] = w[i];
    }
    add_column(effect.feature, std::move(col), true);

    std::vector<double> tau(n, effect.tau);
    if (effect.pattern == EffectPattern::TwoGroup) {
      std::vector<int> group(n);
      std::string mod_name = effect.modifier;
      if (mod_name.empty()) {
        // balanced deterministic subgroup indicator; exact 50/50 at even n
        mod_name = effect.feature + "Segment";
        std::vector<double> seg(n);
        for (std::size_t i = 0; i < n; ++i) {
          group[i] = static_cast<int>(i % 2);
          seg[i] = group[i];
        }
        add_column(mod_name, std::move(seg), true);
      } else {
        bool found = false;
        for (std::size_t j = 0; j < specs.size(); ++j) {
          if (specs[j].name == mod_name) {
            for (std::size_t i = 0; i < n; ++i) {
              group[i] = values[j][i] > 0.0 ? 1 : 0;
            }
            found = true;
            break;
          }
        }
        if (!found) {
          fail(Errc::InvalidSpec, "modifier not generated yet: " + mod_name);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        tau[i] = group[i] ? effect.tau_high : effect.tau_low;
      }
    }
    flags[e] = std::move(w);
    taus[e] = std::move(tau);
  }

  for (int j = 0; j < spec.n_noise_features; ++j) {
    Rng rng(derive_seed(spec.seed, "synth.noise" + std::to_string(j)));
    std::vector<double> col(n);
    for (auto& v : col) v = rng.normal();
    add_column("Noise" + std::to_string(j + 1), std::move(col), false);
  }

  // latent index and outcome
  std::vector<double> index(n, spec.baseline_intercept);
  for (std::size_t i = 0; i < n; ++i) {
    index[i] += spec.confounding_strength * confounder[i];
  }
  for (std::size_t e = 0; e < spec.effects.size(); ++e) {
    for (std::size_t i = 0; i < n; ++i) {
      if (flags[e][i]) index[i] += taus[e][i];
    }
  }

  std::vector<double> outcome(n);
  std::vector<int> labels(n);
  Rng outcome_rng(derive_seed(spec.seed, "synth.outcome"));
  switch (spec.outcome) {
    case OutcomeKind::Logistic:
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = outcome_rng.bernoulli(sigmoid(index[i])) ? 1 : 0;
        outcome[i] = labels[i];
      }
      break;
    case OutcomeKind::Threshold:
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = index[i] > 0.0 ? 1 : 0;
        outcome[i] = labels[i];
      }
      break;
    case OutcomeKind::Continuous:
      for (std::size_t i = 0; i < n; ++i) {
        outcome[i] = index[i] + spec.outcome_noise * outcome_rng.normal();
        labels[i] = outcome[i] > 0.0 ? 1 : 0;
      }
      break;
  }

  // per-row true effects on the outcome scale
  for (std::size_t e = 0; e < spec.effects.size(); ++e) {
    EffectTruth et;
    et.w = flags[e];
    et.tau.resize(n);
    et.base.resize(n);
    et.planted = taus[e];
    for (std::size_t i = 0; i < n; ++i) {
      double with = index[i] + (flags[e][i] ? 0.0 : taus[e][i]);
      double without = index[i] - (flags[e][i] ? taus[e][i] : 0.0);
      et.base[i] = without;
      switch (spec.outcome) {
        case OutcomeKind::Logistic:
          et.tau[i] = sigmoid(with) - sigmoid(without);
          break;
        case OutcomeKind::Threshold:
          et.tau[i] = (with > 0.0 ? 1.0 : 0.0) - (without > 0.0 ? 1.0 : 0.0);
          break;
        case OutcomeKind::Continuous:
          et.tau[i] = taus[e][i];
          break;
      }
    }
    truth.effects[spec.effects[e].feature] = std::move(et);
  }

  SynthData out{Dataset(std::move(specs), std::move(values), std::move(labels)),
                std::move(outcome), std::move(truth)};
  return out;
}

double true_ate(const GroundTruth& truth, const std::string& feature) {
  auto it = truth.effects.find(feature);
  if (it == truth.effects.end()) fail(Errc::UnknownTreatment, feature);
  const auto& tau = it->second.tau;
  double acc = 0.0;
  for (double t : tau) acc += t;
  return acc / static_cast<double>(tau.size());
}

namespace {

OutcomeKind outcome_from_string(const std::string& s) {
  if (s == "logistic") return OutcomeKind::Logistic;
  if (s == "threshold") return OutcomeKind::Threshold;
  if (s == "continuous") return OutcomeKind::Continuous;
  fail(Errc::InvalidSpec, "unknown outcome kind: " + s);
}

std::string outcome_to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Logistic: return "logistic";
    case OutcomeKind::Threshold: return "threshold";
    case OutcomeKind::Continuous: return "continuous";
  }
  return "logistic";
}

}  // namespace

SynthSpec synth_spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SynthSpec spec;
  spec.n_rows = j.value("n_rows", std::uint64_t{1000});
  spec.n_noise_features = j.value("n_noise_features", 4);
  spec.confounding_strength = j.value("confounding_strength", 0.0);
  spec.outcome = outcome_from_string(j.value("outcome", std::string("logistic")));
  spec.outcome_noise = j.value("outcome_noise", 1.0);
  spec.baseline_intercept = j.value("baseline_intercept", 0.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("blocks")) {
    for (const auto& b : j["blocks"]) {
      spec.blocks.push_back(
          {b.at("size").get<int>(), b.at("rho").get<double>()});
    }
  }
  if (j.contains("effects")) {
    for (const auto& e : j["effects"]) {
      PlantedEffect pe;
      pe.feature = e.at("feature").get<std::string>();
      std::string pattern = e.value("pattern", std::string("constant"));
      if (pattern == "constant") {
        pe.pattern = EffectPattern::Constant;
        pe.tau = e.value("tau", 0.0);
      } else if (pattern == "two_group") {
        pe.pattern = EffectPattern::TwoGroup;
        pe.tau_low = e.value("tau_low", 0.0);
        pe.tau_high = e.value("tau_high", 0.0);
        pe.modifier = e.value("modifier", std::string());
      } else {
        fail(Errc::InvalidSpec, "unknown effect pattern: " + pattern);
      }
      spec.effects.push_back(std::move(pe));
    }
  }
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  nlohmann::json j;
  j["n_rows"] = spec.n_rows;
  j["n_noise_features"] = spec.n_noise_features;
  j["confounding_strength"] = spec.confounding_strength;
  j["outcome"] = outcome_to_string(spec.outcome);
  j["outcome_noise"] = spec.outcome_noise;
  j["baseline_intercept"] = spec.baseline_intercept;
  j["seed"] = spec.seed;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : spec.blocks) {
    blocks.push_back({{"size", b.size}, {"rho", b.rho}});
  }
  j["blocks"] = std::move(blocks);
  nlohmann::json effects = nlohmann::json::array();
  for (const auto& e : spec.effects) {
    nlohmann::json ej;
    ej["feature"] = e.feature;
    if (e.pattern == EffectPattern::Constant) {
      ej["pattern"] = "constant";
      ej["tau"] = e.tau;
    } else {
      ej["pattern"] = "two_group";
      ej["tau_low"] = e.tau_low;
      ej["tau_high"] = e.tau_high;
      if (!e.modifier.empty()) ej["modifier"] = e.modifier;
    }
    effects.push_back(std::move(ej));
  }
  j["effects"] = std::move(effects);
  return j.dump(2) + "\n";
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["outcome"] = outcome_to_string(truth.outcome);
  nlohmann::json effects;
  for (const auto& [name, et] : truth.effects) {
    nlohmann::json ej;
    ej["w"] = et.w;
    ej["tau"] = et.tau;
    double mean = 0.0;
    for (double t : et.tau) mean += t;
    ej["true_ate"] = mean / static_cast<double>(et.tau.size());
    effects[name] = std::move(ej);
  }
  j["effects"] = std::move(effects);
  return j.dump(2) + "\n";
}

}  // namespace uit
