#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uit/dataset.hpp"

namespace uit {

/// How the synthetic outcome is produced from the latent index.
///   Logistic:  Y ~ Bernoulli(sigmoid(index)); per-row true effects are
///              risk differences.
///   Threshold: Y = [index > 0], deterministic; yields separable data.
///   Continuous: Y = index + noise; per-row true effects equal the planted
///              values, which lets tests plant effects outside [-1, 1].
enum class OutcomeKind { Logistic, Threshold, Continuous };

enum class EffectPattern { Constant, TwoGroup };

/// A governance-style binary flag with a causal effect on the outcome.
/// Flags are confounded through the observed confounder feature, so naive
/// group contrasts are biased while adjustment can recover the truth.
struct PlantedEffect {
  std::string feature;
  EffectPattern pattern = EffectPattern::Constant;
  double tau = 0.0;       // Constant
  double tau_low = 0.0;   // TwoGroup: subgroup 0
  double tau_high = 0.0;  // TwoGroup: subgroup 1
  /// TwoGroup subgroup indicator. Empty means a balanced alternating flag
  /// named "<feature>Segment" is generated.
  std::string modifier;
};

struct CorrelationBlock {
  int size = 1;
  double rho = 0.0;  // within-block correlation, [0, 1)
};

struct SynthSpec {
  std::size_t n_rows = 1000;
  int n_noise_features = 4;
  std::vector<PlantedEffect> effects;
  double confounding_strength = 0.0;
  std::vector<CorrelationBlock> blocks;
  OutcomeKind outcome = OutcomeKind::Logistic;
  double outcome_noise = 1.0;     // Continuous only
  double baseline_intercept = 0.0;
  std::uint64_t seed = 0;
};

struct EffectTruth {
  std::vector<int> w;          // realized flag per row
  std::vector<double> tau;     // per-row true effect on the outcome scale
  /// Latent index excluding this effect's own contribution; lets tests
  /// simulate both potential outcomes directly.
  std::vector<double> base;
  std::vector<double> planted;  // per-row planted effect on the index scale
};

struct GroundTruth {
  OutcomeKind outcome = OutcomeKind::Logistic;
  std::map<std::string, EffectTruth> effects;
};

struct SynthData {
  Dataset dataset;              // labels: binary outcome (Continuous: Y > 0)
  std::vector<double> outcome;  // the modeled Y, binary or continuous
  GroundTruth truth;
};

/// Draws block-correlated Gaussian features, confounded binary flags, and an
/// outcome with the planted effects. Bit-identical output per seed; every
/// generated entity uses its own derived stream so draws never interleave.
SynthData generate(const SynthSpec& spec);

/// Mean per-row true effect for one planted treatment.
double true_ate(const GroundTruth& truth, const std::string& feature);

SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);
std::string ground_truth_to_json(const GroundTruth& truth);

}  // namespace uit
