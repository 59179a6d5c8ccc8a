#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "uit/dataset.hpp"
#include "uit/decorrelate.hpp"
#include "uit/gbtree.hpp"
#include "uit/rng.hpp"
#include "uit/synth.hpp"

using namespace uit;

namespace {

double column_correlation(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("null spec yields labels independent of features") {
  SynthSpec spec;
  spec.n_rows = 2000;
  spec.n_noise_features = 3;
  spec.blocks = {{2, 0.5}};
  spec.effects = {{"IsDirector", EffectPattern::Constant, 0.0, 0, 0, ""}};
  spec.confounding_strength = 0.0;
  spec.seed = 5;
  SynthData data = generate(spec);

  double prevalence = 0.0;
  for (std::size_t i = 0; i < data.dataset.n_rows(); ++i) {
    prevalence += data.dataset.label(i);
  }
  prevalence /= static_cast<double>(data.dataset.n_rows());
  CHECK(prevalence > 0.45);
  CHECK(prevalence < 0.55);

  std::vector<double> y(data.dataset.n_rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = data.dataset.label(i);
  for (std::size_t j = 0; j < data.dataset.n_cols(); ++j) {
    CHECK(std::abs(column_correlation(data.dataset.col(j), y)) < 0.06);
  }
}

TEST_CASE("correlation blocks land near the target rho") {
  SynthSpec spec;
  spec.n_rows = 2000;
  spec.n_noise_features = 0;
  spec.blocks = {{3, 0.9}};
  spec.seed = 6;
  SynthData data = generate(spec);
  // block columns follow the confounder column
  CorrelationMatrix corr = spearman(data.dataset);
  auto idx = [&](const std::string& name) {
    return *data.dataset.find_column(name);
  };
  std::vector<std::size_t> block = {idx("PriceBook"), idx("Return"),
                                    idx("ExcessReturns")};
  for (std::size_t i = 0; i < block.size(); ++i) {
    for (std::size_t j = i + 1; j < block.size(); ++j) {
      double rho = corr.rho[block[i]][block[j]];
      CHECK(rho > 0.8);
      CHECK(rho < 0.97);
      // Pearson on raw values should sit within 0.1 of the target
      double pearson = column_correlation(data.dataset.col(block[i]),
                                          data.dataset.col(block[j]));
      CHECK(std::abs(pearson - 0.9) < 0.1);
    }
  }
}

TEST_CASE("generation is bit-identical per seed") {
  SynthSpec spec;
  spec.n_rows = 300;
  spec.blocks = {{2, 0.4}};
  spec.effects = {{"IsDirector", EffectPattern::Constant, 1.0, 0, 0, ""}};
  spec.confounding_strength = 0.8;
  spec.seed = 7;
  SynthData a = generate(spec);
  SynthData b = generate(spec);
  CHECK(to_csv(a.dataset) == to_csv(b.dataset));
  CHECK(a.outcome == b.outcome);
  CHECK(ground_truth_to_json(a.truth) == ground_truth_to_json(b.truth));

  spec.seed = 8;
  SynthData c = generate(spec);
  CHECK(to_csv(a.dataset) != to_csv(c.dataset));
}

TEST_CASE("true_ate on a constant continuous effect is exact") {
  SynthSpec spec;
  spec.n_rows = 500;
  spec.outcome = OutcomeKind::Continuous;
  spec.effects = {{"IsDirector", EffectPattern::Constant, 2.0, 0, 0, ""}};
  spec.seed = 9;
  SynthData data = generate(spec);
  CHECK(true_ate(data.truth, "IsDirector") == 2.0);

  try {
    true_ate(data.truth, "NotAFeature");
    FAIL("expected UnknownTreatment");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownTreatment);
  }
}

TEST_CASE("two-group heterogeneity averages to the midpoint") {
  SynthSpec spec;
  spec.n_rows = 500;  // even, so the alternating subgroup is exactly balanced
  spec.outcome = OutcomeKind::Continuous;
  PlantedEffect effect;
  effect.feature = "IsDirector";
  effect.pattern = EffectPattern::TwoGroup;
  effect.tau_low = 0.0;
  effect.tau_high = 4.0;
  spec.effects = {effect};
  spec.seed = 10;
  SynthData data = generate(spec);
  CHECK(true_ate(data.truth, "IsDirector") == 2.0);

  auto seg = data.dataset.find_column("IsDirectorSegment");
  REQUIRE(seg.has_value());
  const auto& truth = data.truth.effects.at("IsDirector");
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    double expect = data.dataset.at(i, *seg) > 0 ? 4.0 : 0.0;
    CHECK(truth.tau[i] == expect);
  }
}

TEST_CASE("risk-difference truth matches a potential-outcomes simulation") {
  SynthSpec spec;
  spec.n_rows = 100000;
  spec.outcome = OutcomeKind::Logistic;
  spec.effects = {{"IsDirector", EffectPattern::Constant, 1.5, 0, 0, ""}};
  spec.confounding_strength = 0.7;
  spec.seed = 11;
  SynthData data = generate(spec);
  const auto& truth = data.truth.effects.at("IsDirector");

  // two-world brute force: draw both potential outcomes per row
  Rng rng(999);
  double diff = 0.0;
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    double p1 = sigmoid(truth.base[i] + truth.planted[i]);
    double p0 = sigmoid(truth.base[i]);
    int y1 = rng.bernoulli(p1) ? 1 : 0;
    int y0 = rng.bernoulli(p0) ? 1 : 0;
    diff += y1 - y0;
  }
  diff /= static_cast<double>(spec.n_rows);
  CHECK(std::abs(diff - true_ate(data.truth, "IsDirector")) < 0.02);
}

TEST_CASE("confounding knob controls treatment-outcome coupling") {
  {
    SynthSpec spec;
    spec.n_rows = 5000;
    spec.outcome = OutcomeKind::Continuous;
    spec.effects = {{"IsDirector", EffectPattern::Constant, 1.0, 0, 0, ""}};
    spec.confounding_strength = 0.0;
    spec.seed = 12;
    SynthData data = generate(spec);
    const auto& truth = data.truth.effects.at("IsDirector");
    std::vector<double> w(truth.w.begin(), truth.w.end());
    // assignment independent of the observed confounder
    std::size_t conf = *data.dataset.find_column("MarketBeta");
    CHECK(std::abs(column_correlation(w, data.dataset.col(conf))) < 0.05);
  }
  {
    SynthSpec spec;
    spec.n_rows = 5000;
    spec.outcome = OutcomeKind::Continuous;
    spec.effects = {{"IsDirector", EffectPattern::Constant, 1.0, 0, 0, ""}};
    spec.confounding_strength = 1.0;
    spec.seed = 13;
    SynthData data = generate(spec);
    const auto& truth = data.truth.effects.at("IsDirector");
    std::vector<double> w(truth.w.begin(), truth.w.end());
    CHECK(column_correlation(w, truth.base) > 0.2);
    std::size_t conf = *data.dataset.find_column("MarketBeta");
    CHECK(column_correlation(w, data.dataset.col(conf)) > 0.2);

    // naive difference in means is biased away from the planted effect
    double m1 = 0.0;
    double m0 = 0.0;
    std::size_t n1 = 0;
    std::size_t n0 = 0;
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
      if (truth.w[i]) {
        m1 += data.outcome[i];
        ++n1;
      } else {
        m0 += data.outcome[i];
        ++n0;
      }
    }
    double naive = m1 / n1 - m0 / n0;
    CHECK(std::abs(naive - 1.0) > 0.25);
  }
}

TEST_CASE("threshold outcome is separable on the confounder") {
  SynthSpec spec;
  spec.n_rows = 1000;
  spec.outcome = OutcomeKind::Threshold;
  spec.confounding_strength = 1.0;  // index = confounder
  spec.n_noise_features = 2;
  spec.seed = 14;
  SynthData data = generate(spec);
  std::size_t conf = *data.dataset.find_column("MarketBeta");
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    CHECK(data.dataset.label(i) == (data.dataset.at(i, conf) > 0 ? 1 : 0));
  }
}

TEST_CASE("spec json round-trips") {
  SynthSpec spec;
  spec.n_rows = 777;
  spec.outcome = OutcomeKind::Continuous;
  spec.blocks = {{3, 0.8}, {2, 0.5}};
  PlantedEffect two_group;
  two_group.feature = "IsOfficer";
  two_group.pattern = EffectPattern::TwoGroup;
  two_group.tau_low = -1.0;
  two_group.tau_high = 3.0;
  spec.effects = {{"IsDirector", EffectPattern::Constant, 2.0, 0, 0, ""},
                  two_group};
  spec.confounding_strength = 0.9;
  spec.seed = 15;
  SynthSpec loaded = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(synth_spec_to_json(loaded) == synth_spec_to_json(spec));

  SynthSpec bad;
  bad.n_rows = 10;  // below the minimum
  CHECK_THROWS_AS(generate(bad), Error);
}
