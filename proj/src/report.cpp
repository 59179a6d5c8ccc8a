#include "uit/report.hpp"

#include "uit/textio.hpp"

namespace uit {

ConfusionMatrix confusion(const std::vector<int>& labels,
                          const std::vector<double>& probabilities,
                          double threshold) {
  if (labels.size() != probabilities.size()) {
    fail(Errc::LengthMismatch, "labels vs predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool predicted_positive = probabilities[i] >= threshold;
    if (labels[i] == 1) {
      (predicted_positive ? cm.tp : cm.fn)++;
    } else {
      (predicted_positive ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

MetricSet metrics(const ConfusionMatrix& cm) {
  if (cm.n() == 0) fail(Errc::EmptyMatrix, "no observations");
  MetricSet m;
  m.acc = 100.0 * static_cast<double>(cm.tp + cm.tn) /
          static_cast<double>(cm.n());
  if (cm.tp + cm.fn > 0) {
    m.tpr = 100.0 * static_cast<double>(cm.tp) /
            static_cast<double>(cm.tp + cm.fn);
    m.fnr = 100.0 - *m.tpr;  // complement identity holds exactly
  }
  if (cm.tn + cm.fp > 0) {
    m.tnr = 100.0 * static_cast<double>(cm.tn) /
            static_cast<double>(cm.tn + cm.fp);
    m.fpr = 100.0 - *m.tnr;
  }
  if (cm.tp + cm.fp > 0) {
    m.pre = 100.0 * static_cast<double>(cm.tp) /
            static_cast<double>(cm.tp + cm.fp);
  }
  return m;
}

MetricSet mean_metrics(const std::vector<MetricSet>& folds) {
  MetricSet out;
  auto average = [&](std::optional<double> MetricSet::* field) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& f : folds) {
      if (f.*field) {
        sum += *(f.*field);
        ++count;
      }
    }
    if (count > 0) out.*field = sum / static_cast<double>(count);
  };
  average(&MetricSet::acc);
  average(&MetricSet::tpr);
  average(&MetricSet::tnr);
  average(&MetricSet::fpr);
  average(&MetricSet::fnr);
  average(&MetricSet::pre);
  return out;
}

std::string metrics_table_csv(const std::vector<MetricSet>& folds,
                              const MetricSet& mean) {
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt_fixed2(*v) : std::string("NA");
  };
  std::string out = "metric";
  for (std::size_t i = 0; i < folds.size(); ++i) {
    out += ",fold_" + std::to_string(i + 1);
  }
  out += ",mean\n";
  struct Row {
    const char* name;
    std::optional<double> MetricSet::* field;
  };
  const Row rows[] = {
      {"ACC", &MetricSet::acc}, {"FNR", &MetricSet::fnr},
      {"FPR", &MetricSet::fpr}, {"PRE", &MetricSet::pre},
      {"TNR", &MetricSet::tnr}, {"TPR", &MetricSet::tpr},
  };
  for (const Row& r : rows) {
    out += r.name;
    for (const auto& f : folds) {
      out += ',';
      out += cell(f.*(r.field));
    }
    out += ',';
    out += cell(mean.*(r.field));
    out += '\n';
  }
  return out;
}

}  // namespace uit
