#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyfulm/data.hpp"
#include "dyfulm/model.hpp"

namespace dyfulm {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

inline ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                                    const std::vector<int>& labels, int n_classes) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("classification_metrics: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  if (preds.empty()) throw std::invalid_argument("classification_metrics: empty input");
  if (n_classes < 1) throw std::invalid_argument("classification_metrics: n_classes must be positive");
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] < 0 || preds[i] >= n_classes || labels[i] < 0 || labels[i] >= n_classes)
      throw std::invalid_argument("classification_metrics: class id outside [0," +
                                  std::to_string(n_classes) + ") at position " + std::to_string(i));

  long correct = 0;
  std::vector<long> tp(static_cast<size_t>(n_classes), 0), fp(static_cast<size_t>(n_classes), 0),
      fn(static_cast<size_t>(n_classes), 0);
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) {
      ++correct;
      ++tp[static_cast<size_t>(preds[i])];
    } else {
      ++fp[static_cast<size_t>(preds[i])];
      ++fn[static_cast<size_t>(labels[i])];
    }
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  // macro mean over all classes; a class with no predictions and no labels
  // has P+R = 0 and contributes F1 = 0 by convention
  double f1_sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const double p_den = static_cast<double>(tp[static_cast<size_t>(c)] + fp[static_cast<size_t>(c)]);
    const double r_den = static_cast<double>(tp[static_cast<size_t>(c)] + fn[static_cast<size_t>(c)]);
    const double p = p_den > 0.0 ? static_cast<double>(tp[static_cast<size_t>(c)]) / p_den : 0.0;
    const double r = r_den > 0.0 ? static_cast<double>(tp[static_cast<size_t>(c)]) / r_den : 0.0;
    f1_sum += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  m.macro_f1 = f1_sum / static_cast<double>(n_classes);
  return m;
}

struct RegressionMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

// stands in for −∞ when the targets are constant but the fit is not perfect
inline constexpr double kR2Floor = -1e300;

inline RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                            const std::vector<double>& targets) {
  if (preds.size() != targets.size())
    throw std::invalid_argument("regression_metrics: " + std::to_string(preds.size()) +
                                " predictions vs " + std::to_string(targets.size()) + " targets");
  if (preds.empty()) throw std::invalid_argument("regression_metrics: empty input");
  const double n = static_cast<double>(preds.size());
  double abs_sum = 0.0, sq_sum = 0.0, target_sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - targets[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    target_sum += targets[i];
  }
  RegressionMetrics m;
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  const double mean = target_sum / n;
  double ss_tot = 0.0;
  for (double t : targets) ss_tot += (t - mean) * (t - mean);
  const double ss_res = sq_sum;
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - ss_res / ss_tot;
  } else if (ss_res == 0.0) {
    m.r2 = 0.0;  // constant targets, perfectly matched: defined as 0
  } else {
    std::fprintf(stderr, "warning: constant targets with nonzero residual; r2 floored to %g\n",
                 kR2Floor);
    m.r2 = kR2Floor;
  }
  return m;
}

struct MetricsReport {
  double coarse_acc = 0.0;
  double fine_acc = 0.0;
  double coarse_f1 = 0.0;
  double fine_f1 = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

// ties go to the lowest class index so evaluation is deterministic
inline int argmax_index(const Tensor& t) {
  int best = 0;
  for (int i = 1; i < t.numel(); ++i)
    if (t.data()[i] > t.data()[best]) best = i;
  return best;
}

inline MetricsReport evaluate(const Model& model, const std::vector<Record>& records,
                              const AblationToggles& toggles = {}) {
  if (records.empty()) throw std::invalid_argument("evaluate: empty record set");
  std::vector<int> coarse_preds, fine_preds, coarse_labels, fine_labels;
  std::vector<double> intensity_preds, intensity_targets;
  coarse_preds.reserve(records.size());
  for (const Record& r : records) {
    Tape tp(false, /*grad_enabled=*/false);
    const ForwardResult fwd = model.forward(tp, r.ids, toggles);
    coarse_preds.push_back(argmax_index(fwd.heads.coarse_logits));
    fine_preds.push_back(argmax_index(fwd.heads.fine_logits));
    intensity_preds.push_back(fwd.heads.intensity.value());
    coarse_labels.push_back(r.coarse);
    fine_labels.push_back(r.fine);
    intensity_targets.push_back(r.intensity);
  }
  const ClassificationMetrics coarse = classification_metrics(coarse_preds, coarse_labels, kCoarseClasses);
  const ClassificationMetrics fine = classification_metrics(fine_preds, fine_labels, kFineClasses);
  const RegressionMetrics reg = regression_metrics(intensity_preds, intensity_targets);
  MetricsReport rep;
  rep.coarse_acc = coarse.accuracy;
  rep.fine_acc = fine.accuracy;
  rep.coarse_f1 = coarse.macro_f1;
  rep.fine_f1 = fine.macro_f1;
  rep.mae = reg.mae;
  rep.mse = reg.mse;
  rep.r2 = reg.r2;
  return rep;
}

inline const char* metrics_csv_header() {
  return "run_id,variant,coarse_acc,fine_acc,coarse_f1,fine_f1,mae,mse,r2";
}

inline std::string metrics_csv_row(const std::string& run_id, const std::string& variant,
                                   const MetricsReport& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", run_id.c_str(),
                variant.c_str(), m.coarse_acc, m.fine_acc, m.coarse_f1, m.fine_f1, m.mae, m.mse,
                m.r2);
  return buf;
}

inline std::string metrics_table(const std::string& variant, const MetricsReport& m) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "variant      %s\n"
                "coarse_acc   %.4f\n"
                "fine_acc     %.4f\n"
                "coarse_f1    %.4f\n"
                "fine_f1      %.4f\n"
                "mae          %.4f\n"
                "mse          %.4f\n"
                "r2           %.4f\n",
                variant.c_str(), m.coarse_acc, m.fine_acc, m.coarse_f1, m.fine_f1, m.mae, m.mse,
                m.r2);
  return buf;
}

}  // namespace dyfulm
