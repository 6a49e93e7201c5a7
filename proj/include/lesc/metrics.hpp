#pragma once

#include <span>

namespace lesc {

// Area under the ROC curve for positive vs negative scores (ties count 1/2).
double roc_auc(std::span<const double> positive, std::span<const double> negative);

double accuracy_at(std::span<const double> scores, std::span<const bool> labels, double threshold);

struct BinaryCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy() const;
  // F1 of the positive class; 0 when it is never predicted nor present.
  double f1() const;
};

BinaryCounts count_predictions(std::span<const double> scores, std::span<const bool> labels, double threshold,
                               bool positive_is_true = true);

// Decision threshold maximizing accuracy of (score >= t). Candidates are the
// lowest score (all positive), midpoints between consecutive distinct scores,
// and the next double above the highest score (all negative); ties resolve
// to the lowest threshold. Needs both classes present.
double calibrate_threshold(std::span<const double> scores, std::span<const bool> labels);

}  // namespace lesc
