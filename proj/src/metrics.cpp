#include "lesc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lesc/error.hpp"

namespace lesc {

double roc_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw Error("roc_auc: need both positive and negative scores");
  struct Item {
    double score;
    bool pos;
  };
  std::vector<Item> items;
  items.reserve(positive.size() + negative.size());
  for (double s : positive) items.push_back({s, true});
  for (double s : negative) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  // Mann-Whitney: sum of positive ranks with average ranks for ties.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].pos) rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double BinaryCounts::accuracy() const {
  const std::size_t total = tp + fp + tn + fn;
  return total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
}

double BinaryCounts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

BinaryCounts count_predictions(std::span<const double> scores, std::span<const bool> labels, double threshold,
                               bool positive_is_true) {
  if (scores.size() != labels.size()) throw DimensionError("count_predictions: size mismatch");
  BinaryCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = (scores[i] >= threshold) == positive_is_true;
    const bool actual = labels[i] == positive_is_true;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy_at(std::span<const double> scores, std::span<const bool> labels, double threshold) {
  return count_predictions(scores, labels, threshold).accuracy();
}

double calibrate_threshold(std::span<const double> scores, std::span<const bool> labels) {
  if (scores.size() != labels.size()) throw DimensionError("calibrate_threshold: size mismatch");
  if (scores.empty()) throw Error("calibrate_threshold: empty validation set");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0 || positives == labels.size()) {
    throw Error("calibrate_threshold: validation set has a single class");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error("calibrate_threshold: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Threshold at the lowest score: everything predicted positive.
  std::size_t correct = positives;
  double best_t = scores[order.front()];
  std::size_t best_correct = correct;
  // Sweep upward; after consuming a block of equal scores those items flip
  // to negative predictions.
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == s) {
      if (labels[order[j]]) --correct;
      else ++correct;
      ++j;
    }
    const double t = j < order.size() ? 0.5 * (s + scores[order[j]])
                                      : std::nextafter(s, std::numeric_limits<double>::infinity());
    if (correct > best_correct) {
      best_correct = correct;
      best_t = t;
    }
    i = j;
  }
  return best_t;
}

}  // namespace lesc
