#pragma once

// ROC-based metrics for binary scorers. Label 1 is the positive class and
// higher scores mean "more positive".

#include <span>
#include <vector>

namespace promine::metrics {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Empirical ROC from (0,0) to (1,1), one point per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Pairwise concordance P(s+ > s-) + 0.5 P(s+ = s-), via average ranks.
double auc(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under a ROC polyline.
double auc_trapezoid(std::span<const RocPoint> roc);

// Upper convex hull of a ROC curve, endpoints included, ordered by fpr.
std::vector<RocPoint> roc_convex_hull(std::span<const RocPoint> roc);

// Hand's H-measure with Beta(2,2) cost weighting, integrated in closed form
// over the ROC convex hull. pi1 is the positive-class prior.
double hand_h_from_roc(std::span<const RocPoint> roc, double pi1);
double hand_h(std::span<const double> scores, std::span<const int> labels);

struct ConfusionRates {
  double accuracy = 0.0;
  double tp_rate = 0.0;  // TP / (TP + FN); 0 when no positives
  double fp_rate = 0.0;  // FP / (FP + TN); 0 when no negatives
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

ConfusionRates confusion_rates(std::span<const int> predictions, std::span<const int> labels);

}  // namespace promine::metrics
