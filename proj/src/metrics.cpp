#include "promine/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "promine/error.hpp"

namespace promine::metrics {
namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("metrics: scores and labels differ in length");
  ClassCounts c;
  for (int y : labels) {
    if (y == 1)
      ++c.pos;
    else if (y == 0)
      ++c.neg;
    else
      throw ValidationError("metrics: labels must be 0 or 1");
  }
  if (c.pos == 0 || c.neg == 0) throw ValidationError("metrics: both classes must be present");
  return c;
}

// Antiderivative of (alpha + beta c) * 6 c (1 - c).
double weighted_loss_primitive(double alpha, double beta, double c) {
  const double c2 = c * c, c3 = c2 * c, c4 = c3 * c;
  return 6.0 * (alpha * (c2 / 2.0 - c3 / 3.0) + beta * (c3 / 3.0 - c4 / 4.0));
}

// Integral of the minimum hull-vertex loss against Beta(2,2).
double expected_min_loss(std::span<const RocPoint> hull, double pi0, double pi1) {
  const std::size_t m = hull.size();
  double upper = 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double lower = 0.0;
    if (i + 1 < m) {
      const double dy = hull[i + 1].tpr - hull[i].tpr;
      const double dx = hull[i + 1].fpr - hull[i].fpr;
      const double denom = pi1 * dy + pi0 * dx;
      lower = denom > 0.0 ? pi1 * dy / denom : upper;
      lower = std::min(lower, upper);
    }
    const double alpha = pi1 * (1.0 - hull[i].tpr);
    const double beta = pi0 * hull[i].fpr - alpha;
    total += weighted_loss_primitive(alpha, beta, upper) - weighted_loss_primitive(alpha, beta, lower);
    upper = lower;
  }
  return total;
}

double cross(const RocPoint& o, const RocPoint& a, const RocPoint& b) {
  return (a.fpr - o.fpr) * (b.tpr - o.tpr) - (a.tpr - o.tpr) * (b.fpr - o.fpr);
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto cc = check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++tp;
      else
        ++fp;
      ++j;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(cc.neg),
                   static_cast<double>(tp) / static_cast<double>(cc.pos)});
    i = j;
  }
  return roc;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto cc = check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(cc.pos), nn = static_cast<double>(cc.neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_trapezoid(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  return area;
}

std::vector<RocPoint> roc_convex_hull(std::span<const RocPoint> roc) {
  std::vector<RocPoint> pts(roc.begin(), roc.end());
  pts.push_back({0.0, 0.0});
  pts.push_back({1.0, 1.0});
  std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr > b.tpr);
  });
  std::vector<RocPoint> hull;
  for (const auto& p : pts) {
    if (!hull.empty() && hull.back().fpr == p.fpr) continue;  // keep the highest tpr per fpr
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) hull.pop_back();
    hull.push_back(p);
  }
  // Anchor the vertical segment at fpr = 0.
  if (hull.front().tpr > 0.0) hull.insert(hull.begin(), RocPoint{0.0, 0.0});
  return hull;
}

double hand_h_from_roc(std::span<const RocPoint> roc, double pi1) {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("hand_h: class prior must lie in (0, 1)");
  const double pi0 = 1.0 - pi1;
  const auto hull = roc_convex_hull(roc);
  const std::vector<RocPoint> trivial = {{0.0, 0.0}, {1.0, 1.0}};
  const double loss = expected_min_loss(hull, pi0, pi1);
  const double ref = expected_min_loss(trivial, pi0, pi1);
  return std::clamp(1.0 - loss / ref, 0.0, 1.0);
}

double hand_h(std::span<const double> scores, std::span<const int> labels) {
  const auto cc = check_binary(scores, labels);
  const double pi1 = static_cast<double>(cc.pos) / static_cast<double>(cc.pos + cc.neg);
  return hand_h_from_roc(roc_curve(scores, labels), pi1);
}

ConfusionRates confusion_rates(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("confusion: length mismatch");
  if (predictions.empty()) throw ValidationError("confusion: empty input");
  ConfusionRates r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    if (p && y) ++r.tp;
    else if (p && !y) ++r.fp;
    else if (!p && y) ++r.fn;
    else ++r.tn;
  }
  const double n = static_cast<double>(labels.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.tp_rate = r.tp + r.fn ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.fp_rate = r.fp + r.tn ? static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn) : 0.0;
  return r;
}

}  // namespace promine::metrics
