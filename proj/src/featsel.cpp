#include "promine/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "promine/csv.hpp"
#include "promine/error.hpp"
#include "promine/learners.hpp"
#include "promine/log.hpp"
#include "promine/metrics.hpp"
#include "promine/random.hpp"

namespace promine::featsel {
namespace {

constexpr double kZ975 = 1.959963984540054;

std::vector<FeatureScore> ranked(const Dataset& data, const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<FeatureScore> out;
  for (std::size_t r = 0; r < order.size(); ++r)
    out.push_back({data.columns[order[r]].name, scores[order[r]], r + 1});
  return out;
}

void require_binary(const Dataset& data, const char* who) {
  data.validate();
  const std::size_t pos = data.positives();
  if (data.rows() == 0 || pos == 0 || pos == data.rows())
    throw ValidationError(std::string(who) + ": target is degenerate (a single class)");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : v[n / 2 - 1] + (v[n / 2] - v[n / 2 - 1]) / 2.0;
}

// Orients a report so OR >= 1 by flipping to the complementary exposure.
OddsRatioReport oriented(const TwoByTwo& t, const std::string& feature, const std::string& exposure,
                         const std::string& complement, const std::string& up, const std::string& down) {
  OddsRatioReport r = odds_ratio(t, feature);
  if (r.log_odds_ratio < 0.0) {
    r = odds_ratio(TwoByTwo{t.c, t.d, t.a, t.b}, feature);
    r.exposure = complement;
    r.direction = down;
  } else {
    r.exposure = exposure;
    r.direction = up;
  }
  return r;
}

std::string num(double x, int dec) { return csv::fixed(x, dec); }

}  // namespace

std::vector<FeatureScore> chi2_rank(const Dataset& data) {
  data.validate();
  std::vector<double> scores;
  for (const auto& col : data.columns) {
    if (!col.discrete()) throw ValidationError("chi2_rank: feature '" + col.name + "' is numeric; discretize first");
    std::vector<std::array<double, 2>> table(col.cardinality(), {0.0, 0.0});
    std::array<double, 2> ytot{0.0, 0.0};
    double used = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      if (col.values[r] < 0.0) continue;
      table[static_cast<std::size_t>(col.values[r])][static_cast<std::size_t>(data.target[r])] += 1.0;
      ytot[static_cast<std::size_t>(data.target[r])] += 1.0;
      used += 1.0;
    }
    double chi2 = 0.0;
    std::size_t levels_present = 0;
    for (const auto& row : table)
      if (row[0] + row[1] > 0.0) ++levels_present;
    if (levels_present > 1 && ytot[0] > 0.0 && ytot[1] > 0.0) {
      for (const auto& row : table) {
        const double rt = row[0] + row[1];
        if (rt == 0.0) continue;
        for (std::size_t y = 0; y < 2; ++y) {
          const double e = rt * ytot[y] / used;
          chi2 += (row[y] - e) * (row[y] - e) / e;
        }
      }
    }
    scores.push_back(chi2);
  }
  return ranked(data, scores);
}

std::vector<FeatureScore> relief_f(const Dataset& data, std::size_t k, std::size_t m, std::uint64_t seed) {
  require_binary(data, "relief_f");
  if (k == 0) throw ValidationError("relief_f: k must be >= 1");
  const std::size_t n = data.rows(), f = data.cols();
  std::vector<double> range(f, 0.0);
  for (std::size_t c = 0; c < f; ++c) {
    if (data.columns[c].discrete()) continue;
    const auto [lo, hi] = std::minmax_element(data.columns[c].values.begin(), data.columns[c].values.end());
    range[c] = *hi - *lo;
  }
  auto diff = [&](std::size_t c, std::size_t i, std::size_t j) {
    const double a = data.columns[c].values[i], b = data.columns[c].values[j];
    if (data.columns[c].discrete()) return a == b ? 0.0 : 1.0;
    return range[c] > 0.0 ? std::abs(a - b) / range[c] : 0.0;
  };

  const std::array<std::size_t, 2> class_n = {n - data.positives(), data.positives()};
  std::array<std::size_t, 2> k_hit{}, k_miss{};
  bool clamped = false;
  for (std::size_t y = 0; y < 2; ++y) {
    k_hit[y] = std::min(k, class_n[y] - 1);
    k_miss[y] = std::min(k, class_n[1 - y]);
    clamped = clamped || k_hit[y] < k || k_miss[y] < k;
  }
  if (clamped) log::warn("relief_f: k exceeds a class size; clamped");

  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  if (m != 0 && m < n) {
    Rng rng(seed);
    rng.shuffle(sample);
    sample.resize(m);
  }
  std::vector<double> w(f, 0.0);
  std::vector<std::pair<double, std::size_t>> hits, misses;
  for (auto i : sample) {
    hits.clear();
    misses.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < f; ++c) d += diff(c, i, j);
      (data.target[j] == data.target[i] ? hits : misses).emplace_back(d, j);
    }
    const auto y = static_cast<std::size_t>(data.target[i]);
    const std::size_t kh = k_hit[y], km = k_miss[y];
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(kh), hits.end());
    std::partial_sort(misses.begin(), misses.begin() + static_cast<std::ptrdiff_t>(km), misses.end());
    for (std::size_t c = 0; c < f; ++c) {
      double h = 0.0, s = 0.0;
      for (std::size_t t = 0; t < kh; ++t) h += diff(c, i, hits[t].second);
      for (std::size_t t = 0; t < km; ++t) s += diff(c, i, misses[t].second);
      if (kh) w[c] -= h / static_cast<double>(kh);
      if (km) w[c] += s / static_cast<double>(km);
    }
  }
  for (auto& v : w) v /= static_cast<double>(sample.size());
  return ranked(data, w);
}

WrapperResult nb_wrapper_select(const Dataset& data, const WrapperOptions& options) {
  require_binary(data, "nb_wrapper_select");
  if (data.cols() == 0) throw ValidationError("nb_wrapper_select: no candidate features");
  const std::size_t k = std::min(options.inner_folds, data.rows());
  const auto assignment = learners::stratified_folds(data.target, k, options.seed);
  std::vector<WrapperFold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> tr;
    for (std::size_t i = 0; i < data.rows(); ++i) (assignment[i] == f ? folds[f].test_rows : tr).push_back(i);
    folds[f].train = data.take_rows(tr);
    folds[f].test = data.take_rows(folds[f].test_rows);
  }
  return nb_wrapper_select(folds, data.target, data.names(), options);
}

WrapperResult nb_wrapper_select(const std::vector<WrapperFold>& folds, std::span<const int> target,
                                const std::vector<std::string>& candidates, const WrapperOptions& options) {
  if (candidates.empty()) throw ValidationError("nb_wrapper_select: no candidate features");
  if (folds.empty()) throw ValidationError("nb_wrapper_select: no folds");
  const auto nb = learners::ClassifierSpec::make(learners::Algorithm::naive_bayes, options.seed);
  std::vector<double> scores(target.size(), std::nan(""));
  auto cv_auc = [&](const std::vector<std::string>& cols) {
    for (const auto& p : folds) {
      std::vector<std::string> present;
      for (const auto& c : cols)
        if (p.train.find(c)) present.push_back(c);
      if (present.empty()) {
        // Nothing to learn from here: every row gets the training prior.
        const double prior = double(p.train.positives()) / double(std::max<std::size_t>(1, p.train.rows()));
        for (auto r : p.test_rows) scores[r] = prior;
        continue;
      }
      const auto model = learners::train(nb, p.train.take_columns(present));
      const auto s = model->positive_scores(p.test.take_columns(present));
      for (std::size_t i = 0; i < s.size(); ++i) scores[p.test_rows[i]] = s[i];
    }
    return metrics::auc(scores, target);
  };

  WrapperResult result;
  std::vector<std::string> chosen;
  std::vector<bool> used(candidates.size(), false);
  const std::size_t cap = options.max_features ? options.max_features : candidates.size();
  while (chosen.size() < cap) {
    double best = -1.0;
    std::size_t best_col = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      auto trial = chosen;
      trial.push_back(candidates[c]);
      const double a = cv_auc(trial);
      if (a > best) {
        best = a;
        best_col = c;
      }
    }
    if (!(best > result.auc + options.epsilon)) break;
    used[best_col] = true;
    chosen.push_back(candidates[best_col]);
    result.selected.push_back(candidates[best_col]);
    result.auc = best;
    result.trace.push_back({chosen.size(), candidates[best_col], best});
  }
  return result;
}

Selector selector_from_string(std::string_view name) {
  if (name == "none") return Selector::none;
  if (name == "nb_wrapper") return Selector::nb_wrapper;
  if (name == "consistency_bfs" || name == "su_subset" || name == "rank_search")
    throw NotImplementedError("feature selector '" + std::string(name) + "' is not implemented (out of scope)");
  throw ConfigError("unknown feature selector '" + std::string(name) + "' (valid: none, nb_wrapper)");
}

std::string_view to_string(Selector s) { return s == Selector::none ? "none" : "nb_wrapper"; }

OddsRatioReport odds_ratio(const TwoByTwo& t, std::string feature) {
  for (double v : {t.a, t.b, t.c, t.d})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("odds_ratio: cell counts must be finite and >= 0");
  if (t.a + t.b == 0.0 || t.c + t.d == 0.0) throw ValidationError("odds_ratio: feature is constant");
  if (t.a + t.c == 0.0 || t.b + t.d == 0.0) throw ValidationError("odds_ratio: target is constant");
  OddsRatioReport r;
  r.feature = std::move(feature);
  r.cells = t;
  TwoByTwo u = t;
  if (t.a == 0.0 || t.b == 0.0 || t.c == 0.0 || t.d == 0.0) {
    r.corrected = true;
    u = {t.a + 0.5, t.b + 0.5, t.c + 0.5, t.d + 0.5};
  }
  // Summing logs this way makes the complementary table's value the exact negation.
  r.log_odds_ratio = (std::log(u.a) + std::log(u.d)) - (std::log(u.b) + std::log(u.c));
  r.odds_ratio = std::exp(r.log_odds_ratio);
  r.se_log = std::sqrt(1.0 / u.a + 1.0 / u.b + 1.0 / u.c + 1.0 / u.d);
  r.ci_low = std::exp(r.log_odds_ratio - kZ975 * r.se_log);
  r.ci_high = std::exp(r.log_odds_ratio + kZ975 * r.se_log);
  r.half_width = kZ975 * r.odds_ratio * r.se_log;
  return r;
}

OddsRatioReport odds_ratio(std::span<const int> exposed, std::span<const int> target, std::string feature) {
  if (exposed.size() != target.size()) throw ValidationError("odds_ratio: length mismatch");
  TwoByTwo t;
  for (std::size_t i = 0; i < exposed.size(); ++i) {
    const bool e = exposed[i] != 0, y = target[i] != 0;
    (e ? (y ? t.a : t.b) : (y ? t.c : t.d)) += 1.0;
  }
  return odds_ratio(t, std::move(feature));
}

std::vector<OddsRatioReport> odds_ratio_table(const Dataset& data) {
  data.validate();
  std::vector<OddsRatioReport> out;
  for (const auto& col : data.columns) {
    try {
      if (!col.discrete()) {
        const double med = median(col.values);
        std::vector<int> hi(data.rows());
        for (std::size_t r = 0; r < data.rows(); ++r) hi[r] = col.values[r] > med ? 1 : 0;
        const auto base = odds_ratio(hi, data.target, col.name);
        out.push_back(oriented(base.cells, col.name, "> " + num(med, 2), "<= " + num(med, 2),
                               "More likely to be higher", "More likely to be lower"));
        continue;
      }
      std::optional<OddsRatioReport> best;
      double best_mag = 0.0;
      bool best_positive = false;
      for (std::size_t level = 0; level < col.cardinality(); ++level) {
        std::vector<int> is(data.rows());
        for (std::size_t r = 0; r < data.rows(); ++r) is[r] = col.values[r] == static_cast<double>(level) ? 1 : 0;
        OddsRatioReport rep;
        try {
          rep = odds_ratio(is, data.target, col.name);
        } catch (const ValidationError&) {
          continue;  // level absent or universal
        }
        const std::string& name = col.levels[level];
        auto o = oriented(rep.cells, col.name, "= " + name, "!= " + name, "More likely to be " + name,
                          "Less likely to be " + name);
        const double mag = std::abs(rep.log_odds_ratio);
        const bool positive = rep.log_odds_ratio > 0.0;
        // Largest effect wins; on a tie the "more likely" phrasing is kept.
        const bool better = !best || mag > best_mag + 1e-12 || (mag > best_mag - 1e-12 && positive && !best_positive);
        if (better) {
          best = o;
          best_mag = mag;
          best_positive = positive;
        }
      }
      if (!best) throw ValidationError("odds_ratio: feature is constant");
      out.push_back(*best);
    } catch (const ValidationError& e) {
      log::warn("odds_ratio_table: skipping '" + col.name + "': " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.odds_ratio > b.odds_ratio; });
  return out;
}

std::string odds_ratio_text(const std::vector<OddsRatioReport>& rows) {
  std::size_t w = 8;
  for (const auto& r : rows) w = std::max(w, r.feature.size());
  std::ostringstream os;
  auto pad = [](std::string s, std::size_t n) {
    if (s.size() < n) s.append(n - s.size(), ' ');
    return s;
  };
  os << pad("Variable", w + 2) << pad("Odds Ratio", 18) << pad("95% CI", 20) << "For >Mean Improve\n";
  for (const auto& r : rows) {
    os << pad(r.feature, w + 2) << pad(num(r.odds_ratio, 2) + " \xC2\xB1 " + num(r.half_width, 2), 18)
       << pad("[" + num(r.ci_low, 2) + ", " + num(r.ci_high, 2) + "]", 20) << "* " << r.direction << " ("
       << r.exposure << ")" << (r.significant() ? "" : ", Not Sign.") << "\n";
  }
  return os.str();
}

std::string odds_ratio_csv(const std::vector<OddsRatioReport>& rows) {
  std::ostringstream os;
  csv::write_row(os, {"feature", "exposure", "direction", "a", "b", "c", "d", "corrected", "odds_ratio",
                      "half_width", "log_odds_ratio", "se_log", "ci_low", "ci_high", "significant"});
  for (const auto& r : rows)
    csv::write_row(os, {r.feature, r.exposure, r.direction, csv::exact(r.cells.a), csv::exact(r.cells.b),
                        csv::exact(r.cells.c), csv::exact(r.cells.d), r.corrected ? "true" : "false",
                        num(r.odds_ratio, 4), num(r.half_width, 4), num(r.log_odds_ratio, 6), num(r.se_log, 6),
                        num(r.ci_low, 4), num(r.ci_high, 4), r.significant() ? "true" : "false"});
  return os.str();
}

std::string feature_scores_csv(const std::vector<FeatureScore>& scores, std::string_view method) {
  std::ostringstream os;
  csv::write_row(os, {"method", "rank", "feature", "score"});
  for (const auto& s : scores) csv::write_row(os, {std::string(method), std::to_string(s.rank), s.feature, num(s.score, 6)});
  return os.str();
}

}  // namespace promine::featsel
