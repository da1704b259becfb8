#pragma once

// Feature ranking (chi-square, Relief-F), the Naive Bayes forward wrapper and
// 2x2 odds ratios for the effect-size report.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promine/dataset.hpp"

namespace promine::featsel {

struct FeatureScore {
  std::string feature;
  double score = 0.0;
  std::size_t rank = 0;  // 1 = best
};

// Pearson chi-square of each discrete feature against the target, ranked
// descending. A single-level feature scores 0. Numeric columns are rejected.
std::vector<FeatureScore> chi2_rank(const Dataset& data);

// Relief-F with k nearest hits and misses per sampled instance (clamped to
// the class sizes with a warning). m = 0 uses every instance in order;
// otherwise m instances are drawn without replacement using the seed.
std::vector<FeatureScore> relief_f(const Dataset& data, std::size_t k = 10, std::size_t m = 0,
                                   std::uint64_t seed = 1);

struct WrapperStep {
  std::size_t step = 0;
  std::string feature;
  double auc = 0.0;
};

struct WrapperOptions {
  std::size_t inner_folds = 5;
  double epsilon = 1e-4;
  std::uint64_t seed = 1;
  std::size_t max_features = 0;  // 0 = no cap
};

struct WrapperResult {
  std::vector<std::string> selected;  // in order of addition
  std::vector<WrapperStep> trace;
  double auc = 0.5;  // inner-CV AUC of the selected set (0.5 for the empty set)
};

// Greedy forward selection on the pooled inner-cross-validated AUC of Naive
// Bayes. A feature is added only if it improves AUC by more than epsilon.
// The inner folds are stratified_folds(target, inner_folds, seed).
WrapperResult nb_wrapper_select(const Dataset& data, const WrapperOptions& options = {});

// One inner fold, already transformed by whatever was fit on its own training
// part. test_rows index the pooled target.
struct WrapperFold {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> test_rows;
};

// Same search over prepared folds. A candidate missing from a fold (e.g.
// dropped there as constant) simply contributes nothing in that fold.
WrapperResult nb_wrapper_select(const std::vector<WrapperFold>& folds, std::span<const int> target,
                                const std::vector<std::string>& candidates, const WrapperOptions& options = {});

enum class Selector { none, nb_wrapper };

// Throws NotImplementedError for the registered-but-unimplemented searches
// (consistency_bfs, su_subset, rank_search) and ConfigError otherwise.
Selector selector_from_string(std::string_view name);
std::string_view to_string(Selector s);

// --- Odds ratios ------------------------------------------------------------------

// a = exposed & positive, b = exposed & negative,
// c = unexposed & positive, d = unexposed & negative.
struct TwoByTwo {
  double a = 0, b = 0, c = 0, d = 0;
};

struct OddsRatioReport {
  std::string feature;
  std::string exposure;  // what "exposed" means, e.g. "> 21.5" or "= Commercial"
  TwoByTwo cells;        // as counted, before any correction
  bool corrected = false;  // Haldane-Anscombe +0.5 applied
  double odds_ratio = 1.0;
  double log_odds_ratio = 0.0;
  double se_log = 0.0;
  double ci_low = 1.0;  // 95% Wald interval, back-transformed
  double ci_high = 1.0;
  double half_width = 0.0;  // 1.96 * OR * SE(log OR): the "OR ± x" presentation
  std::string direction;    // e.g. "More likely to be higher"

  bool significant() const { return ci_low > 1.0 || ci_high < 1.0; }
};

// Throws ValidationError when the feature or the target is constant.
OddsRatioReport odds_ratio(const TwoByTwo& t, std::string feature = "");
OddsRatioReport odds_ratio(std::span<const int> exposed, std::span<const int> target, std::string feature = "");

// One oriented report per feature (OR >= 1): numeric features are split at the
// median, discrete ones by the level whose one-vs-rest log OR is largest in
// magnitude. Features whose split is constant are skipped with a warning.
// Sorted by descending OR.
std::vector<OddsRatioReport> odds_ratio_table(const Dataset& data);

std::string odds_ratio_text(const std::vector<OddsRatioReport>& rows);
std::string odds_ratio_csv(const std::vector<OddsRatioReport>& rows);
std::string feature_scores_csv(const std::vector<FeatureScore>& scores, std::string_view method);

}  // namespace promine::featsel
