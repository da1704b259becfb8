#include "promine/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "promine/csv.hpp"
#include "promine/log.hpp"

namespace promine::preprocess {

ZScore zscore_fit(std::span<const double> train) {
  if (train.size() < 2) throw ConstantColumnError("zscore: need at least two training values");
  double sum = 0.0;
  for (double v : train) sum += v;
  const double mean = sum / static_cast<double>(train.size());
  double ss = 0.0;
  for (double v : train) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(train.size() - 1));
  if (!(sd > 0.0)) throw ConstantColumnError("zscore: training column is constant");
  return {mean, sd};
}

std::vector<double> zscore_apply(const ZScore& z, std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - z.mean) / z.sd;
  return out;
}

ZScoreResult zscore_fit_apply(std::span<const double> train, std::span<const double> apply) {
  ZScoreResult r;
  r.stats = zscore_fit(train);
  r.values = zscore_apply(r.stats, apply);
  return r;
}

TargetResult binarize_target(std::span<const double> deltas) {
  if (deltas.size() < 2) throw ValidationError("binarize_target: need at least two values");
  double sum = 0.0;
  for (double d : deltas) sum += d;
  TargetResult r;
  r.target.threshold = sum / static_cast<double>(deltas.size());
  r.labels = apply_target(r.target, deltas);
  const auto pos = std::count(r.labels.begin(), r.labels.end(), 1);
  if (pos == 0 || pos == static_cast<long>(r.labels.size())) {
    r.target.degenerate = true;
    log::warn("binarize_target: all deltas fall on one side of the mean; target is degenerate");
    log::count_event("degenerate_target");
  }
  return r;
}

std::vector<int> apply_target(const BinaryTarget& t, std::span<const double> deltas) {
  std::vector<int> labels(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) labels[i] = deltas[i] > t.threshold ? 1 : 0;
  return labels;
}

// --- CAIM -----------------------------------------------------------------------------

namespace {

// Distinct sorted values with per-class counts.
struct ValueTable {
  std::vector<double> values;
  std::vector<std::vector<std::size_t>> counts;  // [distinct value][class]
  std::size_t classes = 0;
  std::vector<int> class_ids;
};

ValueTable tabulate(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw ValidationError("caim: values and labels differ in length");
  ValueTable t;
  std::set<int> ids(labels.begin(), labels.end());
  t.class_ids.assign(ids.begin(), ids.end());
  t.classes = t.class_ids.size();
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  for (auto i : order) {
    if (std::isnan(values[i])) throw ValidationError("caim: NaN value");
    if (t.values.empty() || values[i] != t.values.back()) {
      t.values.push_back(values[i]);
      t.counts.emplace_back(t.classes, 0);
    }
    const auto cls = std::lower_bound(t.class_ids.begin(), t.class_ids.end(), labels[i]) - t.class_ids.begin();
    ++t.counts.back()[static_cast<std::size_t>(cls)];
  }
  return t;
}

bool pure_same(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  auto sole = [](const std::vector<std::size_t>& c) -> long {
    long which = -1;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] == 0) continue;
      if (which >= 0) return -2;
      which = static_cast<long>(k);
    }
    return which;
  };
  const long sa = sole(a);
  return sa >= 0 && sa == sole(b);
}

// Gap g sits between distinct values g and g+1.
std::vector<std::size_t> candidate_gaps(const ValueTable& t) {
  std::vector<std::size_t> gaps;
  for (std::size_t g = 0; g + 1 < t.values.size(); ++g)
    if (!pure_same(t.counts[g], t.counts[g + 1])) gaps.push_back(g);
  return gaps;
}

double midpoint(const ValueTable& t, std::size_t gap) { return 0.5 * (t.values[gap] + t.values[gap + 1]); }

// Criterion for intervals delimited by sorted gaps, from cumulative counts.
double criterion_from_gaps(const std::vector<std::vector<std::size_t>>& prefix, std::size_t distinct,
                           std::size_t classes, const std::vector<std::size_t>& gaps) {
  double sum = 0.0;
  std::size_t lo = 0;  // first distinct index of the interval
  auto add_interval = [&](std::size_t hi) {  // inclusive
    std::size_t total = 0, best = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      const std::size_t c = prefix[hi + 1][k] - prefix[lo][k];
      total += c;
      best = std::max(best, c);
    }
    if (total > 0) sum += static_cast<double>(best) * static_cast<double>(best) / static_cast<double>(total);
  };
  for (auto g : gaps) {
    add_interval(g);
    lo = g + 1;
  }
  add_interval(distinct - 1);
  return sum / static_cast<double>(gaps.size() + 1);
}

}  // namespace

std::vector<double> caim_candidates(std::span<const double> values, std::span<const int> labels) {
  const auto t = tabulate(values, labels);
  std::vector<double> out;
  for (auto g : candidate_gaps(t)) out.push_back(midpoint(t, g));
  return out;
}

double caim_criterion(std::span<const double> values, std::span<const int> labels, std::span<const double> cuts) {
  const auto t = tabulate(values, labels);
  std::vector<std::vector<std::size_t>> counts(cuts.size() + 1, std::vector<std::size_t>(t.classes, 0));
  for (std::size_t d = 0; d < t.values.size(); ++d) {
    const auto b = bin_index(cuts, t.values[d]);
    for (std::size_t k = 0; k < t.classes; ++k) counts[b][k] += t.counts[d][k];
  }
  double sum = 0.0;
  for (const auto& iv : counts) {
    std::size_t total = 0, best = 0;
    for (auto c : iv) {
      total += c;
      best = std::max(best, c);
    }
    if (total > 0) sum += static_cast<double>(best) * static_cast<double>(best) / static_cast<double>(total);
  }
  return sum / static_cast<double>(cuts.size() + 1);
}

CaimResult caim_discretize(std::span<const double> values, std::span<const int> labels) {
  const auto t = tabulate(values, labels);
  if (t.values.size() < 2) throw ConstantColumnError("caim: column is constant");
  if (t.classes < 2) throw ValidationError("caim: need at least two classes");

  std::vector<std::vector<std::size_t>> prefix(t.values.size() + 1, std::vector<std::size_t>(t.classes, 0));
  for (std::size_t d = 0; d < t.values.size(); ++d)
    for (std::size_t k = 0; k < t.classes; ++k) prefix[d + 1][k] = prefix[d][k] + t.counts[d][k];

  std::vector<std::size_t> remaining = candidate_gaps(t);
  std::vector<std::size_t> chosen;
  CaimResult r;
  double global = criterion_from_gaps(prefix, t.values.size(), t.classes, chosen);
  std::size_t intervals = 1;

  while (!remaining.empty()) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      auto trial = chosen;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), remaining[i]), remaining[i]);
      const double v = criterion_from_gaps(prefix, t.values.size(), t.classes, trial);
      if (v > best) {
        best = v;
        best_pos = i;
      }
    }
    if (!(best > global || intervals < t.classes)) break;
    const auto g = remaining[best_pos];
    chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), g), g);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
    global = best;
    ++intervals;
    r.trace.push_back({midpoint(t, g), best});
  }
  for (auto g : chosen) r.cuts.push_back(midpoint(t, g));
  r.criterion = global;
  return r;
}

std::size_t bin_index(std::span<const double> cuts, double x) {
  return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

std::vector<std::string> interval_labels(std::span<const double> cuts, int decimals) {
  std::vector<std::string> out;
  std::string lo = "-inf";
  for (double c : cuts) {
    const auto hi = csv::fixed(c, decimals);
    out.push_back("(" + lo + "," + hi + "]");
    lo = hi;
  }
  out.push_back("(" + lo + ",inf)");
  return out;
}

// --- Variance filter ---------------------------------------------------------------------

std::vector<std::string> constant_columns(const Dataset& data) {
  std::vector<std::string> out;
  for (const auto& c : data.columns) {
    bool constant = true;
    for (std::size_t i = 1; i < c.values.size() && constant; ++i) constant = c.values[i] == c.values[0];
    if (constant) out.push_back(c.name);
  }
  return out;
}

VarianceFilterResult variance_filter(const Dataset& data) {
  VarianceFilterResult r;
  r.removed = constant_columns(data);
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < data.cols(); ++j)
    if (std::find(r.removed.begin(), r.removed.end(), data.columns[j].name) == r.removed.end()) keep.push_back(j);
  r.data = data.take_columns(keep);
  for (const auto& name : r.removed) log::info("variance filter: removed constant column '" + name + "'");
  return r;
}

// --- Fitted preprocessor --------------------------------------------------------------------

std::string_view to_string(Binning b) { return b == Binning::caim ? "CAIM" : "BinTarget"; }

Binning binning_from_string(std::string_view s) {
  if (s == "CAIM" || s == "caim") return Binning::caim;
  if (s == "BinTarget" || s == "bin_target" || s == "Bin Target") return Binning::bin_target;
  throw ConfigError("unknown binning '" + std::string(s) + "' (expected BinTarget or CAIM)");
}

ColumnKind ColumnTransform::output_kind() const {
  if (source_kind != ColumnKind::numeric) return source_kind;
  return bin_labels.empty() ? ColumnKind::numeric : ColumnKind::binned;
}

FittedPreprocessor fit_preprocessor(const Dataset& train, Binning binning) {
  FittedPreprocessor fp;
  fp.binning = binning;
  auto filtered = variance_filter(train);
  fp.removed = filtered.removed;
  for (const auto& c : filtered.data.columns) {
    ColumnTransform t;
    t.name = c.name;
    t.source_kind = c.kind;
    if (c.kind == ColumnKind::numeric) {
      t.zscore = zscore_fit(c.values);
      if (binning == Binning::caim) {
        const auto z = zscore_apply(*t.zscore, c.values);
        t.cuts = caim_discretize(z, train.target).cuts;
        std::vector<double> raw_cuts;
        for (double cut : t.cuts) raw_cuts.push_back(cut * t.zscore->sd + t.zscore->mean);
        t.bin_labels = interval_labels(raw_cuts);
      }
    } else {
      t.levels = c.levels;
    }
    fp.columns.push_back(std::move(t));
  }
  return fp;
}

Dataset FittedPreprocessor::apply(const Dataset& raw) const {
  Dataset out;
  out.target = raw.target;
  for (const auto& t : columns) {
    const auto src_idx = raw.find(t.name);
    if (!src_idx) throw SchemaError("preprocessor: input has no column '" + t.name + "'");
    const Column& src = raw.columns[*src_idx];
    Column c;
    c.name = t.name;
    if (t.source_kind == ColumnKind::numeric) {
      if (src.kind != ColumnKind::numeric) throw SchemaError("preprocessor: column '" + t.name + "' must be numeric");
      auto z = zscore_apply(*t.zscore, src.values);
      if (t.bin_labels.empty()) {
        c.kind = ColumnKind::numeric;
        c.values = std::move(z);
      } else {
        c.kind = ColumnKind::binned;
        c.cuts = t.cuts;
        c.levels = t.bin_labels;
        c.values.reserve(z.size());
        for (double v : z) c.values.push_back(static_cast<double>(bin_index(t.cuts, v)));
      }
    } else {
      if (!src.discrete()) throw SchemaError("preprocessor: column '" + t.name + "' must be categorical");
      c.kind = t.source_kind;
      c.levels = t.levels;
      std::vector<double> remap(src.levels.size(), kUnknownLevel);
      for (std::size_t k = 0; k < src.levels.size(); ++k) {
        auto it = std::find(t.levels.begin(), t.levels.end(), src.levels[k]);
        if (it != t.levels.end()) remap[k] = static_cast<double>(it - t.levels.begin());
      }
      c.values.reserve(src.values.size());
      for (double v : src.values) {
        const double code = v < 0 ? kUnknownLevel : remap[static_cast<std::size_t>(v)];
        if (code == kUnknownLevel) {
          log::count_event("unknown_level");
          log::debug("preprocessor: unseen level in column '" + t.name + "' mapped to other");
        }
        c.values.push_back(code);
      }
    }
    out.columns.push_back(std::move(c));
  }
  return out;
}

Schema FittedPreprocessor::output_schema() const {
  Schema s;
  for (const auto& t : columns) {
    const auto kind = t.output_kind();
    const std::size_t card = kind == ColumnKind::numeric ? 0 : kind == ColumnKind::binned ? t.bin_labels.size() : t.levels.size();
    s.push_back({t.name, kind, card});
  }
  return s;
}

std::vector<std::string> FittedPreprocessor::input_columns() const {
  std::vector<std::string> out;
  for (const auto& t : columns) out.push_back(t.name);
  return out;
}

nlohmann::json FittedPreprocessor::to_json() const {
  nlohmann::json j;
  j["schema"] = "promine.preprocessor";
  j["version"] = 1;
  j["binning"] = std::string(to_string(binning));
  j["removed"] = removed;
  j["columns"] = nlohmann::json::array();
  for (const auto& t : columns) {
    nlohmann::json c;
    c["name"] = t.name;
    c["kind"] = std::string(promine::to_string(t.source_kind));
    if (t.zscore) c["zscore"] = {{"mean", t.zscore->mean}, {"sd", t.zscore->sd}};
    if (!t.levels.empty()) c["levels"] = t.levels;
    if (!t.bin_labels.empty()) {
      c["cuts"] = t.cuts;
      c["bin_labels"] = t.bin_labels;
    }
    j["columns"].push_back(std::move(c));
  }
  return j;
}

FittedPreprocessor FittedPreprocessor::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "promine.preprocessor" || j.value("version", 0) != 1)
    throw SchemaError("preprocessor: unsupported document schema/version");
  FittedPreprocessor fp;
  fp.binning = binning_from_string(j.at("binning").get<std::string>());
  fp.removed = j.at("removed").get<std::vector<std::string>>();
  for (const auto& c : j.at("columns")) {
    ColumnTransform t;
    t.name = c.at("name").get<std::string>();
    t.source_kind = column_kind_from_string(c.at("kind").get<std::string>());
    if (c.contains("zscore")) t.zscore = ZScore{c["zscore"].at("mean").get<double>(), c["zscore"].at("sd").get<double>()};
    if (c.contains("levels")) t.levels = c["levels"].get<std::vector<std::string>>();
    if (c.contains("cuts")) {
      t.cuts = c["cuts"].get<std::vector<double>>();
      t.bin_labels = c.at("bin_labels").get<std::vector<std::string>>();
    }
    fp.columns.push_back(std::move(t));
  }
  return fp;
}

}  // namespace promine::preprocess
