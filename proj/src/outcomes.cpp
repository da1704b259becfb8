#include "promine/outcomes.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "promine/csv.hpp"
#include "promine/error.hpp"
#include "promine/special.hpp"

namespace promine::outcomes {

std::string_view to_string(ReliableChange rc) {
  switch (rc) {
    case ReliableChange::deteriorate: return "Deteriorate";
    case ReliableChange::no_change: return "NoChange";
    case ReliableChange::improve: return "Improve";
  }
  return "NoChange";
}

ReliableChange reliable_change(double delta) {
  if (!(delta >= -cohort::kScaleMax && delta <= cohort::kScaleMax))
    throw ValidationError("reliable_change: delta " + csv::exact(delta) + " outside [-40,40]");
  if (delta < -kReliableChangeThreshold) return ReliableChange::deteriorate;
  if (delta > kReliableChangeThreshold) return ReliableChange::improve;
  return ReliableChange::no_change;
}

std::optional<bool> clinical_significance(double bl_ors, double final_ors) {
  auto in_range = [](double x) { return x >= 0.0 && x <= cohort::kScaleMax; };
  if (!in_range(bl_ors) || !in_range(final_ors))
    throw ValidationError("clinical_significance: ORS totals must lie in [0,40]");
  if (bl_ors > kClinicalCutoff) return std::nullopt;
  return final_ors > kClinicalCutoff;
}

ChiSquareResult chi_square_equal_expectation(std::span<const double> counts) {
  if (counts.size() < 2) throw ValidationError("chi-square: need at least 2 categories");
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0)) throw ValidationError("chi-square: counts must be non-negative");
    total += c;
  }
  if (total <= 0.0) throw ValidationError("chi-square: total count is zero");
  const double expected = total / static_cast<double>(counts.size());
  ChiSquareResult r;
  for (double c : counts) r.chi2 += (c - expected) * (c - expected) / expected;
  r.df = static_cast<int>(counts.size()) - 1;
  r.p = special::chi2_sf(r.chi2, r.df);
  return r;
}

Descriptives describe(std::span<const double> values) {
  if (values.empty()) throw ValidationError("describe: empty input");
  Descriptives d;
  d.n = values.size();
  d.min = *std::min_element(values.begin(), values.end());
  d.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(d.n);
  if (d.n < 2) {
    d.sd = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - d.mean) * (v - d.mean);
  d.sd = std::sqrt(ss / static_cast<double>(d.n - 1));
  return d;
}

std::size_t CrosstabPanel::total() const {
  std::size_t t = 0;
  for (const auto& r : counts) t += r[0] + r[1];
  return t;
}

std::size_t CrosstabPanel::row_total(std::size_t r) const { return counts[r][0] + counts[r][1]; }

std::size_t CrosstabPanel::col_total(std::size_t c) const {
  return counts[0][c] + counts[1][c] + counts[2][c];
}

double CrosstabPanel::pct(std::size_t count) const {
  const auto t = total();
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(t);
}

OutcomeCrosstab crosstab(std::span<const cohort::CohortRow> rows) {
  OutcomeCrosstab out;
  for (const auto& r : rows) {
    const auto sig = clinical_significance(r.bl_ors, r.final_ors);
    if (!sig) continue;
    const auto rc = static_cast<std::size_t>(reliable_change(r.final_delta_ors)) - 1;
    auto& panel = r.is_new ? out.new_clients : out.old_clients;
    ++panel.counts[rc][*sig ? 1 : 0];
  }
  return out;
}

std::array<std::size_t, 3> reliable_change_counts(std::span<const cohort::CohortRow> rows) {
  std::array<std::size_t, 3> c{};
  for (const auto& r : rows) ++c[static_cast<std::size_t>(reliable_change(r.final_delta_ors)) - 1];
  return c;
}

std::string format_p(double p) {
  if (p < 0.0005) return "<0.0005";
  return csv::fixed(p, 4);
}

namespace {

struct Group {
  std::string label;
  std::vector<const cohort::CohortRow*> rows;
};

std::vector<std::pair<std::string, std::vector<Group>>> groupings(std::span<const cohort::CohortRow> rows) {
  std::map<std::string, std::vector<const cohort::CohortRow*>> by_state;
  std::map<std::string, std::vector<const cohort::CohortRow*>> by_new;
  for (const auto& r : rows) {
    by_state[r.state].push_back(&r);
    by_new[std::to_string(r.is_new)].push_back(&r);
  }
  std::vector<std::pair<std::string, std::vector<Group>>> out(2);
  out[0].first = "State";
  for (auto& [k, v] : by_state) out[0].second.push_back({k, v});
  out[1].first = "New";
  for (auto& [k, v] : by_new) out[1].second.push_back({k, v});
  return out;
}

const std::array<const char*, 3> kScoreNames = {"bl_ors", "final_ors", "final_delta_ors"};

Descriptives describe_field(const std::vector<const cohort::CohortRow*>& rows, std::size_t which) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto* r : rows) v.push_back(which == 0 ? r->bl_ors : which == 1 ? r->final_ors : r->final_delta_ors);
  return describe(v);
}

std::string num(double x, int dec) { return csv::fixed(x, dec); }

}  // namespace

std::string descriptives_text(std::span<const cohort::CohortRow> rows) {
  std::ostringstream os;
  os << "DESCRIPTIVE STATISTICS\n";
  for (const auto& [heading, groups] : groupings(rows)) {
    os << '\n'
       << std::left << std::setw(8) << heading << std::setw(18) << "" << std::right << std::setw(6) << "N"
       << std::setw(8) << "Min" << std::setw(8) << "Max" << std::setw(9) << "Mean" << std::setw(11) << "Std. Dev."
       << '\n';
    for (const auto& g : groups) {
      for (std::size_t k = 0; k < kScoreNames.size(); ++k) {
        const auto d = describe_field(g.rows, k);
        os << std::left << std::setw(8) << (k == 0 ? g.label : "") << std::setw(18) << kScoreNames[k] << std::right
           << std::setw(6) << d.n << std::setw(8) << num(d.min, 1) << std::setw(8) << num(d.max, 1) << std::setw(9)
           << num(d.mean, 2) << std::setw(11) << num(d.sd, 3) << '\n';
      }
      os << std::left << std::setw(8) << "" << std::setw(18) << "Valid N" << std::right << std::setw(6)
         << g.rows.size() << '\n';
    }
  }
  return os.str();
}

std::string descriptives_csv(std::span<const cohort::CohortRow> rows) {
  std::ostringstream os;
  csv::write_row(os, {"grouping", "group", "variable", "n", "min", "max", "mean", "sd"});
  for (const auto& [heading, groups] : groupings(rows))
    for (const auto& g : groups)
      for (std::size_t k = 0; k < kScoreNames.size(); ++k) {
        const auto d = describe_field(g.rows, k);
        csv::write_row(os, {heading, g.label, kScoreNames[k], std::to_string(d.n), num(d.min, 4), num(d.max, 4),
                            num(d.mean, 4), num(d.sd, 4)});
      }
  return os.str();
}

namespace {

void panel_text(std::ostringstream& os, const char* title, const CrosstabPanel& p) {
  auto pct = [&](std::size_t c) { return num(p.pct(c), 1) + "%"; };
  os << std::left << std::setw(36) << title << std::right << std::setw(9) << "Sig=0" << std::setw(9) << "Sig=1"
     << std::setw(9) << "Total" << '\n';
  for (std::size_t r = 0; r < 3; ++r) {
    const auto label = std::to_string(r + 1) + " " + std::string(to_string(static_cast<ReliableChange>(r + 1)));
    os << std::left << std::setw(22) << label << std::setw(14) << "Count" << std::right << std::setw(9)
       << p.counts[r][0] << std::setw(9) << p.counts[r][1] << std::setw(9) << p.row_total(r) << '\n';
    os << std::left << std::setw(22) << "" << std::setw(14) << "% of Total" << std::right << std::setw(9)
       << pct(p.counts[r][0]) << std::setw(9) << pct(p.counts[r][1]) << std::setw(9) << pct(p.row_total(r))
       << '\n';
  }
  os << std::left << std::setw(22) << "Total" << std::setw(14) << "Count" << std::right << std::setw(9)
     << p.col_total(0) << std::setw(9) << p.col_total(1) << std::setw(9) << p.total() << '\n';
  os << std::left << std::setw(22) << "" << std::setw(14) << "% of Total" << std::right << std::setw(9)
     << pct(p.col_total(0)) << std::setw(9) << pct(p.col_total(1)) << std::setw(9) << pct(p.total()) << '\n';
}

}  // namespace

std::string crosstab_text(const OutcomeCrosstab& t) {
  std::ostringstream os;
  os << "RELIABLE CHANGE VS. CLINICAL SIGNIFICANCE (baseline ORS <= 25)\n"
     << "Reliable change: 1=Deteriorate, 2=No Change, 3=Improve; Sig: 1 = final ORS > 25\n\n";
  panel_text(os, "Old Clients", t.old_clients);
  os << '\n';
  panel_text(os, "New Clients", t.new_clients);
  return os.str();
}

std::string crosstab_csv(const OutcomeCrosstab& t) {
  std::ostringstream os;
  csv::write_row(os, {"panel", "reliable_change", "clinical_significance", "count", "pct_of_total"});
  auto emit = [&](const char* name, const CrosstabPanel& p) {
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 2; ++c)
        csv::write_row(os, {name, std::string(to_string(static_cast<ReliableChange>(r + 1))), std::to_string(c),
                            std::to_string(p.counts[r][c]), num(p.pct(p.counts[r][c]), 1)});
  };
  emit("old", t.old_clients);
  emit("new", t.new_clients);
  return os.str();
}

std::string reliable_change_text(std::span<const cohort::CohortRow> rows) {
  const auto c = reliable_change_counts(rows);
  std::ostringstream os;
  const double n = static_cast<double>(rows.size());
  os << "RELIABLE CHANGE (all clients, baseline unrestricted)\n";
  for (std::size_t i = 0; i < 3; ++i)
    os << std::left << std::setw(14) << to_string(static_cast<ReliableChange>(i + 1)) << std::right << std::setw(6)
       << c[i] << std::setw(8) << (n > 0 ? num(100.0 * static_cast<double>(c[i]) / n, 1) + "%" : "NA") << '\n';
  if (!rows.empty()) {
    const std::array<double, 3> d = {double(c[0]), double(c[1]), double(c[2])};
    const auto chi = chi_square_equal_expectation(d);
    os << "Chi-square (equal expectation): chi2=" << num(chi.chi2, 2) << " df=" << chi.df
       << " p=" << format_p(chi.p) << " n=" << rows.size() << '\n';
  }
  return os.str();
}

}  // namespace promine::outcomes
