#include "promine/survey.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "promine/csv.hpp"
#include "promine/error.hpp"
#include "promine/random.hpp"
#include "promine/special.hpp"

namespace promine::survey {
namespace {

const std::vector<std::string> kRequired = {"clinician_id", "q1", "q2", "q3", "q4", "q5", "q6", "q7",
                                            "q8", "q9", "q10", "years_exp", "age", "gender", "adoption_rate"};
const std::vector<std::string> kOptional = {"bl_ors", "bl_srs", "final_delta_ors"};

double opt_num(const std::string& cell, const std::string& what) {
  const auto v = csv::parse_optional_double(cell, what);
  return v ? *v : NAN;
}

std::string cell_or_empty(double v) { return std::isnan(v) ? "" : csv::exact(v); }

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(std::span<const double> v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::string fmt3(double v) {
  // SPSS style: ".450", "-.178", "1.000".
  std::string s = csv::fixed(v, 3);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

std::string pad(std::string s, std::size_t n) {
  if (s.size() < n) s.append(n - s.size(), ' ');
  return s;
}

}  // namespace

std::vector<SurveyResponse> read_survey(std::istream& in) {
  const auto t = csv::read(in);
  std::vector<std::size_t> idx;
  for (const auto& c : kRequired) idx.push_back(t.require(c));
  const auto bo = t.column("bl_ors"), bs = t.column("bl_srs"), fd = t.column("final_delta_ors");
  std::vector<SurveyResponse> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    SurveyResponse s;
    s.clinician_id = row[idx[0]];
    if (s.clinician_id.empty()) throw ValidationError("survey row " + std::to_string(r + 2) + ": empty clinician_id");
    const std::string where = "clinician " + s.clinician_id;
    for (std::size_t q = 0; q < kItems; ++q) {
      s.items[q] = csv::parse_optional_double(row[idx[1 + q]], where + " q" + std::to_string(q + 1));
      if (s.items[q] && (*s.items[q] < kLikertMin || *s.items[q] > kLikertMax || *s.items[q] != std::floor(*s.items[q])))
        throw ValidationError(where + ": q" + std::to_string(q + 1) + " must be an integer in [1, 4]");
    }
    s.years_exp = opt_num(row[idx[11]], where + " years_exp");
    s.age = opt_num(row[idx[12]], where + " age");
    s.gender = row[idx[13]];
    s.adoption_rate = opt_num(row[idx[14]], where + " adoption_rate");
    if (!std::isnan(s.adoption_rate) && (s.adoption_rate < 0.0 || s.adoption_rate > 1.0))
      throw ValidationError(where + ": adoption_rate must lie in [0, 1]");
    if (bo) s.bl_ors = opt_num(row[*bo], where + " bl_ors");
    if (bs) s.bl_srs = opt_num(row[*bs], where + " bl_srs");
    if (fd) s.final_delta_ors = opt_num(row[*fd], where + " final_delta_ors");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SurveyResponse> read_survey_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open survey file " + path.string());
  return read_survey(in);
}

void write_survey(std::ostream& out, std::span<const SurveyResponse> rows) {
  std::vector<std::string> header = kRequired;
  header.insert(header.end(), kOptional.begin(), kOptional.end());
  csv::write_row(out, header);
  for (const auto& s : rows) {
    std::vector<std::string> f{s.clinician_id};
    for (const auto& q : s.items) f.push_back(q ? csv::exact(*q) : "");
    for (double v : {s.years_exp, s.age}) f.push_back(cell_or_empty(v));
    f.push_back(s.gender);
    for (double v : {s.adoption_rate, s.bl_ors, s.bl_srs, s.final_delta_ors}) f.push_back(cell_or_empty(v));
    csv::write_row(out, f);
  }
}

std::vector<SurveyResponse> generate_survey(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto likert = [](double x) { return std::clamp(std::round(x), kLikertMin, kLikertMax); };
  std::vector<SurveyResponse> out;
  for (std::size_t i = 0; i < n; ++i) {
    SurveyResponse s;
    char id[32];
    std::snprintf(id, sizeof id, "K%03zu", i + 1);
    s.clinician_id = id;
    const double pu = rng.normal(), nb = rng.normal(), cb = rng.normal();
    const std::array<double, 3> latent = {pu, nb, cb};
    for (std::size_t q = 0; q < 9; ++q) {
      double v = likert(2.5 + 0.8 * latent[q / 3] + 0.5 * rng.normal());
      if (q + 1 == kReverseKeyed[0] || q + 1 == kReverseKeyed[1]) v = 5.0 - v;
      s.items[q] = v;
    }
    s.items[9] = likert(2.6 + 0.35 * pu + 0.6 * nb + 0.5 * rng.normal());
    s.age = std::round(std::clamp(rng.normal(42.0, 10.0), 24.0, 68.0));
    s.years_exp = std::round(std::clamp((s.age - 24.0) * 0.6 + rng.normal(0.0, 3.0), 0.0, 40.0));
    s.gender = rng.bernoulli(0.7) ? "F" : "M";
    s.adoption_rate = std::clamp(0.55 + 0.01 * (s.age - 42.0) + 0.15 * rng.normal(), 0.0, 1.0);
    s.adoption_rate = std::round(s.adoption_rate * 1000.0) / 1000.0;
    if (rng.bernoulli(0.5)) {
      s.bl_ors = std::round(rng.normal(21.0, 4.0) * 10.0) / 10.0;
      s.bl_srs = std::round(rng.normal(34.0, 2.5) * 10.0) / 10.0;
      s.final_delta_ors = std::round(rng.normal(4.0, 3.0) * 10.0) / 10.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TpbScores> tpb_scores(std::span<const SurveyResponse> rows, bool reverse_key) {
  std::vector<TpbScores> out;
  for (const auto& r : rows) {
    auto item = [&](std::size_t q) -> std::optional<double> {
      const auto& v = r.items[q - 1];
      if (!v) return std::nullopt;
      const bool flip = reverse_key && (q == kReverseKeyed[0] || q == kReverseKeyed[1]);
      return flip ? 5.0 - *v : *v;
    };
    auto composite = [&](std::size_t first, std::size_t last) {
      double sum = 0.0;
      for (std::size_t q = first; q <= last; ++q) {
        const auto v = item(q);
        if (!v) return static_cast<double>(NAN);
        sum += *v;
      }
      return sum / static_cast<double>(last - first + 1);
    };
    out.push_back({r.clinician_id, composite(1, 3), composite(4, 6), composite(7, 9), composite(10, 10)});
  }
  return out;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("spearman: length mismatch");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isnan(x[i]) && !std::isnan(y[i])) {
      a.push_back(x[i]);
      b.push_back(y[i]);
    }
  Correlation c;
  c.n = a.size();
  if (c.n < 3) throw ValidationError("spearman: need at least 3 complete pairs");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return c;  // constant variable: undefined
  const double rho = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  c.rho = rho;
  const double df = static_cast<double>(c.n) - 2.0;
  if (std::abs(rho) == 1.0) {
    c.p = 0.0;
  } else if (df > 0.0) {
    c.p = special::t_two_sided_p(rho * std::sqrt(df / (1.0 - rho * rho)), df);
  }
  return c;
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& names,
                                     const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw ValidationError("correlation_matrix: names and columns differ");
  CorrelationMatrix m;
  m.names = names;
  const std::size_t k = names.size();
  m.cells.assign(k, std::vector<Correlation>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      Correlation c;
      if (i == j) {
        c.n = static_cast<std::size_t>(
            std::count_if(columns[i].begin(), columns[i].end(), [](double v) { return !std::isnan(v); }));
        c.rho = 1.0;
      } else {
        try {
          c = spearman(columns[i], columns[j]);
        } catch (const ValidationError&) {
          for (std::size_t r = 0; r < columns[i].size(); ++r)
            if (!std::isnan(columns[i][r]) && !std::isnan(columns[j][r])) ++c.n;
        }
      }
      m.cells[i][j] = c;
      m.cells[j][i] = c;
    }
  }
  return m;
}

std::string CorrelationMatrix::text() const {
  std::size_t w = 12;
  for (const auto& n : names) w = std::max(w, n.size() + 1);
  const std::size_t cw = std::max<std::size_t>(10, w);
  std::ostringstream os;
  os << pad("", w) << pad("", 17);
  for (const auto& n : names) os << pad(n, cw);
  os << "\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::ostringstream r1, r2, r3;
    r1 << pad(names[i], w) << pad("Correlation", 17);
    r2 << pad("", w) << pad("Sig. (2-tailed)", 17);
    r3 << pad("", w) << pad("N", 17);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto& c = cells[i][j];
      std::string rho = c.rho ? fmt3(*c.rho) : "";
      if (i != j && c.p) rho += *c.p < 0.01 ? "**" : *c.p < 0.05 ? "*" : "";
      r1 << pad(rho, cw);
      r2 << pad(i == j ? "." : c.p ? fmt3(*c.p) : "", cw);
      r3 << pad(std::to_string(c.n), cw);
    }
    os << r1.str() << "\n" << r2.str() << "\n" << r3.str() << "\n";
  }
  os << "** p < .01  * p < .05 (2-tailed)\n";
  return os.str();
}

std::string CorrelationMatrix::csv() const {
  std::ostringstream os;
  csv::write_row(os, {"var1", "var2", "rho", "p", "n"});
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const auto& c = cells[i][j];
      csv::write_row(os, {names[i], names[j], c.rho ? csv::fixed(*c.rho, 6) : "", c.p ? csv::fixed(*c.p, 6) : "",
                          std::to_string(c.n)});
    }
  return os.str();
}

OlsResult ols_regression(std::span<const double> y, const std::vector<std::vector<double>>& columns,
                         const std::vector<std::string>& names) {
  const std::size_t n = y.size(), k = columns.size();
  for (const auto& c : columns)
    if (c.size() != n) throw ValidationError("ols_regression: column length differs from y");
  if (n <= k + 1) throw ValidationError("ols_regression: need more observations than predictors + 1");
  OlsResult res;
  res.names.push_back("(intercept)");
  for (std::size_t j = 0; j < k; ++j) res.names.push_back(j < names.size() ? names[j] : "x" + std::to_string(j + 1));

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
  Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) x(r, static_cast<Eigen::Index>(j + 1)) = columns[j][i];
    yv(r) = y[i];
  }
  // Add columns one at a time; a column that does not raise the rank is
  // collinear with the ones before it.
  std::vector<std::string> collinear;
  for (std::size_t j = 1; j <= k; ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.leftCols(static_cast<Eigen::Index>(j + 1)));
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(j + 1)) collinear.push_back(res.names[j]);
  }
  if (!collinear.empty()) {
    std::string list;
    for (const auto& c : collinear) list += (list.empty() ? "" : ", ") + c;
    throw ValidationError("ols_regression: design matrix is rank deficient; collinear columns: " + list);
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(yv);
  const Eigen::VectorXd resid = yv - x * beta;
  const double ybar = yv.mean();
  const double sst = (yv.array() - ybar).square().sum();
  const double sse = resid.squaredNorm();
  res.coefficients.assign(beta.data(), beta.data() + beta.size());
  res.residuals.assign(resid.data(), resid.data() + resid.size());
  res.df_model = static_cast<double>(k);
  res.df_resid = static_cast<double>(n - k - 1);
  if (sst == 0.0) throw ValidationError("ols_regression: response is constant");
  res.r2 = 1.0 - sse / sst;
  // Exact fits leave rounding-level residuals; report them as perfect.
  if (sse <= 1e-24 * sst) {
    res.r2 = 1.0;
    std::fill(res.residuals.begin(), res.residuals.end(), 0.0);
  }
  res.adj_r2 = 1.0 - (1.0 - res.r2) * static_cast<double>(n - 1) / res.df_resid;
  if (res.r2 >= 1.0) {
    res.f = INFINITY;
    res.p = 0.0;
  } else {
    res.f = (res.r2 / res.df_model) / ((1.0 - res.r2) / res.df_resid);
    res.p = k ? special::f_sf(res.f, res.df_model, res.df_resid) : 1.0;
  }
  return res;
}

TTestResult t_test_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("t_test_two_sample: need at least 2 observations per group");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = var_of(a, ma), vb = var_of(b, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double qa = va / na, qb = vb / nb;
  TTestResult r;
  const double diff = ma - mb;
  if (qa + qb == 0.0) {
    // No spread at all: equal means give t = 0; otherwise the difference is certain.
    r.df = na + nb - 2.0;
    r.t = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    r.p = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(qa + qb);
  r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  r.p = special::t_two_sided_p(r.t, r.df);
  return r;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ValidationError("anova_oneway: need at least two groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ValidationError("anova_oneway: every group needs at least 2 observations");
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n - groups.size());
  if (ssb == 0.0) return r;  // F = 0, p = 1
  if (ssw == 0.0) {
    r.f = INFINITY;
    r.p = 0.0;
    return r;
  }
  r.f = (ssb / r.df_between) / (ssw / r.df_within);
  r.p = special::f_sf(r.f, r.df_between, r.df_within);
  return r;
}

std::string survey_report(std::span<const SurveyResponse> rows, bool reverse_key) {
  const auto tpb = tpb_scores(rows, reverse_key);
  std::vector<std::vector<double>> cols(9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cols[0].push_back(tpb[i].pu);
    cols[1].push_back(tpb[i].nb);
    cols[2].push_back(tpb[i].cb);
    cols[3].push_back(tpb[i].intent);
    cols[4].push_back(rows[i].adoption_rate);
    cols[5].push_back(rows[i].age);
    cols[6].push_back(rows[i].bl_ors);
    cols[7].push_back(rows[i].bl_srs);
    cols[8].push_back(rows[i].final_delta_ors);
  }
  const std::vector<std::string> names = {"PU",     "NB",      "CB",     "Intent",         "Adopt Rate",
                                          "age",    "bl_ors",  "bl_srs", "final delta_ors"};
  std::ostringstream os;
  os << "TPB factor correlations (Spearman, pairwise-complete; items 3 and 7 "
     << (reverse_key ? "reverse-keyed" : "as answered") << ")\n\n";
  os << correlation_matrix(names, cols).text() << "\n";

  auto regress = [&](const std::string& label, std::size_t response, std::vector<std::size_t> preds) {
    std::vector<double> y;
    std::vector<std::vector<double>> x(preds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      bool ok = !std::isnan(cols[response][i]);
      for (auto p : preds) ok = ok && !std::isnan(cols[p][i]);
      if (!ok) continue;
      y.push_back(cols[response][i]);
      for (std::size_t j = 0; j < preds.size(); ++j) x[j].push_back(cols[preds[j]][i]);
    }
    std::vector<std::string> pn;
    for (auto p : preds) pn.push_back(names[p]);
    os << label << " ~ ";
    for (std::size_t j = 0; j < pn.size(); ++j) os << (j ? " + " : "") << pn[j];
    os << "\n";
    try {
      const auto r = ols_regression(y, x, pn);
      os << "  n = " << y.size() << ", R^2 = " << csv::fixed(r.r2, 3) << ", F = " << csv::fixed(r.f, 3)
         << ", df = (" << r.df_model << ", " << r.df_resid << "), p = " << csv::fixed(r.p, 4) << "\n";
      for (std::size_t j = 0; j < r.names.size(); ++j)
        os << "  " << pad(r.names[j], 14) << csv::fixed(r.coefficients[j], 4) << "\n";
    } catch (const ValidationError& e) {
      os << "  not estimable: " << e.what() << "\n";
    }
  };
  regress("Intent", 3, {0, 1, 2});
  regress("Adopt Rate", 4, {0, 1, 2, 3});
  return os.str();
}

}  // namespace promine::survey
