#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "promine/cohort.hpp"
#include "promine/error.hpp"
#include "promine/outcomes.hpp"
#include "promine/special.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::outcomes;

namespace {

cohort::CohortRow row(double bl, double fin, int is_new = 1, std::string state = "TN") {
  cohort::CohortRow r;
  r.client_id = "x";
  r.bl_ors = bl;
  r.final_ors = fin;
  r.final_delta_ors = fin - bl;
  r.is_new = is_new;
  r.state = std::move(state);
  return r;
}

// Welford's streaming mean/variance, independent of the two-pass code.
std::pair<double, double> welford(const std::vector<double>& v) {
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(n - 1))};
}

}  // namespace

TEST_CASE("reliable change boundaries") {
  CHECK(reliable_change(-5) == ReliableChange::deteriorate);
  CHECK(reliable_change(-4) == ReliableChange::no_change);
  CHECK(reliable_change(0) == ReliableChange::no_change);
  CHECK(reliable_change(4) == ReliableChange::no_change);
  CHECK(reliable_change(5) == ReliableChange::improve);
  CHECK(reliable_change(4.0000001) == ReliableChange::improve);
  CHECK(static_cast<int>(ReliableChange::improve) == 3);
  CHECK_THROWS_AS(reliable_change(41), ValidationError);
  CHECK_THROWS_AS(reliable_change(std::nan("")), ValidationError);
}

TEST_CASE("reliable change is monotone in delta") {
  int prev = 0;
  for (double d = -40.0; d <= 40.0; d += 0.1) {
    const int c = static_cast<int>(reliable_change(d));
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("clinical significance") {
  CHECK(clinical_significance(20, 30) == true);
  CHECK(clinical_significance(20, 26) == true);
  CHECK(clinical_significance(20, 25) == false);
  CHECK(clinical_significance(25, 24) == false);
  CHECK(!clinical_significance(30, 35).has_value());
  CHECK_THROWS_AS(clinical_significance(-1, 20), ValidationError);
}

TEST_CASE("chi-square under equal expectation") {
  const std::vector<double> counts = {377, 140, 197};
  const auto r = chi_square_equal_expectation(counts);
  // Hand arithmetic: E = 238; (139^2 + 98^2 + 41^2) / 238.
  const double hand = (139.0 * 139.0 + 98.0 * 98.0 + 41.0 * 41.0) / 238.0;
  CHECK(r.chi2 == doctest::Approx(hand).epsilon(1e-12));
  CHECK(r.chi2 == doctest::Approx(128.6).epsilon(0.1 / 128.6));
  CHECK(r.df == 2);
  CHECK(r.p < 0.0005);
  // df = 2: the survival function is exactly exp(-x/2).
  CHECK(r.p == doctest::Approx(std::exp(-hand / 2.0)).epsilon(1e-9));

  const auto u = chi_square_equal_expectation(std::vector<double>{10, 10, 10});
  CHECK(u.chi2 == 0.0);
  CHECK(u.p == doctest::Approx(1.0));
  const auto b = chi_square_equal_expectation(std::vector<double>{8, 2});
  CHECK(b.chi2 == doctest::Approx(3.6));
  CHECK(b.df == 1);
  CHECK_THROWS_AS(chi_square_equal_expectation(std::vector<double>{5}), ValidationError);
  CHECK_THROWS_AS(chi_square_equal_expectation(std::vector<double>{0, 0}), ValidationError);
  CHECK_THROWS_AS(chi_square_equal_expectation(std::vector<double>{-1, 3}), ValidationError);
}

TEST_CASE("chi-square: permutation invariance and linear scaling") {
  Rng rng(4);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> c(2 + rng.below(5));
    for (auto& v : c) v = double(1 + rng.below(50));
    const auto base = chi_square_equal_expectation(c);
    auto p = c;
    rng.shuffle(p);
    CHECK(chi_square_equal_expectation(p).chi2 == doctest::Approx(base.chi2).epsilon(1e-12));
    const double k = double(1 + rng.below(5));
    auto scaled = c;
    for (auto& v : scaled) v *= k;
    CHECK(chi_square_equal_expectation(scaled).chi2 == doctest::Approx(k * base.chi2).epsilon(1e-12));
  }
}

TEST_CASE("special functions against closed forms") {
  // chi-square(2) tail is exp(-x/2); chi-square(1) tail is 2(1 - Phi(sqrt x)).
  for (double x : {0.1, 1.0, 3.0, 10.0, 40.0}) {
    CHECK(special::chi2_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-10));
    CHECK(special::chi2_sf(x, 1) == doctest::Approx(std::erfc(std::sqrt(x / 2))).epsilon(1e-9));
  }
  CHECK(special::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(special::normal_cdf(0.0) == 0.5);
  // t with 1 df is Cauchy: two-sided p = 1 - 2 atan(t)/pi.
  CHECK(special::t_two_sided_p(1.0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(special::t_two_sided_p(3.0, 1) == doctest::Approx(1 - 2 * std::atan(3.0) / M_PI).epsilon(1e-9));
  // F(2, 2) tail is 1 / (1 + f).
  CHECK(special::f_sf(3.0, 2, 2) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(special::beta_inc(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(special::gamma_p(1, 2) == doctest::Approx(1 - std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("descriptives") {
  const auto d = describe(std::vector<double>{1, 2, 3});
  CHECK(d.mean == 2.0);
  CHECK(d.sd == 1.0);
  CHECK(d.min == 1.0);
  CHECK(d.max == 3.0);
  CHECK(describe(std::vector<double>{4, 4, 4}).sd == 0.0);
  CHECK(std::isnan(describe(std::vector<double>{4}).sd));
  CHECK_THROWS_AS(describe(std::vector<double>{}), ValidationError);

  const auto rows = cohort::generate_synthetic(cohort::CohortSpec::defaults());
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.final_delta_ors);
  const auto ours = describe(v);
  const auto [mean, sd] = welford(v);
  CHECK(std::abs(ours.mean - mean) < 1e-9);
  CHECK(std::abs(ours.sd - sd) < 1e-9);
}

TEST_CASE("crosstab: single row, empty set, and engineered new-client margins") {
  const std::vector<cohort::CohortRow> one = {row(20, 30)};
  const auto t = crosstab(one);
  CHECK(t.new_clients.counts[2][1] == 1);
  CHECK(t.new_clients.total() == 1);
  CHECK(t.new_clients.pct(1) == 100.0);

  const auto empty = crosstab(std::vector<cohort::CohortRow>{row(30, 35)});
  CHECK(empty.new_clients.total() == 0);
  CHECK(empty.old_clients.pct(0) == 0.0);
  CHECK_NOTHROW(crosstab_text(empty));

  // (reliable change, significance) cells of the new-client panel.
  std::vector<cohort::CohortRow> rows;
  auto add = [&](int count, double bl, double fin) {
    for (int i = 0; i < count; ++i) rows.push_back(row(bl, fin));
  };
  add(20, 20, 10);  // deteriorate, 0
  add(36, 20, 22);  // no change, 0
  add(1, 23, 26);   // no change, 1
  add(43, 10, 20);  // improve, 0
  add(84, 20, 30);  // improve, 1
  add(9, 30, 38);   // baseline above the cutoff: not counted
  const auto panel = crosstab(rows).new_clients;
  CHECK(panel.total() == 184);
  CHECK(panel.row_total(2) == 127);
  CHECK(panel.pct(panel.row_total(2)) == doctest::Approx(69.02).epsilon(1e-3));
  CHECK(panel.col_total(1) == 85);
  const auto text = crosstab_text(crosstab(rows));
  CHECK(text.find("69.0%") != std::string::npos);
  CHECK(text.find("184") != std::string::npos);
}

TEST_CASE("crosstab equals rowwise application of the two rules") {
  Rng rng(8);
  std::vector<cohort::CohortRow> rows;
  for (int i = 0; i < 500; ++i) {
    const double bl = double(rng.below(41));
    const double fin = double(rng.below(41));
    rows.push_back(row(bl, fin, int(rng.below(2))));
  }
  const auto t = crosstab(rows);
  OutcomeCrosstab oracle;
  for (const auto& r : rows) {
    if (r.bl_ors > 25) continue;
    const int rc = r.final_delta_ors < -4 ? 0 : (r.final_delta_ors > 4 ? 2 : 1);
    const int sig = r.final_ors > 25 ? 1 : 0;
    ++(r.is_new ? oracle.new_clients : oracle.old_clients).counts[rc][sig];
  }
  CHECK(t.new_clients.counts == oracle.new_clients.counts);
  CHECK(t.old_clients.counts == oracle.old_clients.counts);
}

TEST_CASE("reliable change counts and report text") {
  std::vector<cohort::CohortRow> rows = {row(20, 10), row(20, 21), row(30, 38), row(30, 40)};
  const auto c = reliable_change_counts(rows);
  CHECK(c == std::array<std::size_t, 3>{1, 1, 2});
  const auto text = reliable_change_text(rows);
  CHECK(text.find("chi") != std::string::npos);
  CHECK(format_p(0.0001) == "<0.0005");
  CHECK(format_p(0.01234) == "0.0123");
}

TEST_CASE("descriptives report layout") {
  std::vector<cohort::CohortRow> rows = {row(20, 25, 1, "IN"), row(22, 21, 0, "TN"), row(10, 30, 1, "TN")};
  const auto text = descriptives_text(rows);
  CHECK(text.find("Std. Dev.") != std::string::npos);
  CHECK(text.find("Valid N") != std::string::npos);
  const auto csv = descriptives_csv(rows);
  CHECK(csv.rfind("grouping,group,variable,n,min,max,mean,sd", 0) == 0);
}
