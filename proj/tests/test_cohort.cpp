#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "promine/cohort.hpp"
#include "promine/error.hpp"
#include "promine/featsel.hpp"
#include "promine/metrics.hpp"
#include "promine/preprocess.hpp"
#include "support.hpp"

using namespace promine;
using namespace promine::cohort;

namespace {

// Visit with every ORS item set to ors/4 and SRS items to srs/4.
SessionRecord visit(const std::string& id, int index, int days, double ors, std::optional<double> srs = 36.0) {
  SessionRecord s;
  s.client_id = id;
  s.visit_index = index;
  s.days_from_baseline = days;
  for (auto& v : s.ors_items) v = ors / 4.0;
  if (srs)
    for (auto& v : s.srs_items) v = *srs / 4.0;
  return s;
}

ClientProfile profile(const std::string& id, int age = 30, std::vector<int> prior = {}) {
  ClientProfile p;
  p.client_id = id;
  p.gender = "Female";
  p.age = age;
  p.diag_cat = "Mood";
  p.payor_grp = "Medicaid";
  p.county = "C01";
  p.region_type = "Urban";
  p.state = "TN";
  p.prior_visit_days = std::move(prior);
  return p;
}

std::vector<int> target_of(const std::vector<CohortRow>& rows) {
  std::vector<double> d;
  for (const auto& r : rows) d.push_back(r.final_delta_ors);
  return preprocess::binarize_target(d).labels;
}

CohortSpec null_spec(std::size_t n, std::uint64_t seed) {
  CohortSpec s = CohortSpec::defaults();
  s.n = n;
  s.seed = seed;
  for (auto& f : s.numeric) f.log_odds = 0.0;
  for (auto& c : s.categorical)
    for (auto& l : c.levels) l.log_odds = 0.0;
  for (auto& f : s.flags) f.log_odds = 0.0;
  s.new_log_odds = 0.0;
  s.noise_scale = 1.0;
  // Keep baselines clear of the 40-point ceiling: a client at the ceiling
  // cannot improve past the mean, which would tie bl_ors to the label.
  s.numeric_feature("bl_ors").sd = 4.0;
  return s;
}

}  // namespace

TEST_CASE("assembly: visits 1,3,7 give one row with final = visit 7") {
  const std::vector<SessionRecord> s = {visit("a", 1, 0, 20), visit("a", 3, 14, 24), visit("a", 7, 40, 30)};
  const auto rows = assemble_cohort(s, std::vector<ClientProfile>{profile("a")});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].bl_ors == 20.0);
  CHECK(rows[0].third_delta_ors == 4.0);
  CHECK(rows[0].final_visit == 7);
  CHECK(rows[0].final_ors == 30.0);
  CHECK(rows[0].final_delta_ors == 10.0);
}

TEST_CASE("assembly: no third visit excludes the client") {
  const std::vector<SessionRecord> s = {visit("a", 1, 0, 20), visit("a", 2, 7, 22), visit("a", 5, 30, 25)};
  std::vector<Exclusion> ex;
  const auto rows = assemble_cohort(s, std::vector<ClientProfile>{profile("a")}, &ex);
  CHECK(rows.empty());
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].reason.find("3rd") != std::string::npos);
}

TEST_CASE("assembly: final is the latest ORS in the 5-10 window") {
  const std::vector<SessionRecord> s = {visit("a", 1, 0, 20), visit("a", 3, 14, 22), visit("a", 6, 35, 25),
                                        visit("a", 9, 60, 31), visit("a", 11, 80, 39)};
  const auto rows = assemble_cohort(s, std::vector<ClientProfile>{profile("a")});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].final_visit == 9);
  CHECK(rows[0].final_ors == 31.0);
}

TEST_CASE("assembly: skipped item means no total; age and profile rules") {
  auto v3 = visit("a", 3, 14, 24);
  v3.ors_items[2].reset();
  std::vector<SessionRecord> s = {visit("a", 1, 0, 20), v3, visit("a", 6, 30, 28)};
  CHECK(!v3.ors_total());
  CHECK(assemble_cohort(s, std::vector<ClientProfile>{profile("a")}).empty());

  s = {visit("b", 1, 0, 20), visit("b", 3, 14, 24), visit("b", 6, 30, 28)};
  CHECK(assemble_cohort(s, std::vector<ClientProfile>{profile("b", 13)}).empty());
  CHECK(assemble_cohort(s, std::vector<ClientProfile>{profile("b", 14)}).size() == 1);
  CHECK(assemble_cohort(s, std::vector<ClientProfile>{}).empty());
}

TEST_CASE("assembly: missing baseline SRS leaves SRS fields empty") {
  std::vector<SessionRecord> s = {visit("a", 1, 0, 20, std::nullopt), visit("a", 3, 14, 24), visit("a", 6, 30, 28)};
  const auto rows = assemble_cohort(s, std::vector<ClientProfile>{profile("a")});
  REQUIRE(rows.size() == 1);
  CHECK(!rows[0].bl_srs);
  CHECK(!rows[0].third_delta_srs);
}

TEST_CASE("assembly: service flags accumulate up to the final visit") {
  auto v1 = visit("a", 1, 0, 20);
  v1.set(ServiceFlag::medical);
  auto v9 = visit("a", 9, 60, 30);
  v9.set(ServiceFlag::grp_therapy);
  auto v10 = visit("a", 10, 70, 30);
  v10.ors_items[0].reset();
  v10.set(ServiceFlag::case_mgmt);  // after the final ORS visit (10 has no total)
  std::vector<SessionRecord> s = {v1, visit("a", 3, 14, 24), v9, v10};
  const auto rows = assemble_cohort(s, std::vector<ClientProfile>{profile("a")});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].service_bins[static_cast<int>(ServiceFlag::medical)] == 1);
  CHECK(rows[0].service_bins[static_cast<int>(ServiceFlag::grp_therapy)] == 1);
  CHECK(rows[0].service_bins[static_cast<int>(ServiceFlag::case_mgmt)] == 0);
}

TEST_CASE("assembly errors name the client and visit") {
  auto bad = visit("zz", 3, 14, 24);
  bad.ors_items[1] = 11.0;
  std::vector<SessionRecord> s = {visit("zz", 1, 0, 20), bad};
  try {
    assemble_cohort(s, std::vector<ClientProfile>{profile("zz")});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'zz'") != std::string::npos);
    CHECK(msg.find("visit 3") != std::string::npos);
  }
  s = {visit("y", 1, 10, 20), visit("y", 3, 5, 24)};
  CHECK_THROWS_AS(assemble_cohort(s, std::vector<ClientProfile>{profile("y")}), ValidationError);
  s = {visit("y", 1, 0, 20), visit("y", 1, 5, 24)};
  CHECK_THROWS_AS(assemble_cohort(s, std::vector<ClientProfile>{profile("y")}), ValidationError);
}

TEST_CASE("assembly is order-insensitive and idempotent") {
  Rng rng(17);
  std::vector<SessionRecord> s;
  std::vector<ClientProfile> p;
  for (int c = 0; c < 30; ++c) {
    const std::string id = "c" + std::to_string(c);
    p.push_back(profile(id, 20 + c, c % 3 ? std::vector<int>{} : std::vector<int>{40}));
    int days = 0;
    for (int v = 1; v <= 10; ++v) {
      if (v != 1 && rng.bernoulli(0.2)) continue;
      s.push_back(visit(id, v, days, double(rng.below(41))));
      days += 7;
    }
  }
  const auto a = assemble_cohort(s, p);
  for (int it = 0; it < 5; ++it) {
    auto shuffled = s;
    rng.shuffle(shuffled);
    CHECK(assemble_cohort(shuffled, p) == a);
  }
  for (const auto& r : a) {
    CHECK(r.bl_ors + r.third_delta_ors >= 0.0);
    CHECK(r.bl_ors + r.third_delta_ors <= 40.0);
    CHECK(r.bl_ors + r.final_delta_ors >= 0.0);
    CHECK(r.bl_ors + r.final_delta_ors <= 40.0);
  }
}

TEST_CASE("new-client rule") {
  CHECK(classify_new(std::vector<int>{91}));
  CHECK_FALSE(classify_new(std::vector<int>{89}));
  CHECK_FALSE(classify_new(std::vector<int>{90}));
  CHECK(classify_new(std::vector<int>{}));
  CHECK_FALSE(classify_new(std::vector<int>{400, 12}));
}

TEST_CASE("sessions, clients and cohort CSV round-trip") {
  auto v = visit("a", 1, 0, 20);
  v.set(ServiceFlag::therapy);
  v.set(ServiceFlag::ind_therapy);
  v.srs_items[3].reset();
  const std::vector<SessionRecord> s = {v, visit("a", 3, 14, 22.5)};
  std::stringstream ss;
  write_sessions(ss, s);
  const auto back = read_sessions(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].service_flags == v.service_flags);
  CHECK(!back[0].srs_items[3]);
  CHECK(back[1].ors_items[0] == 22.5 / 4.0);

  const std::vector<ClientProfile> p = {profile("a", 30, {100, 5})};
  std::stringstream ps;
  write_profiles(ps, p);
  const auto pb = read_profiles(ps);
  REQUIRE(pb.size() == 1);
  CHECK(pb[0].prior_visit_days == std::vector<int>{100, 5});

  auto spec = CohortSpec::defaults();
  spec.n = 50;
  const auto rows = generate_synthetic(spec);
  std::stringstream cs;
  write_cohort(cs, rows);
  std::stringstream cs2(cs.str());
  CHECK(read_cohort(cs2) == rows);
}

TEST_CASE("synthetic generator: determinism, shape and bounds") {
  auto spec = CohortSpec::defaults();
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a == b);
  REQUIRE(a.size() == 714);
  std::size_t news = 0;
  for (const auto& r : a) {
    news += r.is_new;
    CHECK(r.bl_ors >= 0.0);
    CHECK(r.bl_ors <= 40.0);
    CHECK(r.bl_ors + r.third_delta_ors >= 0.0);
    CHECK(r.bl_ors + r.third_delta_ors <= 40.0);
    CHECK(r.bl_ors + r.final_delta_ors >= -1e-9);
    CHECK(r.bl_ors + r.final_delta_ors <= 40.0 + 1e-9);
    CHECK(r.age >= kMinAge);
  }
  CHECK(news == 253);
  spec.seed = 43;
  CHECK(generate_synthetic(spec) != a);
}

TEST_CASE("synthetic generator: zero planted effects give uninformative features") {
  const auto rows = generate_synthetic(null_spec(10000, 5));
  const auto y = target_of(rows);
  std::vector<double> bl, d3, age;
  for (const auto& r : rows) {
    bl.push_back(r.bl_ors);
    d3.push_back(r.third_delta_ors);
    age.push_back(r.age);
  }
  CHECK(std::abs(metrics::auc(bl, y) - 0.5) < 0.02);
  CHECK(std::abs(metrics::auc(d3, y) - 0.5) < 0.02);
  CHECK(std::abs(metrics::auc(age, y) - 0.5) < 0.02);
}

TEST_CASE("synthetic generator: a lone planted effect is recovered by the median-split odds ratio") {
  // With unit logistic noise and a single binary driver, P(y | x) is exactly
  // logistic in x, so the marginal OR equals exp(planted log-odds).
  const double planted = std::log(5.0);
  auto run = [&](std::size_t n, std::uint64_t seed) {
    auto spec = null_spec(n, seed);
    spec.numeric_feature("third_delta_ors").log_odds = planted;
    const auto rows = generate_synthetic(spec);
    const auto y = target_of(rows);
    std::vector<double> d3;
    for (const auto& r : rows) d3.push_back(r.third_delta_ors);
    auto sorted = d3;
    std::sort(sorted.begin(), sorted.end());
    const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<int> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = d3[i] > med ? 1 : 0;
    return featsel::odds_ratio(x, y);
  };
  const auto r = run(4000, 1);
  CHECK(r.ci_low <= 5.0);
  CHECK(r.ci_high >= 5.0);

  // Standard error of the estimate halves when n quadruples.
  const auto small = run(1000, 2);
  const auto big = run(4000, 3);
  CHECK(small.se_log / big.se_log == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("default cohort reproduces the calibrated effect directions") {
  const auto rows = generate_synthetic(CohortSpec::defaults());
  auto table = to_feature_table(rows, default_features());
  table.data.target = target_of(rows);
  const auto ors = featsel::odds_ratio_table(table.data);
  auto find = [&](const std::string& name) -> const featsel::OddsRatioReport& {
    for (const auto& r : ors)
      if (r.feature == name) return r;
    FAIL("missing " << name);
    throw;
  };
  CHECK(find("third_delta_ors").direction.find("higher") != std::string::npos);
  CHECK(find("bl_ors").direction.find("lower") != std::string::npos);
  CHECK(find("third_delta_ors").odds_ratio > 5.0);
  CHECK(find("bl_ors").odds_ratio > 5.0);
  CHECK(find("third_delta_ors").significant());
}

TEST_CASE("cohort spec JSON round-trip and validation") {
  auto spec = CohortSpec::defaults();
  spec.n = 99;
  spec.numeric_feature("age").log_odds = 0.25;
  const auto back = cohort_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  CHECK_THROWS_AS(cohort_spec_from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(cohort_spec_from_json({{"class_balance", 1.5}}), ValidationError);
  nlohmann::json bad_levels = {
      {"categorical", {{{"name", "gender"}, {"levels", {{{"name", "F"}, {"frequency", 0.3}}}}}}}};
  CHECK_THROWS_AS(cohort_spec_from_json(bad_levels), ValidationError);
}

TEST_CASE("feature table: categorical levels sorted, missing rows dropped") {
  auto spec = CohortSpec::defaults();
  spec.n = 40;
  auto rows = generate_synthetic(spec);
  rows[3].bl_srs.reset();
  const auto t = to_feature_table(rows, {"bl_srs", "gender", "is_new"});
  CHECK(t.dropped_incomplete == 1);
  CHECK(t.data.rows() == 39);
  const auto& g = t.data.column("gender");
  CHECK(g.kind == ColumnKind::categorical);
  CHECK(std::is_sorted(g.levels.begin(), g.levels.end()));
  CHECK_THROWS_AS(to_feature_table(rows, {"nonsense"}), ConfigError);
}
