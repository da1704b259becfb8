#include "promine/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "promine/csv.hpp"
#include "promine/error.hpp"
#include "promine/random.hpp"

namespace promine::cohort {
namespace {

std::optional<double> total(const std::array<std::optional<double>, 4>& items) {
  double sum = 0.0;
  for (const auto& v : items) {
    if (!v) return std::nullopt;
    sum += *v;
  }
  return sum;
}

std::string where(const SessionRecord& s) {
  return "client '" + s.client_id + "' visit " + std::to_string(s.visit_index);
}

void validate_items(const SessionRecord& s) {
  auto check = [&](const std::array<std::optional<double>, 4>& items, const char* scale) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& v = items[i];
      if (v && !(*v >= kItemMin && *v <= kItemMax))
        throw ValidationError(std::string(scale) + std::to_string(i + 1) + " score " +
                              csv::exact(*v) + " outside [0,10] for " + where(s));
    }
  };
  check(s.ors_items, "ors");
  check(s.srs_items, "srs");
  if (s.visit_index < 1) throw ValidationError("visit_index must be >= 1 for " + where(s));
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace

std::optional<double> SessionRecord::ors_total() const { return total(ors_items); }
std::optional<double> SessionRecord::srs_total() const { return total(srs_items); }

bool classify_new(std::span<const int> prior_visit_days) {
  for (int d : prior_visit_days)
    if (d >= 0 && d <= kNewClientWindowDays) return false;
  return true;
}

std::vector<CohortRow> assemble_cohort(std::span<const SessionRecord> sessions,
                                       std::span<const ClientProfile> profiles,
                                       std::vector<Exclusion>* excluded) {
  std::map<std::string, std::vector<const SessionRecord*>> by_client;
  for (const auto& s : sessions) {
    validate_items(s);
    by_client[s.client_id].push_back(&s);
  }
  std::map<std::string, const ClientProfile*> profile_of;
  for (const auto& p : profiles) profile_of[p.client_id] = &p;

  auto exclude = [&](const std::string& id, std::string reason) {
    if (excluded) excluded->push_back({id, std::move(reason)});
  };

  std::vector<CohortRow> rows;
  for (auto& [id, visits] : by_client) {
    std::sort(visits.begin(), visits.end(),
              [](const SessionRecord* a, const SessionRecord* b) { return a->visit_index < b->visit_index; });
    for (std::size_t i = 1; i < visits.size(); ++i) {
      if (visits[i]->visit_index == visits[i - 1]->visit_index)
        throw ValidationError("duplicate visit_index for " + where(*visits[i]));
      if (visits[i]->days_from_baseline < visits[i - 1]->days_from_baseline)
        throw ValidationError("days_from_baseline decreases at " + where(*visits[i]));
    }

    const SessionRecord* baseline = nullptr;
    const SessionRecord* third = nullptr;
    const SessionRecord* final_visit = nullptr;
    for (const auto* v : visits) {
      if (!v->ors_total()) continue;
      if (v->visit_index == 1) baseline = v;
      if (v->visit_index == 3) third = v;
      if (v->visit_index >= kFinalWindowFirst && v->visit_index <= kFinalWindowLast) final_visit = v;
    }
    if (!baseline) {
      exclude(id, "no baseline ORS");
      continue;
    }
    if (!third) {
      exclude(id, "no 3rd-visit ORS");
      continue;
    }
    if (!final_visit) {
      exclude(id, "no ORS between visits 5 and 10");
      continue;
    }
    auto pit = profile_of.find(id);
    if (pit == profile_of.end()) {
      exclude(id, "no client profile");
      continue;
    }
    const ClientProfile& prof = *pit->second;
    if (prof.age < kMinAge) {
      exclude(id, "age under 14");
      continue;
    }

    CohortRow row;
    row.client_id = id;
    row.bl_ors = *baseline->ors_total();
    row.third_delta_ors = *third->ors_total() - row.bl_ors;
    row.final_ors = *final_visit->ors_total();
    row.final_delta_ors = row.final_ors - row.bl_ors;
    row.final_visit = final_visit->visit_index;
    row.bl_srs = baseline->srs_total();
    if (row.bl_srs && third->srs_total()) row.third_delta_srs = *third->srs_total() - *row.bl_srs;
    for (const auto* v : visits) {
      if (v->visit_index > final_visit->visit_index) break;
      for (std::size_t f = 0; f < kServiceFlagCount; ++f)
        if (v->has(static_cast<ServiceFlag>(f))) row.service_bins[f] = 1;
    }
    row.gender = prof.gender;
    row.age = prof.age;
    row.diag_cat = prof.diag_cat;
    row.payor_grp = prof.payor_grp;
    row.county = prof.county;
    row.region_type = prof.region_type;
    row.state = prof.state;
    row.is_new = classify_new(prof.prior_visit_days) ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- Synthetic -------------------------------------------------------------------

CohortSpec CohortSpec::defaults() {
  CohortSpec s;
  // Conditional log-odds chosen (with noise_scale 0.6) so that the marginal
  // median-split odds ratios average about 8 for bl_ors (lower is better) and
  // 11 for third_delta_ors, with the weaker effects near 1.7.
  s.numeric = {
      {"bl_ors", 21.0, 8.7, -3.2},
      {"bl_srs", 34.0, 5.0, -0.9},
      {"third_delta_ors", 2.5, 6.0, 3.5},
      {"third_delta_srs", 1.0, 4.0, 0.0},
      {"age", 38.0, 13.0, 0.0},
  };
  s.categorical = {
      {"gender", {{"Female", 0.6, 0.0}, {"Male", 0.4, 0.9}}},
      {"diag_cat",
       {{"Mood", 0.40, 0.55}, {"Anxiety", 0.20, 0.0}, {"Substance Abuse", 0.15, 0.55},
        {"Psychotic", 0.10, 0.0}, {"Other", 0.15, 0.0}}},
      {"payor_grp",
       {{"Medicaid", 0.45, 0.0}, {"Medicare", 0.15, 0.0}, {"Commercial", 0.15, 1.2},
        {"Safety Net", 0.10, 0.0}, {"Other", 0.15, 0.0}}},
      {"county",
       {{"C01", 0.20, 0.0}, {"C02", 0.15, 0.0}, {"C03", 0.15, 0.0}, {"C04", 0.15, 0.0},
        {"C05", 0.10, 0.0}, {"C06", 0.10, 0.0}, {"C07", 0.10, 0.0}, {"C08", 0.05, 0.0}}},
      {"region_type", {{"Urban", 0.55, 0.0}, {"Rural", 0.45, 0.0}}},
      {"state", {{"IN", 271.0 / 714.0, 0.0}, {"TN", 443.0 / 714.0, 0.0}}},
  };
  s.flags = {
      {"q_case_mgmt_bin", 0.25, 0.0},  {"q_medical_bin", 0.45, 0.0},
      {"q_therapy_bin", 1.0, 0.0},     {"q_ind_therapy_bin", 1.0, 0.0},
      {"q_grp_therapy_bin", 0.0, 0.0},
  };
  return s;
}

NumericFeatureSpec& CohortSpec::numeric_feature(const std::string& name) {
  for (auto& f : numeric)
    if (f.name == name) return f;
  throw ValidationError("cohort spec has no numeric feature '" + name + "'");
}

const NumericFeatureSpec& CohortSpec::numeric_feature(const std::string& name) const {
  return const_cast<CohortSpec*>(this)->numeric_feature(name);
}

namespace {

const std::vector<std::string> kNumericOrder = {"bl_ors", "bl_srs", "third_delta_ors", "third_delta_srs",
                                                "age"};
const std::vector<std::string> kCategoricalOrder = {"gender",  "diag_cat",    "payor_grp",
                                                    "county",  "region_type", "state"};

const CategoricalFeatureSpec& find_categorical(const CohortSpec& s, const std::string& name) {
  for (const auto& c : s.categorical)
    if (c.name == name) return c;
  throw ValidationError("cohort spec has no categorical feature '" + name + "'");
}

const FlagSpec& find_flag(const CohortSpec& s, const std::string& name) {
  for (const auto& f : s.flags)
    if (f.name == name) return f;
  throw ValidationError("cohort spec has no flag '" + name + "'");
}

}  // namespace

void CohortSpec::validate() const {
  if (n < 2) throw ValidationError("cohort spec: n must be at least 2");
  if (!(class_balance > 0.0 && class_balance < 1.0))
    throw ValidationError("cohort spec: class_balance must lie in (0, 1)");
  if (!(new_fraction >= 0.0 && new_fraction <= 1.0))
    throw ValidationError("cohort spec: new_fraction must lie in [0, 1]");
  if (!(noise_scale >= 0.0)) throw ValidationError("cohort spec: noise_scale must be >= 0");
  if (!(delta_scale > 0.0)) throw ValidationError("cohort spec: delta_scale must be > 0");
  for (const auto& name : kNumericOrder) {
    const auto& f = numeric_feature(name);
    if (!(f.sd >= 0.0)) throw ValidationError("cohort spec: sd for '" + name + "' must be >= 0");
  }
  for (const auto& f : numeric)
    if (std::find(kNumericOrder.begin(), kNumericOrder.end(), f.name) == kNumericOrder.end())
      throw ValidationError("cohort spec: unsupported numeric feature '" + f.name + "'");
  for (const auto& name : kCategoricalOrder) {
    const auto& c = find_categorical(*this, name);
    if (c.levels.empty()) throw ValidationError("cohort spec: '" + name + "' has no levels");
    double sum = 0.0;
    for (const auto& l : c.levels) {
      if (!(l.frequency >= 0.0))
        throw ValidationError("cohort spec: negative frequency for " + name + "=" + l.name);
      sum += l.frequency;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ValidationError("cohort spec: level frequencies for '" + name + "' sum to " +
                            csv::exact(sum) + ", not 1");
  }
  for (const auto* col : kServiceFlagColumns) {
    const auto& f = find_flag(*this, col);
    if (!(f.rate >= 0.0 && f.rate <= 1.0))
      throw ValidationError("cohort spec: rate for '" + f.name + "' must lie in [0, 1]");
  }
}

std::vector<CohortRow> generate_synthetic(const CohortSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n;

  std::vector<CohortRow> rows(n);
  const auto& bl_ors = spec.numeric_feature("bl_ors");
  const auto& bl_srs = spec.numeric_feature("bl_srs");
  const auto& d_ors = spec.numeric_feature("third_delta_ors");
  const auto& d_srs = spec.numeric_feature("third_delta_srs");
  const auto& age = spec.numeric_feature("age");

  std::vector<const CategoricalFeatureSpec*> cats;
  for (const auto& name : kCategoricalOrder) cats.push_back(&find_categorical(spec, name));
  std::vector<const FlagSpec*> flags;
  for (const auto* col : kServiceFlagColumns) flags.push_back(&find_flag(spec, col));

  auto draw_level = [&](const CategoricalFeatureSpec& c) -> std::size_t {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
      acc += c.levels[i].frequency;
      if (u < acc) return i;
    }
    return c.levels.size() - 1;
  };

  std::vector<std::array<std::size_t, 6>> level_idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    char id[32];
    std::snprintf(id, sizeof id, "S%06zu", i + 1);
    r.client_id = id;
    r.bl_ors = round1(std::clamp(rng.normal(bl_ors.mean, bl_ors.sd), 0.0, kScaleMax));
    r.bl_srs = round1(std::clamp(rng.normal(bl_srs.mean, bl_srs.sd), 0.0, kScaleMax));
    r.third_delta_ors = round1(std::clamp(rng.normal(d_ors.mean, d_ors.sd), -r.bl_ors, kScaleMax - r.bl_ors));
    r.third_delta_srs =
        round1(std::clamp(rng.normal(d_srs.mean, d_srs.sd), -*r.bl_srs, kScaleMax - *r.bl_srs));
    r.age = static_cast<int>(std::lround(std::clamp(rng.normal(age.mean, age.sd), double(kMinAge), 90.0)));
    for (std::size_t c = 0; c < cats.size(); ++c) level_idx[i][c] = draw_level(*cats[c]);
    r.gender = cats[0]->levels[level_idx[i][0]].name;
    r.diag_cat = cats[1]->levels[level_idx[i][1]].name;
    r.payor_grp = cats[2]->levels[level_idx[i][2]].name;
    r.county = cats[3]->levels[level_idx[i][3]].name;
    r.region_type = cats[4]->levels[level_idx[i][4]].name;
    r.state = cats[5]->levels[level_idx[i][5]].name;
    for (std::size_t f = 0; f < flags.size(); ++f) r.service_bins[f] = rng.bernoulli(flags[f]->rate) ? 1 : 0;
  }

  // Exact count of new clients, placed at random.
  {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    const auto k = static_cast<std::size_t>(std::llround(spec.new_fraction * static_cast<double>(n)));
    for (std::size_t i = 0; i < k; ++i) rows[order[i]].is_new = 1;
  }

  auto median = [&](auto get) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = get(rows[i]);
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double med_bl_ors = median([](const CohortRow& r) { return r.bl_ors; });
  const double med_bl_srs = median([](const CohortRow& r) { return *r.bl_srs; });
  const double med_d_ors = median([](const CohortRow& r) { return r.third_delta_ors; });
  const double med_d_srs = median([](const CohortRow& r) { return *r.third_delta_srs; });
  const double med_age = median([](const CohortRow& r) { return double(r.age); });

  std::vector<double> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    double z = 0.0;
    z += bl_ors.log_odds * (r.bl_ors > med_bl_ors);
    z += bl_srs.log_odds * (*r.bl_srs > med_bl_srs);
    z += d_ors.log_odds * (r.third_delta_ors > med_d_ors);
    z += d_srs.log_odds * (*r.third_delta_srs > med_d_srs);
    z += age.log_odds * (r.age > med_age);
    for (std::size_t c = 0; c < cats.size(); ++c) z += cats[c]->levels[level_idx[i][c]].log_odds;
    for (std::size_t f = 0; f < flags.size(); ++f) z += flags[f]->log_odds * r.service_bins[f];
    z += spec.new_log_odds * r.is_new;
    z += spec.noise_scale * rng.logistic();
    latent[i] = z;
  }

  // Piecewise-linear map of the latent score whose mean sits exactly at the
  // class split, so "delta above the mean" tracks "latent above the split".
  std::vector<double> sorted = latent;
  std::sort(sorted.begin(), sorted.end());
  auto below = static_cast<std::size_t>(std::llround((1.0 - spec.class_balance) * static_cast<double>(n)));
  below = std::clamp<std::size_t>(below, 1, n - 1);
  const double split = 0.5 * (sorted[below - 1] + sorted[below]);
  double s_plus = 0.0, s_minus = 0.0;
  for (double z : latent) {
    if (z > split)
      s_plus += z - split;
    else
      s_minus += split - z;
  }
  const double upper_slope = s_plus > 0.0 ? s_minus / s_plus : 1.0;

  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    const double g = latent[i] > split ? upper_slope * (latent[i] - split) : latent[i] - split;
    const double raw = spec.mean_delta + spec.delta_scale * g;
    r.final_ors = round1(std::clamp(r.bl_ors + raw, 0.0, kScaleMax));
    r.final_delta_ors = round1(r.final_ors - r.bl_ors);
  }
  return rows;
}

// --- Spec (de)serialization ----------------------------------------------------------

nlohmann::json to_json(const CohortSpec& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["seed"] = s.seed;
  j["class_balance"] = s.class_balance;
  j["new_fraction"] = s.new_fraction;
  j["new_log_odds"] = s.new_log_odds;
  j["noise_scale"] = s.noise_scale;
  j["mean_delta"] = s.mean_delta;
  j["delta_scale"] = s.delta_scale;
  j["numeric"] = nlohmann::json::array();
  for (const auto& f : s.numeric)
    j["numeric"].push_back({{"name", f.name}, {"mean", f.mean}, {"sd", f.sd}, {"log_odds", f.log_odds}});
  j["categorical"] = nlohmann::json::array();
  for (const auto& c : s.categorical) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : c.levels)
      levels.push_back({{"name", l.name}, {"frequency", l.frequency}, {"log_odds", l.log_odds}});
    j["categorical"].push_back({{"name", c.name}, {"levels", levels}});
  }
  j["flags"] = nlohmann::json::array();
  for (const auto& f : s.flags)
    j["flags"].push_back({{"name", f.name}, {"rate", f.rate}, {"log_odds", f.log_odds}});
  return j;
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("cohort spec must be a JSON object");
  static const std::vector<std::string> known = {"n",          "seed",       "class_balance", "new_fraction",
                                                 "new_log_odds", "noise_scale", "mean_delta",   "delta_scale",
                                                 "numeric",    "categorical", "flags"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("cohort spec: unknown key '" + it.key() + "'");

  CohortSpec s = CohortSpec::defaults();
  try {
    if (j.contains("n")) s.n = j.at("n").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("class_balance")) s.class_balance = j.at("class_balance").get<double>();
    if (j.contains("new_fraction")) s.new_fraction = j.at("new_fraction").get<double>();
    if (j.contains("new_log_odds")) s.new_log_odds = j.at("new_log_odds").get<double>();
    if (j.contains("noise_scale")) s.noise_scale = j.at("noise_scale").get<double>();
    if (j.contains("mean_delta")) s.mean_delta = j.at("mean_delta").get<double>();
    if (j.contains("delta_scale")) s.delta_scale = j.at("delta_scale").get<double>();
    if (j.contains("numeric")) {
      for (const auto& f : j.at("numeric")) {
        auto& dst = s.numeric_feature(f.at("name").get<std::string>());
        if (f.contains("mean")) dst.mean = f.at("mean").get<double>();
        if (f.contains("sd")) dst.sd = f.at("sd").get<double>();
        if (f.contains("log_odds")) dst.log_odds = f.at("log_odds").get<double>();
      }
    }
    if (j.contains("categorical")) {
      for (const auto& c : j.at("categorical")) {
        const auto name = c.at("name").get<std::string>();
        auto it = std::find_if(s.categorical.begin(), s.categorical.end(),
                               [&](const CategoricalFeatureSpec& x) { return x.name == name; });
        if (it == s.categorical.end()) throw ConfigError("cohort spec: unknown categorical feature '" + name + "'");
        it->levels.clear();
        for (const auto& l : c.at("levels"))
          it->levels.push_back({l.at("name").get<std::string>(), l.at("frequency").get<double>(),
                                l.value("log_odds", 0.0)});
      }
    }
    if (j.contains("flags")) {
      for (const auto& f : j.at("flags")) {
        const auto name = f.at("name").get<std::string>();
        auto it = std::find_if(s.flags.begin(), s.flags.end(), [&](const FlagSpec& x) { return x.name == name; });
        if (it == s.flags.end()) throw ConfigError("cohort spec: unknown flag '" + name + "'");
        if (f.contains("rate")) it->rate = f.at("rate").get<double>();
        if (f.contains("log_odds")) it->log_odds = f.at("log_odds").get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cohort spec: ") + e.what());
  }
  s.validate();
  return s;
}

CohortSpec load_cohort_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cohort spec '" + path.string() + "'");
  try {
    return cohort_spec_from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cohort spec '" + path.string() + "': " + e.what());
  }
}

// --- Sessions CSV ----------------------------------------------------------------

std::vector<SessionRecord> read_sessions(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_id = t.require("client_id");
  const auto c_visit = t.require("visit_index");
  const auto c_days = t.require("days_from_baseline");
  std::array<std::size_t, 4> c_ors{}, c_srs{};
  for (int i = 0; i < 4; ++i) {
    c_ors[i] = t.require("ors" + std::to_string(i + 1));
    c_srs[i] = t.require("srs" + std::to_string(i + 1));
  }
  const auto c_flags = t.column("flags");

  std::vector<SessionRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    SessionRecord s;
    s.client_id = row[c_id];
    const std::string ctx = "sessions row " + std::to_string(r + 1);
    s.visit_index = static_cast<int>(csv::parse_long(row[c_visit], ctx + " visit_index"));
    s.days_from_baseline = static_cast<int>(csv::parse_long(row[c_days], ctx + " days_from_baseline"));
    for (int i = 0; i < 4; ++i) {
      s.ors_items[i] = csv::parse_optional_double(row[c_ors[i]], ctx + " ors" + std::to_string(i + 1));
      s.srs_items[i] = csv::parse_optional_double(row[c_srs[i]], ctx + " srs" + std::to_string(i + 1));
    }
    if (c_flags && !row[*c_flags].empty()) {
      std::stringstream ss(row[*c_flags]);
      std::string name;
      while (std::getline(ss, name, '|')) {
        if (name.empty()) continue;
        auto it = std::find_if(kServiceFlagNames.begin(), kServiceFlagNames.end(),
                               [&](const char* n) { return name == n; });
        if (it == kServiceFlagNames.end())
          throw ValidationError(ctx + ": unknown service flag '" + name + "'");
        s.set(static_cast<ServiceFlag>(it - kServiceFlagNames.begin()));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SessionRecord> read_sessions_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open sessions file '" + path.string() + "'");
  return read_sessions(in);
}

void write_sessions(std::ostream& out, std::span<const SessionRecord> sessions) {
  csv::write_row(out, {"client_id", "visit_index", "days_from_baseline", "ors1", "ors2", "ors3", "ors4", "srs1",
                       "srs2", "srs3", "srs4", "flags"});
  for (const auto& s : sessions) {
    std::vector<std::string> f = {s.client_id, std::to_string(s.visit_index), std::to_string(s.days_from_baseline)};
    for (const auto& v : s.ors_items) f.push_back(v ? csv::exact(*v) : "");
    for (const auto& v : s.srs_items) f.push_back(v ? csv::exact(*v) : "");
    std::string flags;
    for (std::size_t i = 0; i < kServiceFlagCount; ++i) {
      if (!s.has(static_cast<ServiceFlag>(i))) continue;
      if (!flags.empty()) flags += '|';
      flags += kServiceFlagNames[i];
    }
    f.push_back(flags);
    csv::write_row(out, f);
  }
}

// --- Profiles CSV ------------------------------------------------------------------

std::vector<ClientProfile> read_profiles(std::istream& in) {
  const auto t = csv::read(in);
  const auto c_id = t.require("client_id");
  const auto c_gender = t.require("gender");
  const auto c_age = t.require("age");
  const auto c_diag = t.require("diag_cat");
  const auto c_payor = t.require("payor_grp");
  const auto c_county = t.require("county");
  const auto c_region = t.require("region_type");
  const auto c_state = t.require("state");
  const auto c_prior = t.column("prior_visit_days");
  std::vector<ClientProfile> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ClientProfile p;
    p.client_id = row[c_id];
    p.gender = row[c_gender];
    p.age = static_cast<int>(csv::parse_long(row[c_age], "clients row " + std::to_string(r + 1) + " age"));
    p.diag_cat = row[c_diag];
    p.payor_grp = row[c_payor];
    p.county = row[c_county];
    p.region_type = row[c_region];
    p.state = row[c_state];
    if (c_prior && !row[*c_prior].empty()) {
      std::stringstream ss(row[*c_prior]);
      std::string d;
      while (std::getline(ss, d, '|'))
        if (!d.empty()) p.prior_visit_days.push_back(static_cast<int>(csv::parse_long(d, "prior_visit_days")));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ClientProfile> read_profiles_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open clients file '" + path.string() + "'");
  return read_profiles(in);
}

void write_profiles(std::ostream& out, std::span<const ClientProfile> profiles) {
  csv::write_row(out, {"client_id", "gender", "age", "diag_cat", "payor_grp", "county", "region_type", "state",
                       "prior_visit_days"});
  for (const auto& p : profiles) {
    std::string prior;
    for (std::size_t i = 0; i < p.prior_visit_days.size(); ++i) {
      if (i) prior += '|';
      prior += std::to_string(p.prior_visit_days[i]);
    }
    csv::write_row(out, {p.client_id, p.gender, std::to_string(p.age), p.diag_cat, p.payor_grp, p.county,
                         p.region_type, p.state, prior});
  }
}

// --- Cohort CSV -----------------------------------------------------------------------

const std::vector<std::string>& cohort_csv_header() {
  static const std::vector<std::string> h = {
      "client_id", "bl_ors",        "bl_srs",        "third_delta_ors",   "third_delta_srs",   "gender",
      "diag_cat",  "age",           "payor_grp",     "county",            "region_type",       "q_case_mgmt_bin",
      "q_medical_bin", "q_therapy_bin", "q_ind_therapy_bin", "q_grp_therapy_bin", "state",  "is_new",
      "final_ors", "final_delta_ors"};
  return h;
}

void write_cohort(std::ostream& out, std::span<const CohortRow> rows) {
  csv::write_row(out, cohort_csv_header());
  for (const auto& r : rows) {
    std::vector<std::string> f = {r.client_id,
                                  csv::exact(r.bl_ors),
                                  r.bl_srs ? csv::exact(*r.bl_srs) : "",
                                  csv::exact(r.third_delta_ors),
                                  r.third_delta_srs ? csv::exact(*r.third_delta_srs) : "",
                                  r.gender,
                                  r.diag_cat,
                                  std::to_string(r.age),
                                  r.payor_grp,
                                  r.county,
                                  r.region_type};
    for (int b : r.service_bins) f.push_back(std::to_string(b));
    f.push_back(r.state);
    f.push_back(std::to_string(r.is_new));
    f.push_back(csv::exact(r.final_ors));
    f.push_back(csv::exact(r.final_delta_ors));
    csv::write_row(out, f);
  }
}

std::vector<CohortRow> read_cohort(std::istream& in) {
  const auto t = csv::read(in);
  std::map<std::string, std::size_t> col;
  for (const auto& name : cohort_csv_header()) col[name] = t.require(name);
  std::vector<CohortRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = "cohort row " + std::to_string(r + 1) + " ";
    auto num = [&](const char* name) { return csv::parse_double(row[col[name]], ctx + name); };
    CohortRow c;
    c.client_id = row[col["client_id"]];
    c.bl_ors = num("bl_ors");
    c.bl_srs = csv::parse_optional_double(row[col["bl_srs"]], ctx + "bl_srs");
    c.third_delta_ors = num("third_delta_ors");
    c.third_delta_srs = csv::parse_optional_double(row[col["third_delta_srs"]], ctx + "third_delta_srs");
    c.gender = row[col["gender"]];
    c.diag_cat = row[col["diag_cat"]];
    c.age = static_cast<int>(num("age"));
    c.payor_grp = row[col["payor_grp"]];
    c.county = row[col["county"]];
    c.region_type = row[col["region_type"]];
    for (std::size_t f = 0; f < kServiceFlagCount; ++f) c.service_bins[f] = static_cast<int>(num(kServiceFlagColumns[f]));
    c.state = row[col["state"]];
    c.is_new = static_cast<int>(num("is_new"));
    c.final_ors = num("final_ors");
    c.final_delta_ors = num("final_delta_ors");
    if (c.bl_ors < 0 || c.bl_ors > kScaleMax || c.final_ors < 0 || c.final_ors > kScaleMax)
      throw ValidationError(ctx + "ORS totals must lie in [0,40]");
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CohortRow> read_cohort_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open cohort file '" + path.string() + "'");
  return read_cohort(in);
}

}  // namespace promine::cohort

namespace promine::cohort {

const std::vector<std::string>& default_features() {
  static const std::vector<std::string> f = {
      "bl_ors", "bl_srs", "third_delta_ors", "third_delta_srs", "gender", "diag_cat", "age", "payor_grp",
      "county", "region_type", "q_case_mgmt_bin", "q_medical_bin", "q_therapy_bin", "q_ind_therapy_bin",
      "q_grp_therapy_bin", "state"};
  return f;
}

bool is_categorical_feature(std::string_view name) {
  return name == "gender" || name == "diag_cat" || name == "payor_grp" || name == "county" ||
         name == "region_type" || name == "state";
}

namespace {

std::optional<double> numeric_value(const CohortRow& r, std::string_view name) {
  if (name == "bl_ors") return r.bl_ors;
  if (name == "bl_srs") return r.bl_srs;
  if (name == "third_delta_ors") return r.third_delta_ors;
  if (name == "third_delta_srs") return r.third_delta_srs;
  if (name == "age") return double(r.age);
  if (name == "is_new") return double(r.is_new);
  for (std::size_t f = 0; f < kServiceFlagCount; ++f)
    if (name == kServiceFlagColumns[f]) return double(r.service_bins[f]);
  throw ConfigError("unknown cohort feature '" + std::string(name) + "'");
}

const std::string& categorical_value(const CohortRow& r, std::string_view name) {
  if (name == "gender") return r.gender;
  if (name == "diag_cat") return r.diag_cat;
  if (name == "payor_grp") return r.payor_grp;
  if (name == "county") return r.county;
  if (name == "region_type") return r.region_type;
  return r.state;
}

}  // namespace

FeatureTable to_feature_table(std::span<const CohortRow> rows, const std::vector<std::string>& features) {
  FeatureTable out;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bool complete = true;
    for (const auto& f : features)
      if (!is_categorical_feature(f) && !numeric_value(rows[i], f)) complete = false;
    if (complete)
      keep.push_back(i);
    else
      ++out.dropped_incomplete;
  }
  for (const auto& f : features) {
    Column c;
    c.name = f;
    if (is_categorical_feature(f)) {
      c.kind = ColumnKind::categorical;
      std::vector<std::string> levels;
      for (auto i : keep) levels.push_back(categorical_value(rows[i], f));
      std::sort(levels.begin(), levels.end());
      levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
      c.levels = levels;
      for (auto i : keep) {
        const auto& v = categorical_value(rows[i], f);
        c.values.push_back(double(std::lower_bound(levels.begin(), levels.end(), v) - levels.begin()));
      }
    } else {
      for (auto i : keep) c.values.push_back(*numeric_value(rows[i], f));
    }
    out.data.columns.push_back(std::move(c));
  }
  for (auto i : keep) {
    out.outcome.push_back(rows[i].final_delta_ors);
    out.client_ids.push_back(rows[i].client_id);
  }
  out.data.target.assign(keep.size(), 0);
  return out;
}

}  // namespace promine::cohort
