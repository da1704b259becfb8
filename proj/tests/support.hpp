#pragma once

// Shared builders and hand-rolled generators for the test suites.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "promine/dataset.hpp"
#include "promine/random.hpp"

namespace support {

using promine::Column;
using promine::ColumnKind;
using promine::Dataset;
using promine::Rng;

inline Column numeric(std::string name, std::vector<double> values) {
  Column c;
  c.name = std::move(name);
  c.values = std::move(values);
  return c;
}

inline Column categorical(std::string name, std::vector<double> codes, std::vector<std::string> levels) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::categorical;
  c.values = std::move(codes);
  c.levels = std::move(levels);
  return c;
}

// Binary 0/1 categorical column.
inline Column binary(std::string name, const std::vector<int>& bits) {
  return categorical(std::move(name), std::vector<double>(bits.begin(), bits.end()), {"0", "1"});
}

inline Dataset make(std::vector<Column> cols, std::vector<int> target) {
  Dataset d;
  d.columns = std::move(cols);
  d.target = std::move(target);
  return d;
}

// Labels with both classes present.
inline std::vector<int> random_labels(Rng& rng, std::size_t n, double p = 0.5) {
  std::vector<int> y(n);
  do {
    for (auto& v : y) v = rng.bernoulli(p) ? 1 : 0;
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
  return y;
}

// Scores on a coarse grid so ties are common.
inline std::vector<double> tied_scores(Rng& rng, std::size_t n, std::size_t levels) {
  std::vector<double> s(n);
  for (auto& v : s) v = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
  return s;
}

// Scores shifted upward for positives so the instance carries signal.
inline std::vector<double> informative_scores(Rng& rng, const std::vector<int>& y, double shift) {
  std::vector<double> s(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) s[i] = rng.normal() + shift * y[i];
  return s;
}

// Planted two-feature problem: x1 informative, x2 noise, c1 informative categorical.
inline Dataset planted(std::uint64_t seed, std::size_t n, double strength = 2.0) {
  Rng rng(seed);
  std::vector<double> x1(n), x2(n), c1(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.5) ? 1 : 0;
    x1[i] = rng.normal() + strength * y[i];
    x2[i] = rng.normal();
    c1[i] = rng.bernoulli(y[i] ? 0.7 : 0.3) ? 1.0 : 0.0;
  }
  if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
  if (std::count(y.begin(), y.end(), 0) == 0) y[0] = 0;
  return make({numeric("x1", x1), numeric("x2", x2), categorical("c1", c1, {"a", "b"})}, y);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("promine_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace support
