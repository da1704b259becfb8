#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "internal.hpp"
#include "promine/random.hpp"
#include "promine/special.hpp"

namespace promine::learners::detail {
namespace {

struct Node {
  std::array<double, 2> counts{0.0, 0.0};
  int feature = -1;  // -1 = leaf
  double threshold = 0.0;
  std::size_t majority_child = 0;
  std::vector<std::unique_ptr<Node>> children;

  bool leaf() const { return feature < 0; }
  double total() const { return counts[0] + counts[1]; }
};

double entropy(double a, double b) {
  const double n = a + b;
  double h = 0.0;
  if (a > 0.0) h -= a / n * std::log2(a / n);
  if (b > 0.0) h -= b / n * std::log2(b / n);
  return h;
}

// Candidate split on one feature.
struct Split {
  bool valid = false;
  double gain = 0.0;
  double split_info = 0.0;
  double threshold = 0.0;
};

enum class Criterion { gain_ratio, info_gain };

struct Builder {
  const Schema& schema;
  const Rows& rows;
  const std::vector<int>& labels;
  Criterion criterion;
  std::size_t min_leaf;
  std::size_t max_depth;     // 0 = unlimited
  std::size_t sample_features;  // 0 = all
  Rng* rng = nullptr;

  std::array<double, 2> count(const std::vector<std::size_t>& idx) const {
    std::array<double, 2> c{0.0, 0.0};
    for (auto i : idx) c[static_cast<std::size_t>(labels[i])] += 1.0;
    return c;
  }

  Split numeric_split(const std::vector<std::size_t>& idx, std::size_t f, double parent_h) const {
    std::vector<std::size_t> order = idx;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a][f] < rows[b][f]; });
    const auto total = count(idx);
    const double n = total[0] + total[1];
    std::array<double, 2> left{0.0, 0.0};
    Split best;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left[static_cast<std::size_t>(labels[order[i]])] += 1.0;
      const double lo = rows[order[i]][f], hi = rows[order[i + 1]][f];
      if (!(lo < hi)) continue;
      const double nl = static_cast<double>(i + 1), nr = n - nl;
      if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) continue;
      const double gain =
          parent_h - (nl / n) * entropy(left[0], left[1]) - (nr / n) * entropy(total[0] - left[0], total[1] - left[1]);
      if (!best.valid || gain > best.gain) {
        best.valid = true;
        best.gain = gain;
        best.threshold = lo + (hi - lo) / 2.0;
        best.split_info = entropy(nl, nr);
      }
    }
    return best;
  }

  Split discrete_split(const std::vector<std::size_t>& idx, std::size_t f, double parent_h) const {
    const std::size_t k = std::max<std::size_t>(schema[f].cardinality, 1);
    std::vector<std::array<double, 2>> per(k, {0.0, 0.0});
    for (auto i : idx) {
      const int v = level_of(rows[i][f], k);
      if (v >= 0) per[static_cast<std::size_t>(v)][static_cast<std::size_t>(labels[i])] += 1.0;
    }
    const double n = static_cast<double>(idx.size());
    std::size_t big_branches = 0;
    double cond = 0.0, info = 0.0;
    for (const auto& c : per) {
      const double m = c[0] + c[1];
      if (m >= static_cast<double>(min_leaf)) ++big_branches;
      if (m > 0.0) {
        cond += (m / n) * entropy(c[0], c[1]);
        info -= (m / n) * std::log2(m / n);
      }
    }
    Split s;
    s.valid = big_branches >= 2;
    s.gain = parent_h - cond;
    s.split_info = info;
    return s;
  }

  std::vector<std::size_t> candidate_features() const {
    std::vector<std::size_t> feats(schema.size());
    std::iota(feats.begin(), feats.end(), 0);
    if (sample_features == 0 || sample_features >= feats.size()) return feats;
    for (std::size_t i = 0; i < sample_features; ++i) {
      const auto j = i + static_cast<std::size_t>(rng->below(feats.size() - i));
      std::swap(feats[i], feats[j]);
    }
    feats.resize(sample_features);
    std::sort(feats.begin(), feats.end());
    return feats;
  }

  std::unique_ptr<Node> build(const std::vector<std::size_t>& idx, std::size_t depth) const {
    auto node = std::make_unique<Node>();
    node->counts = count(idx);
    const bool pure = node->counts[0] == 0.0 || node->counts[1] == 0.0;
    if (pure || idx.size() < 2 * min_leaf || (max_depth && depth >= max_depth)) return node;

    const double parent_h = entropy(node->counts[0], node->counts[1]);
    std::vector<std::pair<std::size_t, Split>> splits;
    for (auto f : candidate_features()) {
      Split s = schema[f].kind == ColumnKind::numeric ? numeric_split(idx, f, parent_h) : discrete_split(idx, f, parent_h);
      if (s.valid) splits.emplace_back(f, s);
    }
    if (splits.empty()) return node;

    constexpr double kTol = 1e-12;
    const std::pair<std::size_t, Split>* chosen = nullptr;
    if (criterion == Criterion::info_gain) {
      for (const auto& s : splits)
        if (s.second.gain > kTol && (!chosen || s.second.gain > chosen->second.gain + kTol)) chosen = &s;
      if (!chosen) return node;
    } else {
      // Gain ratio among splits whose gain is at least the average positive gain.
      double sum = 0.0;
      std::size_t n_pos = 0;
      for (const auto& s : splits)
        if (s.second.gain > kTol) {
          sum += s.second.gain;
          ++n_pos;
        }
      if (n_pos) {
        const double avg = sum / static_cast<double>(n_pos);
        double best_ratio = -1.0;
        for (const auto& s : splits) {
          if (s.second.gain <= kTol || s.second.gain < avg - 1e-9 || s.second.split_info <= kTol) continue;
          const double ratio = s.second.gain / s.second.split_info;
          if (ratio > best_ratio + kTol) {
            best_ratio = ratio;
            chosen = &s;
          }
        }
      }
      // No informative single split (an XOR-like node): keep separating the
      // impure node so consistent data can always be fit exactly.
      if (!chosen) chosen = &splits.front();
    }

    const std::size_t f = chosen->first;
    const bool numeric = schema[f].kind == ColumnKind::numeric;
    const std::size_t arity = numeric ? 2 : std::max<std::size_t>(schema[f].cardinality, 1);
    std::vector<std::vector<std::size_t>> parts(arity);
    for (auto i : idx) {
      const double v = rows[i][f];
      const std::size_t b = numeric ? (v <= chosen->second.threshold ? 0 : 1)
                                    : static_cast<std::size_t>(std::max(level_of(v, arity), 0));
      parts[b].push_back(i);
    }
    node->feature = static_cast<int>(f);
    node->threshold = numeric ? chosen->second.threshold : 0.0;
    for (std::size_t b = 0; b < arity; ++b) {
      if (parts[b].size() > parts[node->majority_child].size()) node->majority_child = b;
      node->children.push_back(build(parts[b], depth + 1));
    }
    return node;
  }
};

// Upper-bound error increment of the C4.5 pessimistic estimate.
double added_errors(double n, double e, double cf) {
  if (n <= 0.0) return 0.0;
  if (e < 1.0) {
    const double base = n * (1.0 - std::pow(cf, 1.0 / n));
    if (e == 0.0) return base;
    return base + e * (added_errors(n, 1.0, cf) - base);
  }
  if (e + 0.5 >= n) return std::max(n - e, 0.0);
  const double z = special::normal_quantile(1.0 - cf);
  const double f = (e + 0.5) / n;
  const double r =
      (f + z * z / (2.0 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4.0 * n * n))) / (1.0 + z * z / n);
  return r * n - e;
}

double leaf_estimate(const Node& node, double cf) {
  const double n = node.total();
  const double e = n - std::max(node.counts[0], node.counts[1]);
  return e + added_errors(n, e, cf);
}

// Subtree replacement, bottom-up. Returns the estimated errors of the result.
double prune(Node& node, double cf) {
  if (node.leaf()) return leaf_estimate(node, cf);
  double subtree = 0.0;
  for (auto& c : node.children) subtree += prune(*c, cf);
  const double as_leaf = leaf_estimate(node, cf);
  if (as_leaf <= subtree + 0.1) {
    node.children.clear();
    node.feature = -1;
    node.majority_child = 0;
    return as_leaf;
  }
  return subtree;
}

Distribution leaf_distribution(const Node& root, const Schema& schema, std::span<const double> row) {
  const Node* node = &root;
  const Node* parent = nullptr;
  while (!node->leaf()) {
    const auto f = static_cast<std::size_t>(node->feature);
    std::size_t b;
    if (schema[f].kind == ColumnKind::numeric) {
      b = row[f] <= node->threshold ? 0 : 1;
    } else {
      const int v = level_of(row[f], node->children.size());
      b = v < 0 ? node->majority_child : static_cast<std::size_t>(v);
    }
    parent = node;
    node = node->children[b].get();
  }
  if (node->total() == 0.0 && parent) node = parent;
  return {node->counts[0] / node->total(), node->counts[1] / node->total()};
}

json node_to_json(const Node& n) {
  json j = {{"counts", {n.counts[0], n.counts[1]}}};
  if (n.leaf()) return j;
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["majority"] = n.majority_child;
  json kids = json::array();
  for (const auto& c : n.children) kids.push_back(node_to_json(*c));
  j["children"] = std::move(kids);
  return j;
}

std::unique_ptr<Node> node_from_json(const json& j, const Schema& schema) {
  auto n = std::make_unique<Node>();
  n->counts = {j.at("counts").at(0).get<double>(), j.at("counts").at(1).get<double>()};
  if (!j.contains("feature")) return n;
  n->feature = j.at("feature").get<int>();
  if (n->feature < 0 || static_cast<std::size_t>(n->feature) >= schema.size()) throw SchemaError("tree: bad feature index");
  n->threshold = j.at("threshold").get<double>();
  n->majority_child = j.at("majority").get<std::size_t>();
  for (const auto& c : j.at("children")) n->children.push_back(node_from_json(c, schema));
  const auto& f = schema[static_cast<std::size_t>(n->feature)];
  const std::size_t arity = f.kind == ColumnKind::numeric ? 2 : std::max<std::size_t>(f.cardinality, 1);
  if (n->children.size() != arity || n->majority_child >= arity) throw SchemaError("tree: bad node arity");
  return n;
}

// One pruned tree (c45_tree) or an averaged bagged forest (random_forest).
class TreeModel final : public Classifier {
 public:
  TreeModel(ClassifierSpec spec, Schema schema, std::vector<std::unique_ptr<Node>> trees)
      : Classifier(std::move(spec), std::move(schema)), trees_(std::move(trees)) {}

  json fitted_json() const override {
    json t = json::array();
    for (const auto& n : trees_) t.push_back(node_to_json(*n));
    return {{"trees", t}};
  }

  std::size_t size() const { return trees_.size(); }

 protected:
  Distribution proba(std::span<const double> row) const override {
    Distribution acc{0.0, 0.0};
    for (const auto& t : trees_) {
      const auto d = leaf_distribution(*t, schema(), row);
      acc[0] += d[0];
      acc[1] += d[1];
    }
    return normalized(acc[0], acc[1]);
  }

 private:
  std::vector<std::unique_ptr<Node>> trees_;
};

}  // namespace

ClassifierPtr fit_c45(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<TreeParams>(spec.params);
  const Schema schema = schema_of(data);
  const Rows rows = rows_of(data);
  Builder b{schema, rows, data.target, Criterion::gain_ratio, p.min_leaf, p.max_depth, 0, nullptr};
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto root = b.build(idx, 0);
  if (p.prune) prune(*root, p.confidence);
  std::vector<std::unique_ptr<Node>> trees;
  trees.push_back(std::move(root));
  return std::make_shared<TreeModel>(spec, schema, std::move(trees));
}

ClassifierPtr fit_forest(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<ForestParams>(spec.params);
  const Schema schema = schema_of(data);
  const Rows rows = rows_of(data);
  const std::size_t m = schema.size();
  const std::size_t k =
      p.features_per_split ? p.features_per_split
                           : static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(m)) + 1.0));
  std::vector<std::unique_ptr<Node>> trees;
  for (std::size_t t = 0; t < p.trees; ++t) {
    Rng rng(derive_seed(spec.seed, t));
    std::vector<std::size_t> bag(rows.size());
    for (auto& i : bag) i = static_cast<std::size_t>(rng.below(rows.size()));
    std::sort(bag.begin(), bag.end());
    Builder b{schema, rows, data.target, Criterion::info_gain, p.min_leaf, 0, std::min(k, m), &rng};
    trees.push_back(b.build(bag, 0));
  }
  return std::make_shared<TreeModel>(spec, schema, std::move(trees));
}

ClassifierPtr load_trees(const ClassifierSpec& spec, Schema schema, const json& j) {
  std::vector<std::unique_ptr<Node>> trees;
  for (const auto& t : j.at("trees")) trees.push_back(node_from_json(t, schema));
  if (trees.empty()) throw SchemaError("tree model has no trees");
  return std::make_shared<TreeModel>(spec, std::move(schema), std::move(trees));
}

}  // namespace promine::learners::detail
