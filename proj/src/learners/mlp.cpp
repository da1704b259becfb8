#include "promine/mlp.hpp"

#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace promine::learners {
namespace {

double sigmoid(double a) { return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a)); }

struct Activations {
  std::vector<double> h;
  Distribution p{};
};

Activations run(const MlpNetwork& net, std::span<const double> x) {
  Activations a;
  a.h.resize(net.hidden);
  const std::size_t stride = net.inputs + 1;
  for (std::size_t j = 0; j < net.hidden; ++j) {
    const double* w = &net.w1[j * stride];
    double s = w[net.inputs];
    for (std::size_t i = 0; i < net.inputs; ++i) s += w[i] * x[i];
    a.h[j] = sigmoid(s);
  }
  std::array<double, 2> o{};
  for (std::size_t k = 0; k < 2; ++k) {
    const double* w = &net.w2[k * (net.hidden + 1)];
    double s = w[net.hidden];
    for (std::size_t j = 0; j < net.hidden; ++j) s += w[j] * a.h[j];
    o[k] = s;
  }
  a.p = detail::from_logs(o[0], o[1]);
  return a;
}

// Adds the cross-entropy gradient of one example into g (flat layout).
void accumulate(const MlpNetwork& net, std::span<const double> x, int y, double scale, std::vector<double>& g) {
  const Activations a = run(net, x);
  const std::size_t stride1 = net.inputs + 1, stride2 = net.hidden + 1;
  const std::array<double, 2> delta = {a.p[0] - (y == 0 ? 1.0 : 0.0), a.p[1] - (y == 1 ? 1.0 : 0.0)};
  double* g2 = g.data() + net.w1.size();
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < net.hidden; ++j) g2[k * stride2 + j] += scale * delta[k] * a.h[j];
    g2[k * stride2 + net.hidden] += scale * delta[k];
  }
  for (std::size_t j = 0; j < net.hidden; ++j) {
    double back = 0.0;
    for (std::size_t k = 0; k < 2; ++k) back += delta[k] * net.w2[k * stride2 + j];
    const double d = scale * back * a.h[j] * (1.0 - a.h[j]);
    for (std::size_t i = 0; i < net.inputs; ++i) g[j * stride1 + i] += d * x[i];
    g[j * stride1 + net.inputs] += d;
  }
}

// Adds decay * w for every non-bias weight.
void add_decay(const MlpNetwork& net, double decay, std::vector<double>& g) {
  if (decay == 0.0) return;
  const std::size_t stride1 = net.inputs + 1, stride2 = net.hidden + 1;
  for (std::size_t j = 0; j < net.hidden; ++j)
    for (std::size_t i = 0; i < net.inputs; ++i) g[j * stride1 + i] += decay * net.w1[j * stride1 + i];
  double* g2 = g.data() + net.w1.size();
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < net.hidden; ++j) g2[k * stride2 + j] += decay * net.w2[k * stride2 + j];
}

double decay_penalty(const MlpNetwork& net, double decay) {
  const std::size_t stride1 = net.inputs + 1, stride2 = net.hidden + 1;
  double s = 0.0;
  for (std::size_t j = 0; j < net.hidden; ++j)
    for (std::size_t i = 0; i < net.inputs; ++i) s += net.w1[j * stride1 + i] * net.w1[j * stride1 + i];
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < net.hidden; ++j) s += net.w2[k * stride2 + j] * net.w2[k * stride2 + j];
  return 0.5 * decay * s;
}

constexpr double kInitSpread = 0.5;

class Mlp final : public Classifier {
 public:
  Mlp(ClassifierSpec spec, Schema schema, detail::Encoder enc, MlpNetwork net)
      : Classifier(std::move(spec), std::move(schema)), enc_(std::move(enc)), net_(std::move(net)) {
    if (net_.inputs != enc_.width() || net_.w1.size() != net_.hidden * (net_.inputs + 1) ||
        net_.w2.size() != 2 * (net_.hidden + 1))
      throw SchemaError("mlp: weight shapes do not match the encoder");
  }

  detail::json fitted_json() const override {
    return {{"encoder", enc_.to_json()}, {"inputs", net_.inputs}, {"hidden", net_.hidden}, {"w1", net_.w1}, {"w2", net_.w2}};
  }

 protected:
  Distribution proba(std::span<const double> row) const override { return net_.forward(enc_.encode(row)); }

 private:
  detail::Encoder enc_;
  MlpNetwork net_;
};

}  // namespace

MlpNetwork MlpNetwork::random(std::size_t inputs, std::size_t hidden, Rng& rng, double spread) {
  MlpNetwork n;
  n.inputs = inputs;
  n.hidden = hidden;
  n.w1.resize(hidden * (inputs + 1));
  n.w2.resize(2 * (hidden + 1));
  for (auto& w : n.w1) w = rng.uniform(-spread, spread);
  for (auto& w : n.w2) w = rng.uniform(-spread, spread);
  return n;
}

Distribution MlpNetwork::forward(std::span<const double> x) const { return run(*this, x).p; }

std::vector<double> MlpNetwork::parameters() const {
  std::vector<double> p(w1);
  p.insert(p.end(), w2.begin(), w2.end());
  return p;
}

void MlpNetwork::set_parameters(std::span<const double> p) {
  if (p.size() != parameter_count()) throw ValidationError("mlp: parameter count mismatch");
  std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(w1.size()), w1.begin());
  std::copy(p.begin() + static_cast<std::ptrdiff_t>(w1.size()), p.end(), w2.begin());
}

double mlp_loss(const MlpNetwork& net, const std::vector<std::vector<double>>& x, std::span<const int> y,
                double decay) {
  if (x.empty() || x.size() != y.size()) throw ValidationError("mlp_loss: bad batch");
  double ce = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto p = net.forward(x[r]);
    ce -= std::log(std::max(p[static_cast<std::size_t>(y[r])], 1e-300));
  }
  return ce / static_cast<double>(x.size()) + decay_penalty(net, decay);
}

std::vector<double> mlp_gradient(const MlpNetwork& net, const std::vector<std::vector<double>>& x,
                                 std::span<const int> y, double decay) {
  if (x.empty() || x.size() != y.size()) throw ValidationError("mlp_gradient: bad batch");
  std::vector<double> g(net.parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) accumulate(net, x[r], y[r], scale, g);
  add_decay(net, decay, g);
  return g;
}

namespace detail {

ClassifierPtr fit_mlp(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<MlpParams>(spec.params);
  const Schema schema = schema_of(data);
  const Rows rows = rows_of(data);
  Encoder enc(schema, rows, true, false);
  std::vector<std::vector<double>> x;
  x.reserve(rows.size());
  for (const auto& r : rows) x.push_back(enc.encode(r));

  const std::size_t hidden = p.hidden ? p.hidden : (schema.size() + 2 + 1) / 2;
  Rng rng(spec.seed);
  MlpNetwork net = MlpNetwork::random(enc.width(), hidden, rng, kInitSpread);
  std::vector<double> params = net.parameters();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> g(params.size());
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= p.epochs; ++epoch) {
    const double rate = p.learning_rate_decay ? p.learning_rate / static_cast<double>(epoch) : p.learning_rate;
    rng.shuffle(order);
    for (auto r : order) {
      std::fill(g.begin(), g.end(), 0.0);
      accumulate(net, x[r], data.target[r], 1.0, g);
      add_decay(net, p.weight_decay, g);
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = p.momentum * velocity[i] - rate * g[i];
        params[i] += velocity[i];
      }
      net.set_parameters(params);
    }
  }
  return std::make_shared<Mlp>(spec, schema, std::move(enc), std::move(net));
}

ClassifierPtr load_mlp(const ClassifierSpec& spec, Schema schema, const json& j) {
  Encoder enc = Encoder::from_json(j.at("encoder"), schema);
  MlpNetwork net;
  net.inputs = j.at("inputs").get<std::size_t>();
  net.hidden = j.at("hidden").get<std::size_t>();
  net.w1 = j.at("w1").get<std::vector<double>>();
  net.w2 = j.at("w2").get<std::vector<double>>();
  return std::make_shared<Mlp>(spec, std::move(schema), std::move(enc), std::move(net));
}

}  // namespace detail
}  // namespace promine::learners
