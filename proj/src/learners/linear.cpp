#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "internal.hpp"
#include "promine/log.hpp"

namespace promine::learners::detail {
namespace {

// Shared by logistic regression and the least-squares classifier: an
// intercept plus weights over reference-coded inputs.
class LinearModel final : public Classifier {
 public:
  LinearModel(ClassifierSpec spec, Schema schema, Encoder enc, std::vector<double> weights, double intercept)
      : Classifier(std::move(spec), std::move(schema)),
        enc_(std::move(enc)),
        weights_(std::move(weights)),
        intercept_(intercept) {
    if (weights_.size() != enc_.width()) throw SchemaError("linear model: weight count mismatch");
  }

  json fitted_json() const override {
    return {{"encoder", enc_.to_json()}, {"intercept", intercept_}, {"weights", weights_}};
  }

 protected:
  Distribution proba(std::span<const double> row) const override {
    const auto x = enc_.encode(row);
    double eta = intercept_;
    for (std::size_t i = 0; i < x.size(); ++i) eta += weights_[i] * x[i];
    if (spec().algorithm == Algorithm::linreg_classifier) {
      const double p = std::clamp(eta, 0.0, 1.0);
      return {1.0 - p, p};
    }
    // Stable logistic.
    const double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    return {1.0 - p, p};
  }

 private:
  Encoder enc_;
  std::vector<double> weights_;
  double intercept_;
};

struct Design {
  Encoder enc;
  Eigen::MatrixXd x;  // intercept in column 0
  Eigen::VectorXd y;
};

Design design_of(const Dataset& data) {
  const Rows rows = rows_of(data);
  Design d{Encoder(schema_of(data), rows, false, true), {}, {}};
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x.resize(n, static_cast<Eigen::Index>(d.enc.width() + 1));
  d.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto e = d.enc.encode(rows[static_cast<std::size_t>(r)]);
    d.x(r, 0) = 1.0;
    for (std::size_t c = 0; c < e.size(); ++c) d.x(r, static_cast<Eigen::Index>(c + 1)) = e[c];
    d.y(r) = data.target[static_cast<std::size_t>(r)];
  }
  return d;
}

double log1pexp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// Penalized log-likelihood; the intercept is not penalized.
double objective(const Design& d, const Eigen::VectorXd& beta, double ridge) {
  const Eigen::VectorXd eta = d.x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += d.y(i) * eta(i) - log1pexp(eta(i));
  return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

std::shared_ptr<LinearModel> finish(const ClassifierSpec& spec, const Dataset& data, Design d,
                                    const Eigen::VectorXd& beta) {
  std::vector<double> w(static_cast<std::size_t>(beta.size() - 1));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = beta(static_cast<Eigen::Index>(i + 1));
  return std::make_shared<LinearModel>(spec, schema_of(data), std::move(d.enc), std::move(w), beta(0));
}

}  // namespace

ClassifierPtr fit_logistic(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<LogisticParams>(spec.params);
  Design d = design_of(data);
  const Eigen::Index k = d.x.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd penalty = Eigen::MatrixXd::Identity(k, k) * p.ridge;
  penalty(0, 0) = 0.0;
  // A tiny floor keeps the Newton system solvable when the intercept is
  // unidentified (e.g. fully separated data).
  penalty += Eigen::MatrixXd::Identity(k, k) * 1e-12;
  double current = objective(d, beta, p.ridge);
  for (std::size_t iter = 0; iter < p.max_iterations; ++iter) {
    const Eigen::VectorXd eta = d.x * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    Eigen::VectorXd grad = d.x.transpose() * (d.y - mu);
    grad.tail(k - 1) -= p.ridge * beta.tail(k - 1);
    const Eigen::MatrixXd hess = d.x.transpose() * w.asDiagonal() * d.x + penalty;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    // Step-halving line search on the penalized likelihood.
    double t = 1.0;
    double next = current;
    Eigen::VectorXd candidate = beta;
    bool improved = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      candidate = beta + t * step;
      next = objective(d, candidate, p.ridge);
      if (next >= current) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const double gain = next - current;
    beta = candidate;
    current = next;
    if (gain < 1e-10 * (std::abs(current) + 1.0) && (t * step).cwiseAbs().maxCoeff() < 1e-8) break;
    if (gain == 0.0) break;
  }
  return finish(spec, data, std::move(d), beta);
}

ClassifierPtr fit_linreg(const ClassifierSpec& spec, const Dataset& data) {
  const auto& p = std::get<LinRegParams>(spec.params);
  Design d = design_of(data);
  const Eigen::Index k = d.x.cols();
  Eigen::MatrixXd gram = d.x.transpose() * d.x;
  gram.diagonal().tail(k - 1).array() += p.ridge;
  const Eigen::VectorXd beta = gram.ldlt().solve(d.x.transpose() * d.y);
  if (!beta.allFinite()) throw ValidationError("linreg_classifier: normal equations are singular");
  return finish(spec, data, std::move(d), beta);
}

ClassifierPtr load_linear(const ClassifierSpec& spec, Schema schema, const json& j) {
  Encoder enc = Encoder::from_json(j.at("encoder"), schema);
  return std::make_shared<LinearModel>(spec, std::move(schema), std::move(enc),
                                       j.at("weights").get<std::vector<double>>(), j.at("intercept").get<double>());
}

}  // namespace promine::learners::detail
