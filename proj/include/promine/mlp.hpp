#pragma once

// The network behind the mlp learner, exposed for gradient checking.
// One sigmoid hidden layer, a two-way softmax output and cross-entropy loss.

#include <span>
#include <vector>

#include "promine/learners.hpp"
#include "promine/random.hpp"

namespace promine::learners {

struct MlpNetwork {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  // Row-major with the bias as the last entry of each row:
  // w1 is hidden x (inputs + 1), w2 is 2 x (hidden + 1).
  std::vector<double> w1;
  std::vector<double> w2;

  static MlpNetwork random(std::size_t inputs, std::size_t hidden, Rng& rng, double spread = 0.5);

  Distribution forward(std::span<const double> x) const;

  std::size_t parameter_count() const { return w1.size() + w2.size(); }
  // Flat view: w1 followed by w2.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);
};

// Mean cross-entropy over the rows plus 0.5 * decay * (sum of squared
// non-bias weights).
double mlp_loss(const MlpNetwork& net, const std::vector<std::vector<double>>& x, std::span<const int> y,
                double decay);

// Backpropagated gradient of mlp_loss, flattened like parameters().
std::vector<double> mlp_gradient(const MlpNetwork& net, const std::vector<std::vector<double>>& x,
                                 std::span<const int> y, double decay);

}  // namespace promine::learners
