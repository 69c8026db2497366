#pragma once

#include <string>
#include <vector>

#include "faux/types.hpp"

namespace faux {

enum class Activation { kRelu, kSigmoid, kSoftmax, kIdentity };

std::string activation_name(Activation act);
Activation activation_from_name(const std::string& name);

// One dense layer: out = act(weights * in + bias).
struct Layer {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim
  Activation activation = Activation::kIdentity;
};

// Fully connected feed-forward network. The last layer's activation is the
// head (sigmoid for binary heads, softmax for categorical ones; identity
// heads are allowed for hand-built models).
struct MlpModel {
  Index input_dim = 0;
  std::vector<Layer> layers;

  Index output_dim() const {
    return layers.empty() ? 0 : layers.back().weights.rows();
  }
  Activation head() const {
    return layers.empty() ? Activation::kIdentity : layers.back().activation;
  }
};

// Throws ValidationError if layer shapes do not chain from input_dim or any
// coefficient is non-finite.
void validate_model(const MlpModel& model);

Vector apply_activation(Activation act, const Vector& z);

// Forward pass for a single input (length input_dim, finite).
Vector forward(const MlpModel& model, const Vector& x);

// Row-wise forward pass for a batch (n x input_dim).
Matrix forward_batch(const MlpModel& model, const Matrix& x);

// Exact reverse-mode gradient of output[output_index] with respect to x.
// With logit_space the head activation is treated as identity.
Vector input_gradient(const MlpModel& model, const Vector& x, Index output_index,
                      bool logit_space = false);

// Stacked gradients of every output: output_dim x input_dim.
Matrix input_jacobian(const MlpModel& model, const Vector& x,
                      bool logit_space = false);

// Integrated gradients of output[output_index] along the straight path from
// baseline to x, midpoint Riemann rule with `steps` samples.
Vector integrated_gradient(const MlpModel& model, const Vector& x,
                           const Vector& baseline, Index output_index, int steps,
                           bool logit_space = false);

// JSON round-trip; coefficients survive bit-exactly (shortest round-trip
// decimal encoding).
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

}  // namespace faux
