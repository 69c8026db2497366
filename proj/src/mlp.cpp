#include "faux/mlp.hpp"

#include <cmath>

#include <json.hpp>

#include "faux/errors.hpp"

namespace faux {
namespace {

using nlohmann::json;

// Backpropagates an output-side gradient through one activation:
// returns dL/dz given dL/da where a = act(z).
Vector activation_backward(Activation act, const Vector& z, const Vector& a,
                           const Vector& grad_out) {
  switch (act) {
    case Activation::kIdentity:
      return grad_out;
    case Activation::kRelu:
      return (z.array() > 0.0).select(grad_out, Vector::Zero(z.size()));
    case Activation::kSigmoid:
      return grad_out.array() * a.array() * (1.0 - a.array());
    case Activation::kSoftmax: {
      // J^T g = a .* (g - (g . a))
      const double mix = grad_out.dot(a);
      return a.array() * (grad_out.array() - mix);
    }
  }
  throw ValidationError("unknown activation");
}

struct Trace {
  std::vector<Vector> pre;   // z per layer
  std::vector<Vector> post;  // act(z) per layer
};

Trace forward_trace(const MlpModel& model, const Vector& x) {
  Trace trace;
  trace.pre.reserve(model.layers.size());
  trace.post.reserve(model.layers.size());
  Vector current = x;
  for (const Layer& layer : model.layers) {
    Vector z = layer.weights * current + layer.bias;
    current = apply_activation(layer.activation, z);
    trace.pre.push_back(std::move(z));
    trace.post.push_back(current);
  }
  return trace;
}

void check_input(const MlpModel& model, const Vector& x) {
  if (x.size() != model.input_dim) {
    throw ValidationError("forward: input has length " + std::to_string(x.size()) +
                          ", expected " + std::to_string(model.input_dim));
  }
  if (!x.allFinite()) {
    throw ValidationError("forward: input has non-finite entries");
  }
}

}  // namespace

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
    case Activation::kIdentity: return "identity";
  }
  throw ValidationError("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  if (name == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation name: " + name);
}

void validate_model(const MlpModel& model) {
  if (model.layers.empty()) {
    throw ValidationError("model has no layers");
  }
  if (model.input_dim <= 0) {
    throw ValidationError("model input_dim must be positive");
  }
  Index dim = model.input_dim;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (layer.weights.cols() != dim) {
      throw ValidationError("layer " + std::to_string(i) + " expects input of size " +
                            std::to_string(layer.weights.cols()) + ", got " +
                            std::to_string(dim));
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw ValidationError("layer " + std::to_string(i) + " bias/weight mismatch");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("layer " + std::to_string(i) + " has non-finite coefficients");
    }
    dim = layer.weights.rows();
  }
}

Vector apply_activation(Activation act, const Vector& z) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kSigmoid:
      return (1.0 + (-z.array()).exp()).inverse();
    case Activation::kSoftmax: {
      Eigen::ArrayXd shifted = z.array() - z.maxCoeff();
      Eigen::ArrayXd e = shifted.exp();
      return e / e.sum();
    }
  }
  throw ValidationError("unknown activation");
}

Vector forward(const MlpModel& model, const Vector& x) {
  validate_model(model);
  check_input(model, x);
  Vector current = x;
  for (const Layer& layer : model.layers) {
    current = apply_activation(layer.activation, layer.weights * current + layer.bias);
  }
  return current;
}

Matrix forward_batch(const MlpModel& model, const Matrix& x) {
  validate_model(model);
  if (x.cols() != model.input_dim) {
    throw ValidationError("forward_batch: inputs have width " + std::to_string(x.cols()) +
                          ", expected " + std::to_string(model.input_dim));
  }
  if (!x.allFinite()) {
    throw ValidationError("forward_batch: inputs have non-finite entries");
  }
  // Row-by-row on purpose: a fused matrix product changes the summation
  // order, and batch results must agree bit-exactly with forward().
  Matrix out(x.rows(), model.output_dim());
  for (Index r = 0; r < x.rows(); ++r) {
    Vector current = x.row(r).transpose();
    for (const Layer& layer : model.layers) {
      current = apply_activation(layer.activation, layer.weights * current + layer.bias);
    }
    out.row(r) = current.transpose();
  }
  return out;
}

Vector input_gradient(const MlpModel& model, const Vector& x, Index output_index,
                      bool logit_space) {
  validate_model(model);
  check_input(model, x);
  if (output_index < 0 || output_index >= model.output_dim()) {
    throw ValidationError("input_gradient: output index out of range");
  }
  const Trace trace = forward_trace(model, x);
  const Index last = static_cast<Index>(model.layers.size()) - 1;
  Vector grad = Vector::Zero(model.output_dim());
  grad(output_index) = 1.0;
  for (Index l = last; l >= 0; --l) {
    const Layer& layer = model.layers[l];
    const Activation act =
        (l == last && logit_space) ? Activation::kIdentity : layer.activation;
    const Vector delta = activation_backward(act, trace.pre[l], trace.post[l], grad);
    grad = layer.weights.transpose() * delta;
  }
  return grad;
}

Matrix input_jacobian(const MlpModel& model, const Vector& x, bool logit_space) {
  const Index k = model.output_dim();
  Matrix jac(k, model.input_dim);
  for (Index i = 0; i < k; ++i) {
    jac.row(i) = input_gradient(model, x, i, logit_space).transpose();
  }
  return jac;
}

Vector integrated_gradient(const MlpModel& model, const Vector& x,
                           const Vector& baseline, Index output_index, int steps,
                           bool logit_space) {
  if (steps < 1) {
    throw ValidationError("integrated_gradient: steps must be >= 1");
  }
  if (baseline.size() != x.size()) {
    throw ValidationError("integrated_gradient: baseline length mismatch");
  }
  const Vector diff = x - baseline;
  Vector acc = Vector::Zero(x.size());
  for (int i = 0; i < steps; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(steps);
    acc += input_gradient(model, baseline + t * diff, output_index, logit_space);
  }
  return diff.array() * (acc.array() / static_cast<double>(steps));
}

std::string model_to_json(const MlpModel& model) {
  validate_model(model);
  json doc;
  doc["input_dim"] = model.input_dim;
  doc["head"] = activation_name(model.head());
  json layers = json::array();
  for (const Layer& layer : model.layers) {
    json entry;
    entry["rows"] = layer.weights.rows();
    entry["cols"] = layer.weights.cols();
    std::vector<double> weights;
    weights.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Index r = 0; r < layer.weights.rows(); ++r) {
      for (Index c = 0; c < layer.weights.cols(); ++c) {
        weights.push_back(layer.weights(r, c));
      }
    }
    entry["weights"] = weights;
    entry["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    entry["activation"] = activation_name(layer.activation);
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

MlpModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON parse error: ") + e.what());
  }
  MlpModel model;
  try {
    model.input_dim = doc.at("input_dim").get<Index>();
    for (const json& entry : doc.at("layers")) {
      Layer layer;
      const Index rows = entry.at("rows").get<Index>();
      const Index cols = entry.at("cols").get<Index>();
      const auto weights = entry.at("weights").get<std::vector<double>>();
      const auto bias = entry.at("bias").get<std::vector<double>>();
      if (static_cast<Index>(weights.size()) != rows * cols ||
          static_cast<Index>(bias.size()) != rows) {
        throw ValidationError("model JSON: weight/bias sizes disagree with rows/cols");
      }
      layer.weights.resize(rows, cols);
      for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
          layer.weights(r, c) = weights[static_cast<std::size_t>(r * cols + c)];
        }
      }
      layer.bias = Eigen::Map<const Vector>(bias.data(), rows);
      layer.activation = activation_from_name(entry.at("activation").get<std::string>());
      model.layers.push_back(std::move(layer));
    }
    if (doc.contains("head") &&
        activation_from_name(doc.at("head").get<std::string>()) != model.head()) {
      throw ValidationError("model JSON: head disagrees with last layer activation");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model JSON is malformed: ") + e.what());
  }
  validate_model(model);
  return model;
}

}  // namespace faux
