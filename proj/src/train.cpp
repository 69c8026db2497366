#include "faux/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "faux/errors.hpp"

namespace faux {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct BatchTrace {
  std::vector<Matrix> pre;   // z per layer, rows = batch
  std::vector<Matrix> post;  // act(z)
};

Matrix activate_batch(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kSigmoid:
      return (1.0 + (-z.array()).exp()).inverse();
    case Activation::kSoftmax: {
      Eigen::ArrayXXd shifted = z.array().colwise() - z.rowwise().maxCoeff().array();
      Eigen::ArrayXXd e = shifted.exp();
      return e.colwise() / e.rowwise().sum();
    }
  }
  throw ValidationError("unknown activation");
}

BatchTrace trace_batch(const MlpModel& model, const Matrix& x) {
  BatchTrace trace;
  trace.pre.reserve(model.layers.size());
  trace.post.reserve(model.layers.size());
  const Matrix* current = &x;
  for (const Layer& layer : model.layers) {
    Matrix z = (*current * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    trace.post.push_back(activate_batch(layer.activation, z));
    trace.pre.push_back(std::move(z));
    current = &trace.post.back();
  }
  return trace;
}

// dL/da -> dL/dz for a whole batch.
Matrix activation_backward_batch(Activation act, const Matrix& z, const Matrix& a,
                                 const Matrix& grad_out) {
  switch (act) {
    case Activation::kIdentity:
      return grad_out;
    case Activation::kRelu:
      return (z.array() > 0.0).select(grad_out, Matrix::Zero(z.rows(), z.cols()));
    case Activation::kSigmoid:
      return grad_out.array() * a.array() * (1.0 - a.array());
    case Activation::kSoftmax: {
      Vector mix = (grad_out.array() * a.array()).rowwise().sum();
      return a.array() * (grad_out.array().colwise() - mix.array());
    }
  }
  throw ValidationError("unknown activation");
}

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

// Backpropagates the head pre-activation delta (already per-row) and returns
// batch-mean parameter gradients.
Gradients backward_batch(const MlpModel& model, const Matrix& x, const BatchTrace& trace,
                         Matrix delta_z) {
  const double inv_batch = 1.0 / static_cast<double>(x.rows());
  const int last = static_cast<int>(model.layers.size()) - 1;
  Gradients grads;
  grads.weights.resize(model.layers.size());
  grads.bias.resize(model.layers.size());
  for (int l = last; l >= 0; --l) {
    const Matrix& input = l == 0 ? x : trace.post[static_cast<std::size_t>(l) - 1];
    grads.weights[static_cast<std::size_t>(l)] = delta_z.transpose() * input * inv_batch;
    grads.bias[static_cast<std::size_t>(l)] = delta_z.colwise().sum().transpose() * inv_batch;
    if (l > 0) {
      const Matrix grad_post = delta_z * model.layers[static_cast<std::size_t>(l)].weights;
      delta_z = activation_backward_batch(
          model.layers[static_cast<std::size_t>(l) - 1].activation,
          trace.pre[static_cast<std::size_t>(l) - 1],
          trace.post[static_cast<std::size_t>(l) - 1], grad_post);
    }
  }
  return grads;
}

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  int step = 0;

  AdamState() = default;
  explicit AdamState(const MlpModel& model) {
    for (const Layer& layer : model.layers) {
      mw.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
      vw.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
      mb.push_back(Vector::Zero(layer.bias.size()));
      vb.push_back(Vector::Zero(layer.bias.size()));
    }
  }
};

void adam_update(MlpModel& model, const Gradients& grads, AdamState& state, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, state.step);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, state.step);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    state.mw[l] = kAdamBeta1 * state.mw[l] + (1.0 - kAdamBeta1) * grads.weights[l];
    state.vw[l] = kAdamBeta2 * state.vw[l].array() +
                  (1.0 - kAdamBeta2) * grads.weights[l].array().square();
    state.mb[l] = kAdamBeta1 * state.mb[l] + (1.0 - kAdamBeta1) * grads.bias[l];
    state.vb[l] = kAdamBeta2 * state.vb[l].array() +
                  (1.0 - kAdamBeta2) * grads.bias[l].array().square();
    model.layers[l].weights.array() -=
        lr * (state.mw[l].array() / bc1) / ((state.vw[l].array() / bc2).sqrt() + kAdamEps);
    model.layers[l].bias.array() -=
        lr * (state.mb[l].array() / bc1) / ((state.vb[l].array() / bc2).sqrt() + kAdamEps);
  }
}

// Mean cross-entropy of probabilities against 0/1 (or one-hot) targets.
double cross_entropy(const Matrix& probs, const Matrix& targets) {
  constexpr double kClip = 1e-12;
  if (probs.cols() == 1) {
    const auto p = probs.array().min(1.0 - kClip).max(kClip);
    const auto t = targets.array();
    return -(t * p.log() + (1.0 - t) * (1.0 - p).log()).mean();
  }
  const auto p = probs.array().max(kClip);
  return -(targets.array() * p.log()).rowwise().sum().mean();
}

double accuracy(const Matrix& probs, const Matrix& targets) {
  const Index n = probs.rows();
  if (n == 0) return 0.0;
  Index hits = 0;
  if (probs.cols() == 1) {
    for (Index i = 0; i < n; ++i) {
      hits += (probs(i, 0) > 0.5 ? 1.0 : 0.0) == targets(i, 0);
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      Index pi, ti;
      probs.row(i).maxCoeff(&pi);
      targets.row(i).maxCoeff(&ti);
      hits += pi == ti;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

Matrix take(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

void check_training_inputs(const MlpModel& init, const Matrix& inputs,
                           const Matrix& targets) {
  validate_model(init);
  if (inputs.rows() == 0) {
    throw ValidationError("train: dataset is empty");
  }
  if (inputs.cols() != init.input_dim) {
    throw ValidationError("train: input width disagrees with model input_dim");
  }
  if (targets.rows() != inputs.rows()) {
    throw ValidationError("train: target rows disagree with input rows");
  }
  if (targets.cols() != init.output_dim()) {
    throw ValidationError("train: target width disagrees with model output_dim");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw ValidationError("train: non-finite training data");
  }
  const Activation head = init.head();
  if (targets.cols() == 1 && head != Activation::kSigmoid) {
    throw ValidationError("train: binary targets need a sigmoid head");
  }
  if (targets.cols() > 1 && head != Activation::kSoftmax) {
    throw ValidationError("train: categorical targets need a softmax head");
  }
  for (Index i = 0; i < targets.rows(); ++i) {
    double sum = 0.0;
    for (Index j = 0; j < targets.cols(); ++j) {
      const double v = targets(i, j);
      if (v != 0.0 && v != 1.0) {
        throw ValidationError("train: targets must be 0/1 (row " + std::to_string(i) + ")");
      }
      sum += v;
    }
    if (targets.cols() > 1 && sum != 1.0) {
      throw ValidationError("train: one-hot target row " + std::to_string(i) +
                            " does not sum to 1");
    }
  }
}

// Adversary context for train_adversarial; null for plain training. All
// adversary randomness comes from its own stream so that alpha == 0 runs are
// bit-identical to train().
struct AdversaryRun {
  MlpModel model;
  AdamState state;
  Rng rng{0};
  double alpha = 0.0;
  const AdversaryConfig* cfg = nullptr;
  const Matrix* protected_attrs = nullptr;  // aligned with the full input matrix
};

// Gradient of the adversary's mean CE loss with respect to its inputs,
// row-wise (batch x adversary_input_dim), at fixed adversary parameters.
Matrix adversary_input_grads(const MlpModel& adv, const Matrix& inputs,
                             const Matrix& targets) {
  const BatchTrace trace = trace_batch(adv, inputs);
  Matrix delta_z = trace.post.back() - targets;  // fused head delta
  for (int l = static_cast<int>(adv.layers.size()) - 1; l >= 1; --l) {
    const Matrix grad_post = delta_z * adv.layers[static_cast<std::size_t>(l)].weights;
    delta_z = activation_backward_batch(adv.layers[static_cast<std::size_t>(l) - 1].activation,
                                        trace.pre[static_cast<std::size_t>(l) - 1],
                                        trace.post[static_cast<std::size_t>(l) - 1], grad_post);
  }
  return delta_z * adv.layers[0].weights;
}

TrainResult run_training(const MlpModel& init, const Matrix& inputs, const Matrix& targets,
                         const TrainConfig& config, AdversaryRun* adversary) {
  check_training_inputs(init, inputs, targets);
  if (config.batch_size < 1 || config.max_epochs < 0 || config.patience < 1 ||
      !(config.learning_rate > 0.0)) {
    throw ValidationError("train: invalid config (batch_size/patience/lr)");
  }

  TrainResult result;
  result.model = init;
  if (config.max_epochs == 0) {
    const Matrix probs = forward_batch(init, inputs);
    result.best_val_loss = cross_entropy(probs, targets);
    result.train_accuracy = result.val_accuracy = accuracy(probs, targets);
    return result;
  }
  const Index n = inputs.rows();
  if (n < 2) {
    throw ValidationError("train: need at least 2 rows to carve a validation split");
  }

  Rng rng(config.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const Index n_val = std::clamp<Index>(
      static_cast<Index>(std::lround(config.val_fraction * static_cast<double>(n))), 1,
      n - 1);
  std::vector<Index> val_rows(order.begin(), order.begin() + n_val);
  std::vector<Index> train_rows(order.begin() + n_val, order.end());

  const Matrix val_x = take(inputs, val_rows);
  const Matrix val_t = take(targets, val_rows);

  MlpModel model = init;
  AdamState state(model);
  MlpModel best = model;
  double best_val = cross_entropy(forward_batch(model, val_x), val_t);
  int best_epoch = 0;
  int wait = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Refresh the adversary on the current target outputs.
    if (adversary && adversary->alpha != 0.0) {
      const Matrix train_x_now = take(inputs, train_rows);
      const Matrix adv_in = forward_batch(model, train_x_now);
      const Matrix adv_t = take(*adversary->protected_attrs, train_rows);
      std::vector<Index> adv_order(train_rows.size());
      for (std::size_t i = 0; i < adv_order.size(); ++i) adv_order[i] = static_cast<Index>(i);
      for (int pass = 0; pass < adversary->cfg->n_adv; ++pass) {
        adversary->rng.shuffle(adv_order);
        for (std::size_t start = 0; start < adv_order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
          const std::size_t stop =
              std::min(adv_order.size(), start + static_cast<std::size_t>(config.batch_size));
          const std::vector<Index> batch(adv_order.begin() + static_cast<std::ptrdiff_t>(start),
                                         adv_order.begin() + static_cast<std::ptrdiff_t>(stop));
          const Matrix bx = take(adv_in, batch);
          const Matrix bt = take(adv_t, batch);
          const BatchTrace trace = trace_batch(adversary->model, bx);
          const double loss = cross_entropy(trace.post.back(), bt);
          if (!std::isfinite(loss)) {
            throw DivergenceError("adversary loss diverged (nan) at epoch " +
                                  std::to_string(epoch));
          }
          adam_update(adversary->model,
                      backward_batch(adversary->model, bx, trace, trace.post.back() - bt),
                      adversary->state, config.learning_rate);
        }
      }
    }

    rng.shuffle(train_rows);
    for (std::size_t start = 0; start < train_rows.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(train_rows.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<Index> batch(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                     train_rows.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix bx = take(inputs, batch);
      const Matrix bt = take(targets, batch);
      const BatchTrace trace = trace_batch(model, bx);
      const Matrix& probs = trace.post.back();
      const double loss = cross_entropy(probs, bt);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss diverged (nan) at epoch " +
                              std::to_string(epoch));
      }
      Matrix delta_z = probs - bt;
      if (adversary && adversary->alpha != 0.0) {
        const Matrix bc = take(*adversary->protected_attrs, batch);
        const Matrix grad_p = adversary_input_grads(adversary->model, probs, bc);
        // Minimize task - alpha * adversary loss: push the head against the
        // adversary's gradient, mapped through the head activation.
        delta_z -= adversary->alpha *
                   activation_backward_batch(model.layers.back().activation,
                                             trace.pre.back(), probs, grad_p);
      }
      adam_update(model, backward_batch(model, bx, trace, std::move(delta_z)), state,
                  config.learning_rate);
    }

    const double val_loss = cross_entropy(forward_batch(model, val_x), val_t);
    if (!std::isfinite(val_loss)) {
      throw DivergenceError("validation loss diverged (nan) at epoch " +
                            std::to_string(epoch));
    }
    result.epochs_run = epoch;
    if (val_loss < best_val) {
      best_val = val_loss;
      best = model;
      best_epoch = epoch;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
    if (adversary) adversary->alpha *= adversary->cfg->alpha_decay;
  }

  result.model = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  const Matrix train_x = take(inputs, train_rows);
  const Matrix train_t = take(targets, train_rows);
  result.train_accuracy = accuracy(forward_batch(result.model, train_x), train_t);
  result.val_accuracy = accuracy(forward_batch(result.model, val_x), val_t);
  return result;
}

Matrix role_targets(const Dataset& data, TargetRole role) {
  if (role == TargetRole::kLabel) return data.labels;
  if (data.k() == 0) {
    throw ValidationError("train: dataset has no protected columns");
  }
  return data.protected_attrs;
}

}  // namespace

MlpModel make_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                  Rng& rng) {
  if (input_dim < 1 || output_dim < 1) {
    throw ValidationError("make_mlp: dimensions must be positive");
  }
  MlpModel model;
  model.input_dim = input_dim;
  Index fan_in = input_dim;
  std::vector<Index> widths = hidden;
  widths.push_back(output_dim);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const Index fan_out = widths[l];
    if (fan_out < 1) {
      throw ValidationError("make_mlp: layer width must be positive");
    }
    Layer layer;
    layer.weights.resize(fan_out, fan_in);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Index r = 0; r < fan_out; ++r) {
      for (Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    layer.bias = Vector::Zero(fan_out);
    const bool is_head = l + 1 == widths.size();
    layer.activation = is_head
                           ? (output_dim == 1 ? Activation::kSigmoid : Activation::kSoftmax)
                           : Activation::kRelu;
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return model;
}

TrainResult train(const MlpModel& init, const Matrix& inputs, const Matrix& targets,
                  const TrainConfig& config) {
  return run_training(init, inputs, targets, config, nullptr);
}

TrainResult train(const MlpModel& init, const Dataset& data, TargetRole role,
                  const TrainConfig& config) {
  validate_dataset(data);
  return train(init, data.features, role_targets(data, role), config);
}

TrainResult train_adversarial(const MlpModel& init, const Dataset& data,
                              const TrainConfig& config, const AdversaryConfig& adv) {
  validate_dataset(data);
  if (adv.n_adv < 0 || adv.alpha < 0.0 || adv.alpha_decay < 0.0) {
    throw ValidationError("train_adversarial: invalid adversary config");
  }
  const Matrix targets = data.labels;
  if (data.k() == 0) {
    throw ValidationError("train_adversarial: dataset has no protected columns");
  }
  AdversaryRun run;
  run.rng = Rng::derive(config.seed, 0xad0e5a11ull);
  run.alpha = adv.alpha;
  run.cfg = &adv;
  run.protected_attrs = &data.protected_attrs;
  run.model = make_mlp(init.output_dim(), adv.hidden, data.k(), run.rng);
  run.state = AdamState(run.model);
  return run_training(init, data.features, targets, config, &run);
}

LinearModel fit_logistic(const Matrix& inputs, const Vector& targets, double l2_penalty) {
  const Index n = inputs.rows();
  if (n == 0) {
    throw ValidationError("fit_logistic: dataset is empty");
  }
  if (targets.size() != n) {
    throw ValidationError("fit_logistic: target length disagrees with rows");
  }
  if (!(l2_penalty >= 0.0)) {
    throw ValidationError("fit_logistic: l2_penalty must be >= 0");
  }
  for (Index i = 0; i < n; ++i) {
    if (targets(i) != 0.0 && targets(i) != 1.0) {
      throw ValidationError("fit_logistic: targets must be 0/1");
    }
  }
  // Fixed step from a Lipschitz bound of the regularized CE gradient.
  const double lip =
      0.25 * (inputs.squaredNorm() / static_cast<double>(n) + 1.0) + l2_penalty;
  const double step = 1.0 / lip;
  LinearModel model;
  model.weights = Vector::Zero(inputs.cols());
  model.bias = 0.0;
  for (int iter = 0; iter < 5000; ++iter) {
    const Vector z = inputs * model.weights + Vector::Constant(n, model.bias);
    const Vector p = (1.0 + (-z.array()).exp()).inverse();
    const Vector residual = (p - targets) / static_cast<double>(n);
    const Vector grad_w = inputs.transpose() * residual + l2_penalty * model.weights;
    const double grad_b = residual.sum();
    const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (!std::isfinite(grad_norm)) {
      throw DivergenceError("fit_logistic: gradient diverged at iteration " +
                            std::to_string(iter));
    }
    if (grad_norm <= 1e-6) break;
    model.weights -= step * grad_w;
    model.bias -= step * grad_b;
  }
  return model;
}

LinearModel fit_logistic(const Dataset& data, Index protected_column, double l2_penalty) {
  validate_dataset(data);
  if (protected_column < 0 || protected_column >= data.k()) {
    throw ValidationError("fit_logistic: protected column out of range");
  }
  return fit_logistic(data.features, data.protected_attrs.col(protected_column),
                      l2_penalty);
}

}  // namespace faux
