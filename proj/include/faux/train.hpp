#pragma once

#include <cstdint>
#include <vector>

#include "faux/dataset.hpp"
#include "faux/mlp.hpp"
#include "faux/rng.hpp"
#include "faux/types.hpp"

namespace faux {

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
};

// Adversarial debiasing settings: the target minimizes
// task_loss - alpha * adversary_loss, alternating with n_adv adversary
// epochs per target epoch; alpha is multiplied by alpha_decay every epoch.
struct AdversaryConfig {
  double alpha = 100.0;
  double alpha_decay = 0.99;
  int n_adv = 3;
  std::vector<Index> hidden = {8};
};

struct TrainResult {
  MlpModel model;
  int epochs_run = 0;
  int best_epoch = 0;  // 0 means the initialization was never improved on
  double best_val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

// Which dataset column block a model is trained to predict.
enum class TargetRole { kLabel, kProtected };

// Glorot-uniform MLP: relu hidden layers, sigmoid head when output_dim == 1,
// softmax otherwise. Biases start at zero.
MlpModel make_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                  Rng& rng);

// Mini-batch Adam on cross-entropy with a deterministic validation carve and
// early stopping; returns the parameters of the best validation epoch.
// Targets are n x 1 (binary, sigmoid head) or n x k one-hot (softmax head).
TrainResult train(const MlpModel& init, const Matrix& inputs, const Matrix& targets,
                  const TrainConfig& config);

TrainResult train(const MlpModel& init, const Dataset& data, TargetRole role,
                  const TrainConfig& config);

// Adversarial debiasing: the adversary reads the target's output
// probabilities and predicts the protected attributes. With alpha == 0 this
// is extensionally equal to train().
TrainResult train_adversarial(const MlpModel& init, const Dataset& data,
                              const TrainConfig& config, const AdversaryConfig& adv);

// L2-regularized logistic regression fit by full-batch gradient descent until
// the gradient norm is <= 1e-6 or 5000 iterations.
struct LinearModel {
  Vector weights;
  double bias = 0.0;
};

LinearModel fit_logistic(const Matrix& inputs, const Vector& targets,
                         double l2_penalty = 1.0);

LinearModel fit_logistic(const Dataset& data, Index protected_column = 0,
                         double l2_penalty = 1.0);

}  // namespace faux
