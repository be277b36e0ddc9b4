#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "witch/data_io.hpp"
#include "witch/model.hpp"

namespace witch {

// Inner attack used to harden a model during training. The default mirrors
// the usual 7-step fixed-step recipe; the randomized-step attack can be
// switched on but is not the default.
struct AdvTrainConfig {
  float epsilon = 0.3f;
  int steps = 7;
  float step_size = 0.1f;
  bool use_witchcraft = false;
};

struct TrainConfig {
  int epochs = 5;
  int batch_size = 32;
  float learning_rate = 0.1f;
  std::uint64_t seed = 0;
  std::optional<AdvTrainConfig> adversarial;
};

struct TrainStats {
  std::vector<double> epoch_loss;      // mean minibatch loss per epoch
  std::vector<double> epoch_accuracy;  // train accuracy per epoch
};

// Plain minibatch SGD (no momentum); deterministic under cfg.seed.
Model train_sgd(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                TrainStats* stats = nullptr);

// Same loop, but every minibatch example is replaced by its attacked
// version before the gradient step. With adversarial steps == 0 the
// trajectory is identical to train_sgd.
Model adversarial_train(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                        TrainStats* stats = nullptr);

// Clean accuracy over a dataset (parallel over examples).
double accuracy(const Model& model, const LabeledDataset& data);

}  // namespace witch
