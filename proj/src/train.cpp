#include "witch/train.hpp"

#include <cassert>
#include <numeric>

#include "witch/attacks.hpp"

namespace witch {

namespace {

void validate_train_config(const TrainConfig& cfg) {
  require(cfg.epochs >= 1, "epochs must be positive");
  require(cfg.batch_size >= 1, "batch size must be positive");
  require(cfg.learning_rate >= 0.0f, "learning rate must be non-negative");
  if (cfg.adversarial) {
    require(cfg.adversarial->epsilon > 0.0f, "adversarial epsilon must be positive");
    require(cfg.adversarial->steps >= 0, "adversarial steps must be non-negative");
    require(cfg.adversarial->step_size > 0.0f, "adversarial step size must be positive");
  }
}

// Deterministic Fisher-Yates from a per-epoch substream.
std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::derive(seed, 0x45504f43u, static_cast<std::uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

Model train_loop(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                 TrainStats* stats) {
  validate_train_config(cfg);
  require(data.count() >= 1, "dataset is empty");
  require(data.image_shape() == model.input_shape, "dataset images do not match model input");
  require(data.class_count == model.class_count, "dataset classes do not match model");

  const bool attack_enabled = cfg.adversarial && cfg.adversarial->steps > 0;
  const int n = data.count();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = epoch_order(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::int64_t correct = 0;

    for (int start = 0; start < n; start += cfg.batch_size) {
      int batch_n = std::min(cfg.batch_size, n - start);
      auto grads = zero_param_grads(model);

      for (int b = 0; b < batch_n; ++b) {
        int idx = order[start + b];
        Tensor x = data.image(idx);
        int y = data.label(idx);

        if (attack_enabled) {
          const AdvTrainConfig& adv = *cfg.adversarial;
          PerturbationBudget budget{adv.epsilon, 0.0f, 1.0f, x};
          RngStream stream = RngStream::derive(cfg.seed, 0x41445654u,
                                               static_cast<std::uint64_t>(epoch),
                                               static_cast<std::uint64_t>(idx));
          // No early stop: train on the final iterate of the full-length
          // attack.
          AttackResult res;
          if (adv.use_witchcraft)
            res = witchcraft(model, x, y, budget, adv.step_size, adv.steps, stream,
                             /*early_stop=*/false);
          else
            res = pgd(model, x, y, budget, adv.step_size, adv.steps, /*early_stop=*/false,
                      /*random_init=*/true, stream);
          assert(in_budget(res.delta, budget));
          x = add(x, res.delta);
        }

        ForwardTrace trace;
        Tensor logits = forward(model, x, &trace);
        Tensor dlogits(logits.shape);
        float loss = kern::softmax_xent(logits.data.data(), y, model.class_count,
                                        dlogits.data.data());
        backward(model, trace, dlogits, &grads);
        loss_sum += loss;
        if (predict_logits(logits) == y) ++correct;
      }

      float scale = cfg.learning_rate / static_cast<float>(batch_n);
      for (std::size_t li = 0; li < model.layers.size(); ++li) {
        Layer& l = model.layers[li];
        for (std::int64_t i = 0; i < l.weights.size(); ++i)
          l.weights[i] -= scale * grads[li].weights[i];
        for (std::int64_t i = 0; i < l.bias.size(); ++i)
          l.bias[i] -= scale * grads[li].bias[i];
      }
    }

    for (const Layer& l : model.layers) {
      require(l.weights.all_finite() && l.bias.all_finite(),
              "parameters became non-finite at epoch " + std::to_string(epoch) +
                  " (learning rate too high?)");
    }
    if (stats) {
      stats->epoch_loss.push_back(loss_sum / n);
      stats->epoch_accuracy.push_back(static_cast<double>(correct) / n);
    }
  }
  return model;
}

}  // namespace

Model train_sgd(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                TrainStats* stats) {
  TrainConfig plain = cfg;
  plain.adversarial.reset();
  return train_loop(std::move(model), data, plain, stats);
}

Model adversarial_train(Model model, const LabeledDataset& data, const TrainConfig& cfg,
                        TrainStats* stats) {
  require(cfg.adversarial.has_value(), "adversarial_train needs an adversarial sub-config");
  return train_loop(std::move(model), data, cfg, stats);
}

double accuracy(const Model& model, const LabeledDataset& data) {
  const int n = data.count();
  std::int64_t correct = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : correct)
  for (int i = 0; i < n; ++i) {
    if (predict(model, data.image(i)) == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / std::max(n, 1);
}

}  // namespace witch
