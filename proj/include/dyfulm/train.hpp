#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyfulm/data.hpp"
#include "dyfulm/model.hpp"
#include "dyfulm/optimizer.hpp"

namespace dyfulm {

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

// One optimizer step per batch over seeded-shuffle order. Batch loss is the
// mean of per-record combined losses, accumulated in index order so runs
// with the same seed produce bit-identical parameters and loss curves.
inline TrainResult train(Model& model, const std::vector<Record>& data, const TrainConfig& cfg,
                         const AblationToggles& toggles = {}) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1 || cfg.batch_size > static_cast<int>(data.size()))
    throw std::invalid_argument("train: batch_size " + std::to_string(cfg.batch_size) +
                                " outside [1," + std::to_string(data.size()) + "]");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be positive");
  if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("train: negative learning rate");

  Rng root(cfg.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  adam_cfg.beta1 = cfg.beta1;
  adam_cfg.beta2 = cfg.beta2;
  adam_cfg.epsilon = cfg.epsilon;
  Adam opt(model.params(), adam_cfg);

  const int n = static_cast<int>(data.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.epoch_loss.reserve(static_cast<size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      Tape tape(cfg.check_finite);
      Tensor batch_total;
      for (int k = start; k < stop; ++k) {
        const Record& r = data[static_cast<size_t>(order[static_cast<size_t>(k)])];
        const ForwardResult fwd = model.forward(tape, r.ids, toggles, &dropout_rng);
        const ExampleLoss l = model.example_loss(tape, fwd, r.coarse, r.fine, r.intensity, toggles);
        batch_total = k == start ? l.total : add(tape, batch_total, l.total);
      }
      Tensor batch_loss = scale(tape, batch_total, 1.0 / static_cast<double>(stop - start));
      const double loss_value = batch_loss.value();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss " + std::to_string(loss_value) +
                                 " at epoch " + std::to_string(epoch) + ", batch starting at " +
                                 std::to_string(start));
      tape.backward(batch_loss);
      clip_global_norm(model.params(), cfg.clip_norm);
      opt.step();
      opt.zero_grad();
      epoch_sum += loss_value * static_cast<double>(stop - start);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
  }
  return result;
}

// deterministic front/back split; callers shuffle beforehand if needed
inline std::pair<std::vector<Record>, std::vector<Record>> split_holdout(
    const std::vector<Record>& data, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("split_holdout: fraction must be inside (0,1)");
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const size_t held = std::max<size_t>(1, static_cast<size_t>(std::floor(
                                              static_cast<double>(data.size()) * holdout_fraction)));
  std::pair<std::vector<Record>, std::vector<Record>> out;
  for (size_t i = 0; i < order.size(); ++i) {
    const Record& r = data[static_cast<size_t>(order[i])];
    if (i < order.size() - held)
      out.first.push_back(r);
    else
      out.second.push_back(r);
  }
  return out;
}

}  // namespace dyfulm
