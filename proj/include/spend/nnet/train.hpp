#pragma once

#include <cstdint>
#include <functional>

#include "json.hpp"
#include "spend/nnet/model.hpp"

namespace spend::nnet {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.1;
  bool augment = true;
  /// Scale frames by the RMS of the training inputs.
  bool normalize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& tc);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& mc);

/// Frames held out for validation out of n: floor(fraction * n).
std::size_t validation_count(std::size_t n, double fraction);

/// Called after each epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on (input, target) frame pairs with Adam and MSE loss. Frames are
/// augmented, shuffled with a stream drawn from tc.seed, split 90/10, and the
/// parameters with the lowest validation loss are returned. A non-finite
/// validation loss stops training and sets `diverged`.
DenoiserModel train(DenoiserModel model, const FramePairs& pairs, const TrainConfig& tc,
                    const EpochCallback& on_epoch = {});

DenoiserModel train(DenoiserModel model, const permute::PairSet& pairs, const TrainConfig& tc,
                    const EpochCallback& on_epoch = {});

}  // namespace spend::nnet
