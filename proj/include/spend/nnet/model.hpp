#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spend/cube.hpp"
#include "spend/nnet/graph.hpp"
#include "spend/permute.hpp"

namespace spend::nnet {

struct ModelConfig {
  int depth = 2;
  int base_channels = 16;
  int kernel = 3;
  bool skip_connections = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct DenoiserModel {
  ModelConfig config;
  Graph graph;
  std::vector<float> params;
  std::vector<EpochRecord> history;
  /// Frames are divided by this before the network and multiplied back after.
  float input_scale = 1.0f;
  /// Axis the training pairs were permuted along; predict slices perpendicular to it.
  Axis axis = Axis::W;
  bool diverged = false;
};

/// Encoder-decoder: per level two conv+ReLU then 2x2 max pooling, a two-conv
/// bottleneck, per level nearest upsampling, skip concatenation and two
/// conv+ReLU, and a final linear 1x1 conv to one channel.
Graph build_graph(const ModelConfig& config);

/// He-uniform weights (bound sqrt(6 / fan_in)) drawn from the seed, zero biases.
DenoiserModel build_model(const ModelConfig& config);

std::size_t parameter_count(const ModelConfig& config);

/// Throws unless both sides are divisible by 2^depth.
void check_frame_shape(const ModelConfig& config, std::size_t rows, std::size_t cols);

template <class T>
Tensor<T> to_tensor(const Image& im);
Image to_image(const Tensor<float>& t);

/// Raw network output for each frame (no padding, no scaling).
std::vector<Image> forward(const DenoiserModel& model, const std::vector<Image>& frames);

template <class T>
struct LossGrad {
  double loss = 0;
  std::vector<T> grad;
};

/// Mean over frames of per-frame mean squared error and its gradient with
/// respect to every parameter. Frames run in parallel; per-frame gradients
/// are summed in frame order.
template <class T>
LossGrad<T> loss_and_grad(const Graph& graph, std::span<const T> params,
                          const std::vector<Tensor<T>>& inputs,
                          const std::vector<Tensor<T>>& targets);

LossGrad<float> loss_and_grad(const DenoiserModel& model, const std::vector<Image>& inputs,
                              const std::vector<Image>& targets);

/// Mean squared error only (no backward pass).
double batch_loss(const Graph& graph, std::span<const float> params,
                  const std::vector<Tensor<float>>& inputs,
                  const std::vector<Tensor<float>>& targets);

/// Reflect-pads a frame up to a multiple of `unit` on each side.
Image pad_to_multiple(const Image& im, std::size_t unit);
Image crop(const Image& im, std::size_t rows, std::size_t cols);

Image predict_frame(const DenoiserModel& model, const Image& frame);

/// Denoises every frame perpendicular to model.axis, in original order.
HyperCube predict(const DenoiserModel& model, const HyperCube& cube);

/// Flip group used for augmentation: 0 identity, 1 horizontal (mirror
/// columns), 2 vertical (mirror rows), 3 rotation by 180 degrees.
Image flip(const Image& im, int transform);

/// Each frame becomes four consecutive frames (identity, horizontal,
/// vertical, 180 degrees); the same transform is applied to input and target.
permute::PairSet augment(const permute::PairSet& pairs);

struct FramePairs {
  std::vector<Image> input;
  std::vector<Image> target;
};

FramePairs frame_pairs(const permute::PairSet& pairs);
FramePairs augment(const FramePairs& pairs);

}  // namespace spend::nnet
