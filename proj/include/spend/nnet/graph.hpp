#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spend/nnet/tensor.hpp"

namespace spend::nnet {

enum class Op { Input, Conv, Relu, MaxPool, Upsample, Concat };

struct Node {
  Op op = Op::Input;
  int a = -1;  // first input node
  int b = -1;  // second input node (Concat only)
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t kernel = 0;
  std::size_t param_offset = 0;  // weights, then cout biases
  std::size_t channels = 0;      // output channel count
};

/// Feed-forward network over single-channel frames. Node 0 is the input and
/// the last node added is the output.
class Graph {
 public:
  Graph();

  int conv(int from, std::size_t cout, std::size_t kernel);
  int relu(int from);
  int maxpool(int from);
  int upsample(int from);
  int concat(int first, int second);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t param_count() const { return params_; }
  std::size_t output_channels() const { return nodes_.back().channels; }
  /// Number of 2x poolings on the deepest path; frame sides must divide 2^levels.
  int levels() const { return levels_; }
  std::string describe() const;

 private:
  int push(Node n);
  std::vector<Node> nodes_;
  std::vector<int> depth_;
  std::size_t params_ = 0;
  int levels_ = 0;
};

template <class T>
struct Workspace {
  std::vector<Tensor<T>> act;
  std::vector<Tensor<T>> grad;
  std::vector<std::vector<std::uint8_t>> pool_arg;
};

template <class T>
const Tensor<T>& forward(const Graph& g, std::span<const T> params, const Tensor<T>& input,
                         Workspace<T>& ws);

/// Reverse pass for the most recent forward() on `ws`; adds into grad_params.
template <class T>
void backward(const Graph& g, std::span<const T> params, Workspace<T>& ws,
              const Tensor<T>& grad_output, std::span<T> grad_params);

/// Index of the first node whose activation holds a non-finite value, or -1.
template <class T>
int first_nonfinite(const Workspace<T>& ws);

}  // namespace spend::nnet
