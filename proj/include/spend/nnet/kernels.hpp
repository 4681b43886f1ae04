#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spend/nnet/tensor.hpp"

// Per-frame layer kernels. Convolutions are "same" size with reflected
// borders; weights are laid out [out][in][ky][kx] and kernel size is 1 or 3.
//
// spend::nnet::kernels holds the optimized versions (vectorizable stencils,
// OpenMP over channels when not already inside a parallel region);
// spend::nnet::reference holds plain loops used as the test oracle.

namespace spend::nnet {

/// Reflection without edge repeat: -1 -> 1, n -> n - 2. Size-1 axes clamp.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

namespace kernels {

template <class T>
void conv_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                  std::size_t k, std::size_t cout, Tensor<T>& out);

/// Accumulates into grad_in (if non-null), grad_weight and grad_bias.
template <class T>
void conv_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out,
                   std::size_t k, Tensor<T>* grad_in, std::span<T> grad_weight,
                   std::span<T> grad_bias);

template <class T>
void relu_forward(const Tensor<T>& in, Tensor<T>& out);
template <class T>
void relu_backward(const Tensor<T>& in, const Tensor<T>& grad_out, Tensor<T>& grad_in);

/// 2x2 max pooling; `arg` receives the winning offset (0..3) per output.
template <class T>
void maxpool_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::uint8_t>& arg);
template <class T>
void maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& arg,
                      Tensor<T>& grad_in);

/// Nearest-neighbour 2x upsampling.
template <class T>
void upsample_forward(const Tensor<T>& in, Tensor<T>& out);
template <class T>
void upsample_backward(const Tensor<T>& grad_out, Tensor<T>& grad_in);

}  // namespace kernels

namespace reference {

template <class T>
void conv_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                  std::size_t k, std::size_t cout, Tensor<T>& out);

template <class T>
void conv_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out,
                   std::size_t k, Tensor<T>* grad_in, std::span<T> grad_weight,
                   std::span<T> grad_bias);

}  // namespace reference

}  // namespace spend::nnet
