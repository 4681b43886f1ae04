#include "spend/cube.hpp"
#include "spend/nnet/kernels.hpp"

namespace spend::nnet::reference {

namespace {

std::ptrdiff_t half(std::size_t k) { return static_cast<std::ptrdiff_t>(k / 2); }

}  // namespace

template <class T>
void conv_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                  std::size_t k, std::size_t cout, Tensor<T>& out) {
  if (k != 1 && k != 3) throw Error("conv: kernel size must be 1 or 3");
  out.resize(cout, in.h, in.w);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t y = 0; y < in.h; ++y) {
      for (std::size_t x = 0; x < in.w; ++x) {
        T acc = bias[co];
        for (std::size_t ci = 0; ci < in.c; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y + ky) - half(k), in.h);
              const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x + kx) - half(k), in.w);
              acc += weight[((co * in.c + ci) * k + ky) * k + kx] * in.at(ci, sy, sx);
            }
          }
        }
        out.at(co, y, x) = acc;
      }
    }
  }
}

template <class T>
void conv_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out,
                   std::size_t k, Tensor<T>* grad_in, std::span<T> grad_weight,
                   std::span<T> grad_bias) {
  if (k != 1 && k != 3) throw Error("conv: kernel size must be 1 or 3");
  for (std::size_t co = 0; co < grad_out.c; ++co) {
    for (std::size_t y = 0; y < in.h; ++y) {
      for (std::size_t x = 0; x < in.w; ++x) {
        const T g = grad_out.at(co, y, x);
        grad_bias[co] += g;
        for (std::size_t ci = 0; ci < in.c; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto sy = reflect_index(static_cast<std::ptrdiff_t>(y + ky) - half(k), in.h);
              const auto sx = reflect_index(static_cast<std::ptrdiff_t>(x + kx) - half(k), in.w);
              const std::size_t wi = ((co * in.c + ci) * k + ky) * k + kx;
              grad_weight[wi] += g * in.at(ci, sy, sx);
              if (grad_in) grad_in->at(ci, sy, sx) += g * weight[wi];
            }
          }
        }
      }
    }
  }
}

template void conv_forward<float>(const Tensor<float>&, std::span<const float>,
                                  std::span<const float>, std::size_t, std::size_t,
                                  Tensor<float>&);
template void conv_forward<double>(const Tensor<double>&, std::span<const double>,
                                   std::span<const double>, std::size_t, std::size_t,
                                   Tensor<double>&);
template void conv_backward<float>(const Tensor<float>&, std::span<const float>,
                                   const Tensor<float>&, std::size_t, Tensor<float>*,
                                   std::span<float>, std::span<float>);
template void conv_backward<double>(const Tensor<double>&, std::span<const double>,
                                    const Tensor<double>&, std::size_t, Tensor<double>*,
                                    std::span<double>, std::span<double>);

}  // namespace spend::nnet::reference
