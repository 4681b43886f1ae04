#include "spend/nnet/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <stdexcept>

#include "spend/cube.hpp"
#include "spend/parallel.hpp"

namespace spend::nnet::kernels {

namespace {

int team() { return (threads() > 1 && !omp_in_parallel()) ? threads() : 1; }

void check_kernel(std::size_t k) {
  if (k != 1 && k != 3) throw Error("conv: kernel size must be 1 or 3, got " + std::to_string(k));
}

// Copies every channel into a (h+2) x (w+2) buffer with one reflected border.
template <class T>
std::vector<T> pad_reflect(const Tensor<T>& in) {
  const std::size_t ph = in.h + 2, pw = in.w + 2;
  std::vector<T> pad(in.c * ph * pw);
  for (std::size_t c = 0; c < in.c; ++c) {
    const T* src = in.channel(c);
    T* dst = pad.data() + c * ph * pw;
    for (std::size_t py = 0; py < ph; ++py) {
      const T* row = src + reflect_index(static_cast<std::ptrdiff_t>(py) - 1, in.h) * in.w;
      T* d = dst + py * pw;
      std::copy(row, row + in.w, d + 1);
      d[0] = row[reflect_index(-1, in.w)];
      d[pw - 1] = row[reflect_index(static_cast<std::ptrdiff_t>(in.w), in.w)];
    }
  }
  return pad;
}

// dst[y][x] += sum_{j,i} k9[3j+i] * src[y+j][x+i]
template <class T>
void stencil3(const T* __restrict src, std::size_t sw, const T* k9, T* __restrict dst,
              std::size_t dh, std::size_t dw) {
  const T k0 = k9[0], k1 = k9[1], k2 = k9[2], k3 = k9[3], k4 = k9[4], k5 = k9[5], k6 = k9[6],
          k7 = k9[7], k8 = k9[8];
  for (std::size_t y = 0; y < dh; ++y) {
    const T* __restrict r0 = src + y * sw;
    const T* __restrict r1 = r0 + sw;
    const T* __restrict r2 = r1 + sw;
    T* __restrict d = dst + y * dw;
    for (std::size_t x = 0; x < dw; ++x) {
      d[x] += k0 * r0[x] + k1 * r0[x + 1] + k2 * r0[x + 2] + k3 * r1[x] + k4 * r1[x + 1] +
              k5 * r1[x + 2] + k6 * r2[x] + k7 * r2[x + 1] + k8 * r2[x + 2];
    }
  }
}

template <class T>
T plane_sum(const T* p, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += p[i];
  return s;
}

}  // namespace

template <class T>
void conv_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                  std::size_t k, std::size_t cout, Tensor<T>& out) {
  check_kernel(k);
  const std::size_t cin = in.c, h = in.h, w = in.w, hw = in.plane();
  out.resize(cout, h, w);
  const auto co_n = static_cast<std::ptrdiff_t>(cout);
  if (k == 1) {
#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
    for (std::ptrdiff_t co = 0; co < co_n; ++co) {
      T* __restrict o = out.channel(co);
      std::fill(o, o + hw, bias[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T wt = weight[co * cin + ci];
        const T* __restrict s = in.channel(ci);
        for (std::size_t p = 0; p < hw; ++p) o[p] += wt * s[p];
      }
    }
    return;
  }
  const std::vector<T> pad = pad_reflect(in);
  const std::size_t pstride = (h + 2) * (w + 2);
#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
  for (std::ptrdiff_t co = 0; co < co_n; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + hw, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      stencil3(pad.data() + ci * pstride, w + 2, weight.data() + (co * cin + ci) * 9, o, h, w);
    }
  }
}

template <class T>
void conv_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& grad_out,
                   std::size_t k, Tensor<T>* grad_in, std::span<T> grad_weight,
                   std::span<T> grad_bias) {
  check_kernel(k);
  const std::size_t cin = in.c, cout = grad_out.c, h = in.h, w = in.w, hw = in.plane();
  const auto co_n = static_cast<std::ptrdiff_t>(cout);
  const auto ci_n = static_cast<std::ptrdiff_t>(cin);

  if (k == 1) {
#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
    for (std::ptrdiff_t co = 0; co < co_n; ++co) {
      const T* __restrict g = grad_out.channel(co);
      grad_bias[co] += plane_sum(g, hw);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* __restrict s = in.channel(ci);
        T acc = 0;
        for (std::size_t p = 0; p < hw; ++p) acc += g[p] * s[p];
        grad_weight[co * cin + ci] += acc;
      }
    }
    if (grad_in) {
#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
      for (std::ptrdiff_t ci = 0; ci < ci_n; ++ci) {
        T* __restrict gi = grad_in->channel(ci);
        for (std::size_t co = 0; co < cout; ++co) {
          const T wt = weight[co * cin + ci];
          const T* __restrict g = grad_out.channel(co);
          for (std::size_t p = 0; p < hw; ++p) gi[p] += wt * g[p];
        }
      }
    }
    return;
  }

  const std::size_t pw = w + 2, ph = h + 2, pstride = ph * pw;
  const std::vector<T> pad = pad_reflect(in);

#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
  for (std::ptrdiff_t co = 0; co < co_n; ++co) {
    const T* g = grad_out.channel(co);
    grad_bias[co] += plane_sum(g, hw);
    std::vector<T> acc(9 * w);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      std::fill(acc.begin(), acc.end(), T(0));
      const T* p = pad.data() + ci * pstride;
      for (std::size_t y = 0; y < h; ++y) {
        const T* __restrict gr = g + y * w;
        for (std::size_t j = 0; j < 3; ++j) {
          const T* __restrict r = p + (y + j) * pw;
          for (std::size_t i = 0; i < 3; ++i) {
            T* __restrict a = acc.data() + (3 * j + i) * w;
            const T* __restrict ri = r + i;
            for (std::size_t x = 0; x < w; ++x) a[x] += gr[x] * ri[x];
          }
        }
      }
      T* gw = grad_weight.data() + (co * cin + ci) * 9;
      for (std::size_t t = 0; t < 9; ++t) gw[t] += plane_sum(acc.data() + t * w, w);
    }
  }

  if (!grad_in) return;
  // Gradient w.r.t. the padded input is a full correlation of the output
  // gradient with the flipped kernel; reflected border cells fold back after.
  const std::size_t zw = w + 4, zstride = (h + 4) * zw;
  std::vector<T> gz(cout * zstride, T(0));
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g = grad_out.channel(co);
    T* z = gz.data() + co * zstride;
    for (std::size_t y = 0; y < h; ++y) std::copy(g + y * w, g + (y + 1) * w, z + (y + 2) * zw + 2);
  }
#pragma omp parallel for num_threads(team()) if (team() > 1) schedule(static)
  for (std::ptrdiff_t ci = 0; ci < ci_n; ++ci) {
    std::vector<T> gpad(pstride, T(0));
    for (std::size_t co = 0; co < cout; ++co) {
      const T* wk = weight.data() + (co * cin + ci) * 9;
      T flipped[9];
      for (std::size_t t = 0; t < 9; ++t) flipped[t] = wk[8 - t];
      stencil3(gz.data() + co * zstride, zw, flipped, gpad.data(), ph, pw);
    }
    T* gi = grad_in->channel(ci);
    for (std::size_t py = 0; py < ph; ++py) {
      const std::size_t y = reflect_index(static_cast<std::ptrdiff_t>(py) - 1, h);
      for (std::size_t px = 0; px < pw; ++px) {
        gi[y * w + reflect_index(static_cast<std::ptrdiff_t>(px) - 1, w)] += gpad[py * pw + px];
      }
    }
  }
}

template <class T>
void relu_forward(const Tensor<T>& in, Tensor<T>& out) {
  out.resize(in.c, in.h, in.w);
  for (std::size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] > T(0) ? in.v[i] : T(0);
}

template <class T>
void relu_backward(const Tensor<T>& in, const Tensor<T>& grad_out, Tensor<T>& grad_in) {
  for (std::size_t i = 0; i < in.v.size(); ++i) {
    if (in.v[i] > T(0)) grad_in.v[i] += grad_out.v[i];
  }
}

template <class T>
void maxpool_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::uint8_t>& arg) {
  if (in.h % 2 || in.w % 2) {
    throw Error("maxpool: odd feature map " + std::to_string(in.h) + "x" + std::to_string(in.w));
  }
  const std::size_t oh = in.h / 2, ow = in.w / 2;
  out.resize(in.c, oh, ow);
  arg.assign(out.v.size(), 0);
  for (std::size_t c = 0; c < in.c; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t o = (c * oh + y) * ow + x;
        T best = in.at(c, 2 * y, 2 * x);
        std::uint8_t which = 0;
        for (std::uint8_t t = 1; t < 4; ++t) {
          const T v = in.at(c, 2 * y + t / 2, 2 * x + t % 2);
          if (v > best) best = v, which = t;
        }
        out.v[o] = best;
        arg[o] = which;
      }
    }
  }
}

template <class T>
void maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& arg,
                      Tensor<T>& grad_in) {
  for (std::size_t c = 0; c < grad_out.c; ++c) {
    for (std::size_t y = 0; y < grad_out.h; ++y) {
      for (std::size_t x = 0; x < grad_out.w; ++x) {
        const std::size_t o = (c * grad_out.h + y) * grad_out.w + x;
        grad_in.at(c, 2 * y + arg[o] / 2, 2 * x + arg[o] % 2) += grad_out.v[o];
      }
    }
  }
}

template <class T>
void upsample_forward(const Tensor<T>& in, Tensor<T>& out) {
  out.resize(in.c, in.h * 2, in.w * 2);
  for (std::size_t c = 0; c < out.c; ++c) {
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t x = 0; x < out.w; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
}

template <class T>
void upsample_backward(const Tensor<T>& grad_out, Tensor<T>& grad_in) {
  for (std::size_t c = 0; c < grad_out.c; ++c) {
    for (std::size_t y = 0; y < grad_out.h; ++y) {
      for (std::size_t x = 0; x < grad_out.w; ++x) {
        grad_in.at(c, y / 2, x / 2) += grad_out.at(c, y, x);
      }
    }
  }
}

#define SPEND_INSTANTIATE(T)                                                                    \
  template void conv_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,       \
                                std::size_t, std::size_t, Tensor<T>&);                          \
  template void conv_backward<T>(const Tensor<T>&, std::span<const T>, const Tensor<T>&,        \
                                 std::size_t, Tensor<T>*, std::span<T>, std::span<T>);          \
  template void relu_forward<T>(const Tensor<T>&, Tensor<T>&);                                  \
  template void relu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);               \
  template void maxpool_forward<T>(const Tensor<T>&, Tensor<T>&, std::vector<std::uint8_t>&);   \
  template void maxpool_backward<T>(const Tensor<T>&, const std::vector<std::uint8_t>&,         \
                                    Tensor<T>&);                                                \
  template void upsample_forward<T>(const Tensor<T>&, Tensor<T>&);                              \
  template void upsample_backward<T>(const Tensor<T>&, Tensor<T>&);

SPEND_INSTANTIATE(float)
SPEND_INSTANTIATE(double)
#undef SPEND_INSTANTIATE

}  // namespace spend::nnet::kernels
