#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace spend::fft {

/// Forward real-to-complex DFT of a fixed length, reusable across threads.
/// Output holds n/2 + 1 bins, unnormalized (X_k = sum x_j e^{-2 pi i jk/n}).
class RealDft {
 public:
  explicit RealDft(std::size_t n);
  ~RealDft();
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;

 private:
  std::size_t n_;
  void* plan_;
};

/// Full complex 2-D DFT of a real row-major array, unnormalized.
std::vector<std::complex<double>> dft2(std::span<const double> values, std::size_t rows,
                                       std::size_t cols);

}  // namespace spend::fft
