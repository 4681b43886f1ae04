#include "spend/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "spend/cube.hpp"

namespace spend::fft {

namespace {
// FFTW planning is not thread-safe; execution is.
std::mutex g_plan_mutex;
}  // namespace

RealDft::RealDft(std::size_t n) : n_(n), plan_(nullptr) {
  if (n == 0) throw Error("DFT length must be positive");
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  std::lock_guard lock(g_plan_mutex);
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                               FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
  if (!plan_) throw Error("FFTW could not plan a length-" + std::to_string(n) + " DFT");
}

RealDft::~RealDft() {
  std::lock_guard lock(g_plan_mutex);
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void RealDft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  if (in.size() != n_ || out.size() != n_ / 2 + 1) throw Error("DFT buffer size mismatch");
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

std::vector<std::complex<double>> dft2(std::span<const double> values, std::size_t rows,
                                       std::size_t cols) {
  if (values.size() != rows * cols || rows == 0 || cols == 0) {
    throw Error("2-D DFT buffer size mismatch");
  }
  std::vector<std::complex<double>> in(values.begin(), values.end());
  std::vector<std::complex<double>> out(rows * cols);
  fftw_plan plan;
  {
    std::lock_guard lock(g_plan_mutex);
    plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                            reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(g_plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace spend::fft
