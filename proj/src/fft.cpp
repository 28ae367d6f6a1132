#include "fft.hpp"

#include <cstring>
#include <mutex>

namespace meanfield::detail {

namespace {
std::mutex g_planner_mutex;
}

RealFft::RealFft(std::vector<int> dims) : dims_(std::move(dims)) {
  for (int n : dims_) real_size_ *= size_t(n);
  complex_size_ = real_size_ / size_t(dims_.back()) * size_t(dims_.back() / 2 + 1);
  std::lock_guard lock(g_planner_mutex);
  real_ = fftw_alloc_real(real_size_);
  spec_ = fftw_alloc_complex(complex_size_);
  const int rank = static_cast<int>(dims_.size());
  fwd_ = fftw_plan_dft_r2c(rank, dims_.data(), real_, spec_, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r(rank, dims_.data(), spec_, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(g_planner_mutex);
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(inv_);
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(real_, in, real_size_ * sizeof(double));
  fftw_execute(fwd_);
  std::memcpy(static_cast<void*>(out), spec_, complex_size_ * sizeof(fftw_complex));
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  // c2r transforms overwrite their input.
  std::memcpy(spec_, static_cast<const void*>(in), complex_size_ * sizeof(fftw_complex));
  fftw_execute(inv_);
  std::memcpy(out, real_, real_size_ * sizeof(double));
}

}  // namespace meanfield::detail
