#pragma once

#include <complex>
#include <vector>

#include <fftw3.h>

namespace meanfield::detail {

/// Real-to-complex transform of a fixed row-major shape. Planning goes
/// through a global lock (FFTW's planner is not thread-safe); execution uses
/// instance-owned buffers, so give each thread its own instance.
class RealFft {
 public:
  explicit RealFft(std::vector<int> dims);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  size_t real_size() const noexcept { return real_size_; }
  size_t complex_size() const noexcept { return complex_size_; }
  const std::vector<int>& dims() const noexcept { return dims_; }

  /// Unnormalized forward transform.
  void forward(const double* in, std::complex<double>* out);
  /// Unnormalized inverse transform (divide by real_size for a round trip).
  void inverse(const std::complex<double>* in, double* out);

 private:
  std::vector<int> dims_;
  size_t real_size_ = 1;
  size_t complex_size_ = 1;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace meanfield::detail
