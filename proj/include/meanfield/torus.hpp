#pragma once

#include <array>
#include <cmath>
#include <span>

namespace meanfield {

inline constexpr int kMaxDim = 3;

/// Wraps a coordinate into [0, 1). Values that round up to 1.0 after the
/// floor subtraction are mapped back to 0 so the interval stays half-open.
inline double wrap_unit(double x) noexcept {
  double w = x - std::floor(x);
  return w >= 1.0 ? 0.0 : w;
}

/// Minimum-image component of a displacement, in [-1/2, 1/2).
inline double minimum_image_1d(double dx) noexcept {
  double r = dx - std::floor(dx + 0.5);
  return r >= 0.5 ? r - 1.0 : r;
}

/// A point of the unit torus of dimension 1..3. Coordinates are kept in [0,1).
class TorusPoint {
 public:
  TorusPoint() = default;
  TorusPoint(std::span<const double> coords) : dim_(static_cast<int>(coords.size())) {
    for (int c = 0; c < dim_; ++c) x_[c] = wrap_unit(coords[c]);
  }
  int dim() const noexcept { return dim_; }
  double operator[](int c) const noexcept { return x_[c]; }
  std::span<const double> coords() const noexcept { return {x_.data(), static_cast<size_t>(dim_)}; }

 private:
  int dim_ = 0;
  std::array<double, kMaxDim> x_{};
};

/// Displacement r with a - b == r (mod 1) componentwise, each component in [-1/2, 1/2).
inline std::array<double, kMaxDim> minimum_image(const TorusPoint& a, const TorusPoint& b) noexcept {
  std::array<double, kMaxDim> r{};
  for (int c = 0; c < a.dim(); ++c) r[c] = minimum_image_1d(a[c] - b[c]);
  return r;
}

}  // namespace meanfield
