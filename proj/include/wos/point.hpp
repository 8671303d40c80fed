#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wos {

inline constexpr int kMaxDim = 6;

/// Thrown for malformed parameters and violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fixed-capacity coordinate vector in R^d, d <= kMaxDim.
///
/// Stored inline so walk loops never allocate.
class Point {
 public:
  Point() = default;
  explicit Point(int dim) : dim_(checked_dim(dim)) {}
  Point(std::initializer_list<double> coords) : dim_(checked_dim(static_cast<int>(coords.size()))) {
    std::size_t i = 0;
    for (double c : coords) v_[i++] = c;
  }
  explicit Point(std::span<const double> coords) : dim_(checked_dim(static_cast<int>(coords.size()))) {
    for (std::size_t i = 0; i < coords.size(); ++i) v_[i] = coords[i];
  }

  static Point zero(int dim) { return Point(dim); }

  int dim() const { return dim_; }
  double& operator[](int i) { return v_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }
  std::span<const double> coords() const { return {v_.data(), static_cast<std::size_t>(dim_)}; }
  std::vector<double> to_vector() const { return {v_.begin(), v_.begin() + dim_}; }

  double norm2() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += v_[i] * v_[i];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }

  bool finite() const {
    for (int i = 0; i < dim_; ++i)
      if (!std::isfinite(v_[i])) return false;
    return true;
  }

  Point& operator+=(const Point& o) {
    for (int i = 0; i < dim_; ++i) v_[i] += o.v_[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    for (int i = 0; i < dim_; ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Point& operator*=(double s) {
    for (int i = 0; i < dim_; ++i) v_[i] *= s;
    return *this;
  }

  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
  friend bool operator==(const Point& a, const Point& b) {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i)
      if (a.v_[i] != b.v_[i]) return false;
    return true;
  }

 private:
  static int checked_dim(int d) {
    if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    return d;
  }

  std::array<double, kMaxDim> v_{};
  int dim_ = 1;
};

inline double dot(const Point& a, const Point& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

inline double distance2(const Point& a, const Point& b) { return (a - b).norm2(); }

}  // namespace wos
