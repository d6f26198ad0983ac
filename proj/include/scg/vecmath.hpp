#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scg/errors.hpp"

namespace scg {

/// Dense real vector of fixed length. Parameters, gradients and search
/// directions all live in this type.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> init) : data_(init) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Vector&, const Vector&) = default;

 private:
  std::vector<double> data_;
};

/// Positive definite diagonal matrix, stored as its diagonal.
class DiagPD {
 public:
  DiagPD() = default;

  /// Throws SingularPreconditionerError unless every entry is > 0.
  explicit DiagPD(Vector diag) : diag_(std::move(diag)) {
    for (std::size_t i = 0; i < diag_.size(); ++i) {
      if (!(diag_[i] > 0.0) || !std::isfinite(diag_[i])) {
        throw SingularPreconditionerError(
            "preconditioner diagonal entry " + std::to_string(i) +
            " is not strictly positive");
      }
    }
  }

  static DiagPD identity(std::size_t n) { return DiagPD(Vector(n, 1.0)); }

  std::size_t size() const { return diag_.size(); }
  double operator[](std::size_t i) const { return diag_[i]; }
  const Vector& diag() const { return diag_; }

 private:
  Vector diag_;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b,
                                const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) +
                         ")");
  }
}

}  // namespace detail

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Throws NumericalError naming `what` if x has a NaN or Inf entry.
inline void require_finite(const Vector& x, const char* what) {
  if (!all_finite(x.span())) {
    throw NumericalError(std::string("non-finite value in ") + what);
  }
}

/// a*x + y
inline Vector axpy(double a, const Vector& x, const Vector& y) {
  detail::require_same_length(x.size(), y.size(), "axpy");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + y[i];
  require_finite(out, "axpy");
  return out;
}

inline double dot(const Vector& x, const Vector& y) {
  detail::require_same_length(x.size(), y.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  if (!std::isfinite(s)) throw NumericalError("non-finite value in dot");
  return s;
}

inline double norm_sq(const Vector& x) { return dot(x, x); }

inline double norm(const Vector& x) { return std::sqrt(norm_sq(x)); }

inline double norm_inf(const Vector& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline Vector sub(const Vector& x, const Vector& y) {
  detail::require_same_length(x.size(), y.size(), "sub");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

inline Vector scale(double a, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
  return out;
}

/// Solves H d = -mhat for diagonal H: d_i = -mhat_i / h_i.
inline Vector solve_diag(const DiagPD& h, const Vector& mhat) {
  detail::require_same_length(h.size(), mhat.size(), "solve_diag");
  Vector d(mhat.size());
  for (std::size_t i = 0; i < mhat.size(); ++i) {
    if (!(h[i] > 0.0)) {
      throw SingularPreconditionerError("solve_diag: nonpositive diagonal");
    }
    d[i] = -mhat[i] / h[i];
  }
  require_finite(d, "solve_diag");
  return d;
}

}  // namespace scg
