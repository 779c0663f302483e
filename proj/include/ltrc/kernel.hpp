#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "ltrc/error.hpp"

namespace ltrc {

/// Smoothing kernel. Multivariate covariates use the product of the
/// univariate kernel over coordinates.
class Kernel {
 public:
  enum class Kind { gaussian, epanechnikov };

  static Kernel gaussian() { return Kernel(Kind::gaussian); }
  static Kernel epanechnikov() { return Kernel(Kind::epanechnikov); }

  static Kernel from_name(std::string_view name) {
    if (name == "gaussian") return gaussian();
    if (name == "epanechnikov") return epanechnikov();
    throw InvalidConfig("unknown kernel '" + std::string(name) + "'");
  }

  Kind kind() const noexcept { return kind_; }
  std::string name() const { return kind_ == Kind::gaussian ? "gaussian" : "epanechnikov"; }

  double operator()(double u) const noexcept {
    switch (kind_) {
      case Kind::gaussian:
        return std::exp(-0.5 * u * u) * kInvSqrt2Pi;
      case Kind::epanechnikov:
        return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return 0.0;
  }

  double operator()(std::span<const double> u) const noexcept {
    if (kind_ == Kind::gaussian) {
      double sq = 0.0;
      for (double v : u) sq += v * v;
      return std::exp(-0.5 * sq) * std::pow(kInvSqrt2Pi, static_cast<double>(u.size()));
    }
    double k = 1.0;
    for (double v : u) k *= (*this)(v);
    return k;
  }

  // Integral of K^2 over R^d.
  double squared_integral(std::size_t d = 1) const noexcept {
    const double one = kind_ == Kind::gaussian ? 0.5 / std::sqrt(std::numbers::pi) : 0.6;
    return std::pow(one, static_cast<double>(d));
  }

 private:
  static constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

  explicit Kernel(Kind kind) : kind_(kind) {
    static const bool gaussian_ok = check_unit_mass(Kind::gaussian);
    static const bool epanechnikov_ok = check_unit_mass(Kind::epanechnikov);
    if (!(kind == Kind::gaussian ? gaussian_ok : epanechnikov_ok))
      throw InvalidConfig("kernel is not a probability density");
  }

  // Nonnegative with unit mass, by the trapezoid rule on [-10, 10].
  static bool check_unit_mass(Kind kind) {
    Kernel k(kind, 0);
    constexpr int steps = 200000;
    const double dx = 20.0 / steps;
    double mass = 0.0;
    for (int j = 0; j <= steps; ++j) {
      const double v = k(-10.0 + dx * j);
      if (v < 0.0) return false;
      mass += (j == 0 || j == steps ? 0.5 : 1.0) * v;
    }
    return std::abs(mass * dx - 1.0) <= 1e-6;
  }

  Kernel(Kind kind, int) : kind_(kind) {}

  Kind kind_;
};

/// Objective function psi with its derivative, optionally scaled by c > 0.
/// Scores are computed as c * sum(w * psi_base) so that the sign of a score,
/// and hence the root, does not depend on c.
class Objective {
 public:
  enum class Kind { identity, pseudo_huber };

  static Objective identity() { return Objective(Kind::identity, 1.0); }
  // psi(u) = u / sqrt(1 + u^2)
  static Objective pseudo_huber() { return Objective(Kind::pseudo_huber, 1.0); }

  static Objective from_name(std::string_view name) {
    if (name == "identity") return identity();
    if (name == "pseudo_huber") return pseudo_huber();
    throw InvalidConfig("unknown objective '" + std::string(name) + "'");
  }

  Objective scaled(double c) const {
    if (!(c > 0.0)) throw InvalidConfig("objective scale must be positive");
    return Objective(kind_, scale_ * c);
  }

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  std::string name() const { return kind_ == Kind::identity ? "identity" : "pseudo_huber"; }

  double base(double u) const noexcept {
    return kind_ == Kind::identity ? u : u / std::sqrt(1.0 + u * u);
  }
  double base_derivative(double u) const noexcept {
    if (kind_ == Kind::identity) return 1.0;
    const double s = 1.0 + u * u;
    return 1.0 / (s * std::sqrt(s));
  }

  double operator()(double u) const noexcept { return scale_ * base(u); }
  double derivative(double u) const noexcept { return scale_ * base_derivative(u); }

 private:
  Objective(Kind kind, double scale) : kind_(kind), scale_(scale) {
    for (int k = -1000; k <= 1000; ++k) {
      const double u = 0.05 * k;
      if (!(derivative(u) > 0.0)) throw InvalidConfig("objective is not strictly increasing");
    }
  }

  Kind kind_;
  double scale_;
};

}  // namespace ltrc
