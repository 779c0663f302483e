#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ltrc {

/// Right-continuous piecewise-constant function on the real line.
///
/// `eval(y)` returns the value attached to the largest jump point <= y, and
/// `eval_left(y)` the value attached to the largest jump point < y. Both fall
/// back to `value_before_first()` below the first jump point.
class StepFunction {
 public:
  StepFunction() = default;

  StepFunction(std::vector<double> jump_points, std::vector<double> values,
               double value_before_first)
      : points_(std::move(jump_points)),
        values_(std::move(values)),
        before_(value_before_first) {
    if (points_.size() != values_.size())
      throw std::invalid_argument("StepFunction: points and values differ in length");
    for (std::size_t k = 1; k < points_.size(); ++k)
      if (!(points_[k - 1] < points_[k]))
        throw std::invalid_argument("StepFunction: jump points must be strictly increasing");
  }

  static StepFunction constant(double value) { return StepFunction({}, {}, value); }

  double eval(double y) const noexcept {
    auto it = std::upper_bound(points_.begin(), points_.end(), y);
    if (it == points_.begin()) return before_;
    return values_[static_cast<std::size_t>(it - points_.begin()) - 1];
  }

  double eval_left(double y) const noexcept {
    auto it = std::lower_bound(points_.begin(), points_.end(), y);
    if (it == points_.begin()) return before_;
    return values_[static_cast<std::size_t>(it - points_.begin()) - 1];
  }

  double operator()(double y) const noexcept { return eval(y); }

  std::span<const double> jump_points() const noexcept { return points_; }
  std::span<const double> values() const noexcept { return values_; }
  double value_before_first() const noexcept { return before_; }
  std::size_t size() const noexcept { return points_.size(); }

  bool is_nondecreasing() const noexcept {
    double prev = before_;
    for (double v : values_) {
      if (v < prev) return false;
      prev = v;
    }
    return true;
  }

  bool within(double lo, double hi) const noexcept {
    if (before_ < lo || before_ > hi) return false;
    return std::all_of(values_.begin(), values_.end(),
                       [&](double v) { return v >= lo && v <= hi; });
  }

  friend bool operator==(const StepFunction&, const StepFunction&) = default;

 private:
  std::vector<double> points_;
  std::vector<double> values_;
  double before_ = 0.0;
};

}  // namespace ltrc
