#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ltrc/error.hpp"

namespace ltrc {

/// One observed record. `z` is the observed lifetime min(Y, W), `t` the
/// truncation time and `delta` the uncensored indicator. Only records with
/// t <= z are ever observed.
struct LtrcObservation {
  std::vector<double> x;
  double z = 0.0;
  double t = 0.0;
  int delta = 1;
};

/// Validated, immutable LTRC sample with ordering caches.
class LtrcSample {
 public:
  std::size_t n() const noexcept { return obs_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const LtrcObservation> observations() const noexcept { return obs_; }
  const LtrcObservation& operator[](std::size_t i) const noexcept { return obs_[i]; }

  // Stable permutations: ties keep input order.
  std::span<const std::size_t> z_order() const noexcept { return z_order_; }
  std::span<const std::size_t> t_order() const noexcept { return t_order_; }
  std::span<const double> z_sorted() const noexcept { return z_sorted_; }
  std::span<const double> t_sorted() const noexcept { return t_sorted_; }

  double min_t() const noexcept { return t_sorted_.front(); }
  double max_t() const noexcept { return t_sorted_.back(); }
  double min_z() const noexcept { return z_sorted_.front(); }
  double max_z() const noexcept { return z_sorted_.back(); }

  // #{j : T_j <= y <= Z_j}. Since T_j <= Z_j, records with Z_j < y also
  // have T_j <= y, so the count is #{T_j <= y} - #{Z_j < y}.
  std::size_t risk_set(double y) const noexcept {
    auto t_le = std::upper_bound(t_sorted_.begin(), t_sorted_.end(), y) - t_sorted_.begin();
    auto z_lt = std::lower_bound(z_sorted_.begin(), z_sorted_.end(), y) - z_sorted_.begin();
    return static_cast<std::size_t>(t_le - z_lt);
  }

  bool has_tied_z() const noexcept {
    return std::adjacent_find(z_sorted_.begin(), z_sorted_.end()) != z_sorted_.end();
  }
  bool has_tied_t() const noexcept {
    return std::adjacent_find(t_sorted_.begin(), t_sorted_.end()) != t_sorted_.end();
  }

  friend inline LtrcSample validate_sample(std::vector<LtrcObservation> raw);

 private:
  LtrcSample() = default;

  std::vector<LtrcObservation> obs_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> z_order_, t_order_;
  std::vector<double> z_sorted_, t_sorted_;
};

inline LtrcSample validate_sample(std::vector<LtrcObservation> raw) {
  if (raw.empty()) throw EmptySample();
  const std::size_t d = raw.front().x.size();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& o = raw[i];
    if (o.x.size() != d) throw InvalidRecord(i, "covariate dimension mismatch");
    if (d == 0) throw InvalidRecord(i, "missing covariate");
    for (double v : o.x)
      if (!std::isfinite(v)) throw InvalidRecord(i, "non-finite covariate");
    if (!std::isfinite(o.z) || !std::isfinite(o.t)) throw InvalidRecord(i, "non-finite z or t");
    if (o.delta != 0 && o.delta != 1) throw InvalidRecord(i, "delta not in {0,1}");
    if (o.t > o.z) throw InvalidRecord(i, "t > z");
  }

  LtrcSample s;
  s.obs_ = std::move(raw);
  s.dim_ = d;
  const std::size_t n = s.obs_.size();
  s.z_order_.resize(n);
  s.t_order_.resize(n);
  std::iota(s.z_order_.begin(), s.z_order_.end(), std::size_t{0});
  std::iota(s.t_order_.begin(), s.t_order_.end(), std::size_t{0});
  std::stable_sort(s.z_order_.begin(), s.z_order_.end(),
                   [&](std::size_t a, std::size_t b) { return s.obs_[a].z < s.obs_[b].z; });
  std::stable_sort(s.t_order_.begin(), s.t_order_.end(),
                   [&](std::size_t a, std::size_t b) { return s.obs_[a].t < s.obs_[b].t; });
  s.z_sorted_.reserve(n);
  s.t_sorted_.reserve(n);
  for (auto i : s.z_order_) s.z_sorted_.push_back(s.obs_[i].z);
  for (auto i : s.t_order_) s.t_sorted_.push_back(s.obs_[i].t);
  return s;
}

inline std::size_t count_risk_set(const LtrcSample& sample, double y) noexcept {
  return sample.risk_set(y);
}

inline double risk_proportion(const LtrcSample& sample, double y) noexcept {
  return static_cast<double>(sample.risk_set(y)) / static_cast<double>(sample.n());
}

}  // namespace ltrc
