#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace aoilab {

// Dependence profile lag -> [0, 1/4]: explicit values on an initial range of
// lags, then an analytic extension. Values are clamped into [0, 1/4]; the
// constant extension carries the last explicit value forward, which is the
// honest choice for a nonincreasing profile whose decay beyond the data is
// unknown.
struct AlphaFn {
  enum class TailKind { kZero, kGeometric, kRational, kConstant };

  std::vector<double> values;
  TailKind tail = TailKind::kZero;
  double coeff = 0.0;  // geometric: coeff * rate^lag; rational: coeff * lag^-mu
  double rate = 0.0;
  double mu = 0.0;

  static double clamp(double x) { return std::min(0.25, std::max(0.0, x)); }

  double at(std::uint64_t lag) const {
    if (lag < values.size()) return clamp(values[lag]);
    switch (tail) {
      case TailKind::kZero:
        return 0.0;
      case TailKind::kGeometric:
        return clamp(coeff * std::pow(rate, static_cast<double>(lag)));
      case TailKind::kRational:
        return clamp(coeff * std::pow(static_cast<double>(std::max<std::uint64_t>(lag, 1)), -mu));
      case TailKind::kConstant:
        return values.empty() ? clamp(coeff) : clamp(values.back());
    }
    return 0.0;
  }

  bool is_zero() const {
    for (double v : values) {
      if (v > 0.0) return false;
    }
    switch (tail) {
      case TailKind::kZero:
        return true;
      case TailKind::kGeometric:
      case TailKind::kRational:
        return coeff <= 0.0;
      case TailKind::kConstant:
        return values.empty() ? coeff <= 0.0 : values.back() <= 0.0;
    }
    return true;
  }
};

inline AlphaFn zero_alpha() { return AlphaFn{}; }

inline AlphaFn geometric_alpha(double coeff, double rate) {
  AlphaFn a;
  a.tail = AlphaFn::TailKind::kGeometric;
  a.coeff = coeff;
  a.rate = rate;
  return a;
}

inline AlphaFn rational_alpha(double coeff, double mu) {
  AlphaFn a;
  a.tail = AlphaFn::TailKind::kRational;
  a.coeff = coeff;
  a.mu = mu;
  return a;
}

inline AlphaFn explicit_alpha(std::vector<double> values,
                              AlphaFn::TailKind extension = AlphaFn::TailKind::kConstant) {
  AlphaFn a;
  a.values = std::move(values);
  a.tail = extension;
  return a;
}

}  // namespace aoilab
