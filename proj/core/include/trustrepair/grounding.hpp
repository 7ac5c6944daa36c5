#pragma once

// Logistic grounding curve between averaged self-reported trust (1..10) and
// the model's probability of high trust:
//
//   S(r) = L / (1 + exp(-k (r - x0)))

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trustrepair {

struct GroundingCurve {
  double asymptote = 0.9642;  // L
  double slope = 0.8267;      // k, per self-report unit
  double midpoint = 4.911;    // x0, in self-report units

  friend bool operator==(const GroundingCurve&, const GroundingCurve&) = default;
};

/// Curve fitted to the study's three-trial averaged data.
inline constexpr GroundingCurve kPaperGroundingCurve{0.9642, 0.8267, 4.911};

class GroundingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 0 < L <= 1, k > 0, 1 <= x0 <= 10.
bool is_valid(const GroundingCurve& curve) noexcept;
void validate_curve(const GroundingCurve& curve);

double grounding_eval(const GroundingCurve& curve, double report) noexcept;

struct GroundingPair {
  double report = 0.0;       // averaged self-report
  double probability = 0.0;  // averaged (or median) P(high trust)
};

struct GroundingFit {
  GroundingCurve curve;
  /// sqrt(sum of squared residuals) at the returned curve.
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  /// Parameters were pushed back inside the valid region after fitting.
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// Least-squares fit of (L, k, x0) by Levenberg-Marquardt. Needs at least
/// four pairs with non-constant reports.
GroundingFit fit_grounding(std::span<const GroundingPair> pairs);

struct GroupedAverage {
  std::vector<double> values;
  /// The series length was not a multiple of 3; the last value averages the
  /// one or two leftover entries.
  bool has_remainder = false;
};

/// Means of consecutive non-overlapping groups of three.
GroupedAverage three_trial_average(std::span<const double> series);

}  // namespace trustrepair
