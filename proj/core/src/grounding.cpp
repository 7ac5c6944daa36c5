#include "trustrepair/grounding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace trustrepair {

bool is_valid(const GroundingCurve& curve) noexcept {
  return curve.asymptote > 0.0 && curve.asymptote <= 1.0 && curve.slope > 0.0 &&
         curve.midpoint >= 1.0 && curve.midpoint <= 10.0;
}

void validate_curve(const GroundingCurve& curve) {
  if (!is_valid(curve)) {
    throw GroundingError("grounding curve needs 0 < L <= 1, k > 0 and 1 <= x0 <= 10");
  }
}

double grounding_eval(const GroundingCurve& curve, double report) noexcept {
  return curve.asymptote / (1.0 + std::exp(-curve.slope * (report - curve.midpoint)));
}

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

double sum_squares(std::span<const GroundingPair> pairs, const Vec3& theta) {
  const GroundingCurve c{theta[0], theta[1], theta[2]};
  double ss = 0.0;
  for (const auto& p : pairs) {
    const double r = grounding_eval(c, p.report) - p.probability;
    ss += r * r;
  }
  return ss;
}

/// Gaussian elimination with partial pivoting; false when singular.
bool solve3(Mat3 a, Vec3 b, Vec3& x) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (!(std::abs(a[pivot][col]) > 1e-300)) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < 3; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int k = r + 1; k < 3; ++k) acc -= a[r][k] * x[k];
    x[r] = acc / a[r][r];
  }
  return true;
}

struct LmResult {
  Vec3 theta;
  double cost;
  std::size_t iterations;
  bool converged;
};

LmResult levenberg_marquardt(std::span<const GroundingPair> pairs, Vec3 theta) {
  constexpr std::size_t kMaxIterations = 1000;
  double lambda = 1e-3;
  double cost = sum_squares(pairs, theta);
  for (std::size_t iter = 1; iter <= kMaxIterations; ++iter) {
    Mat3 jtj{};
    Vec3 jtr{};
    for (const auto& p : pairs) {
      const double z = -theta[1] * (p.report - theta[2]);
      const double sigma = 1.0 / (1.0 + std::exp(z));
      const double dsig = sigma * (1.0 - sigma);
      const Vec3 grad{sigma, theta[0] * dsig * (p.report - theta[2]),
                      -theta[0] * dsig * theta[1]};
      const double r = theta[0] * sigma - p.probability;
      for (int i = 0; i < 3; ++i) {
        jtr[i] += grad[i] * r;
        for (int j = 0; j < 3; ++j) jtj[i][j] += grad[i] * grad[j];
      }
    }
    const double grad_norm = std::sqrt(jtr[0] * jtr[0] + jtr[1] * jtr[1] + jtr[2] * jtr[2]);
    if (grad_norm < 1e-14) return {theta, cost, iter, true};

    bool improved = false;
    while (lambda < 1e12) {
      Mat3 damped = jtj;
      for (int i = 0; i < 3; ++i) damped[i][i] += lambda * std::max(jtj[i][i], 1e-12);
      Vec3 step{};
      if (!solve3(damped, {-jtr[0], -jtr[1], -jtr[2]}, step)) {
        lambda *= 10.0;
        continue;
      }
      const Vec3 candidate{theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]};
      const double candidate_cost = sum_squares(pairs, candidate);
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        const double step_norm =
            std::sqrt(step[0] * step[0] + step[1] * step[1] + step[2] * step[2]);
        const double theta_norm =
            std::sqrt(theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]);
        const double decrease = cost - candidate_cost;
        theta = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (step_norm <= 1e-12 * (theta_norm + 1e-12) ||
            decrease <= 1e-16 * std::max(cost, 1e-30)) {
          return {theta, cost, iter, true};
        }
        break;
      }
      lambda *= 10.0;
    }
    // No damping level reduces the cost: a (local) minimum to working precision.
    if (!improved) return {theta, cost, iter, true};
  }
  return {theta, cost, kMaxIterations, false};
}

}  // namespace

GroundingFit fit_grounding(std::span<const GroundingPair> pairs) {
  if (pairs.size() < 4) {
    throw GroundingError("fitting the grounding curve needs at least 4 pairs, got " +
                         std::to_string(pairs.size()));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double p_max = 0.0;
  double mean_report = 0.0;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.report) || !std::isfinite(p.probability)) {
      throw GroundingError("grounding pairs must be finite");
    }
    lo = std::min(lo, p.report);
    hi = std::max(hi, p.report);
    p_max = std::max(p_max, p.probability);
    mean_report += p.report;
  }
  mean_report /= static_cast<double>(pairs.size());
  if (!(hi > lo)) throw GroundingError("self-report values are all identical");

  const std::array<double, 2> asymptote_starts{std::clamp(p_max, 0.05, 1.0), 1.0};
  const std::array<double, 3> slope_starts{0.5, 1.0, 2.0};
  const std::array<double, 2> midpoint_starts{mean_report, 0.5 * (lo + hi)};

  LmResult best{{0, 0, 0}, std::numeric_limits<double>::infinity(), 0, false};
  for (double a : asymptote_starts) {
    for (double k : slope_starts) {
      for (double m : midpoint_starts) {
        const LmResult r = levenberg_marquardt(pairs, {a, k, m});
        if (r.converged && r.cost < best.cost) best = r;
      }
    }
  }
  if (!best.converged) throw GroundingError("grounding fit did not converge");

  GroundingFit fit;
  fit.curve = {best.theta[0], best.theta[1], best.theta[2]};
  fit.iterations = best.iterations;
  if (!(fit.curve.asymptote > 0.0 && fit.curve.asymptote <= 1.0)) {
    fit.warnings.push_back("fitted asymptote " + std::to_string(fit.curve.asymptote) +
                           " clamped into (0, 1]");
    fit.curve.asymptote = std::clamp(fit.curve.asymptote, 1e-6, 1.0);
    fit.clamped = true;
  }
  if (!(fit.curve.slope > 0.0)) {
    fit.warnings.push_back("fitted slope " + std::to_string(fit.curve.slope) +
                           " clamped to a small positive value");
    fit.curve.slope = 1e-6;
    fit.clamped = true;
  }
  if (!(fit.curve.midpoint >= 1.0 && fit.curve.midpoint <= 10.0)) {
    fit.warnings.push_back("fitted midpoint " + std::to_string(fit.curve.midpoint) +
                           " clamped into [1, 10]");
    fit.curve.midpoint = std::clamp(fit.curve.midpoint, 1.0, 10.0);
    fit.clamped = true;
  }
  fit.residual_norm = std::sqrt(sum_squares(
      pairs, {fit.curve.asymptote, fit.curve.slope, fit.curve.midpoint}));
  return fit;
}

GroupedAverage three_trial_average(std::span<const double> series) {
  if (series.empty()) throw GroundingError("cannot average an empty series");
  GroupedAverage out;
  for (std::size_t start = 0; start < series.size(); start += 3) {
    const std::size_t end = std::min(start + 3, series.size());
    const double sum = std::accumulate(series.begin() + static_cast<std::ptrdiff_t>(start),
                                       series.begin() + static_cast<std::ptrdiff_t>(end), 0.0);
    out.values.push_back(sum / static_cast<double>(end - start));
    if (end - start < 3) out.has_remainder = true;
  }
  return out;
}

}  // namespace trustrepair
