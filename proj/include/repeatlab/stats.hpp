#pragma once

// Uncertainty machinery: bootstrap confidence intervals over evaluation
// units, Welch's t-test between sample vectors, and the Shapiro-Wilk
// normality test (Royston's approximation).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "repeatlab/errors.hpp"
#include "repeatlab/rng.hpp"

namespace repeatlab {

struct BootstrapResult {
  double point_estimate = 0.0;
  std::vector<double> samples;  // one metric value per iteration
  double ci_low = 0.0;          // empirical 2.5th percentile of samples
  double ci_high = 0.0;         // empirical 97.5th percentile
  int iterations = 0;
  std::uint64_t seed = 0;
};

// Resamples `n_units` indices with replacement (original size) and evaluates
// `metric` on each resample. Iteration i draws from its own substream
// derive_stream(seed, i), so results are independent of execution order.
// If `metric` throws Error on a resample (degenerate statistic), that
// iteration redraws from its own substream, up to 50 attempts.
BootstrapResult bootstrap_metric_indices(
    std::size_t n_units, const std::function<double(std::span<const std::size_t>)>& metric,
    int iterations, std::uint64_t seed);

// Convenience wrapper resampling concrete unit objects.
template <class Unit, class Metric>
BootstrapResult bootstrap_metric(const std::vector<Unit>& units, Metric metric, int iterations,
                                 std::uint64_t seed) {
  return bootstrap_metric_indices(
      units.size(),
      [&](std::span<const std::size_t> indices) {
        std::vector<Unit> resample;
        resample.reserve(indices.size());
        for (std::size_t i : indices) resample.push_back(units[i]);
        return metric(resample);
      },
      iterations, seed);
}

enum class TestMethod { welch_t, shapiro_wilk };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::welch_t;
};

// Welch's unequal-variance t-test, two-sided p via the t-distribution CDF.
// Both samples need n >= 2 and finite values. When both variances are zero
// the standard error vanishes; by convention p = 1 for equal means and
// p = 0 otherwise.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Shapiro-Wilk W and p for 3 <= n <= 5000 (Royston's AS R94 approximation:
// Blom-score weights with polynomial edge corrections, then a normal
// transformation of W). Constant samples are an error ("zero range").
TestResult shapiro_wilk(std::span<const double> sample);

// The weight vector the W statistic correlates the sorted sample against
// (ascending, antisymmetric, unit norm). Data proportional to this vector
// attains W = 1 exactly.
std::vector<double> shapiro_wilk_coefficients(int n);

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

// Standard normal CDF and upper tail, accurate in both tails.
double normal_cdf(double z);
double normal_sf(double z);

// Regularized incomplete beta function I_x(a, b), a,b > 0, x in [0,1].
double incomplete_beta(double a, double b, double x);

// Two-sided p for a t statistic with `df` degrees of freedom.
double t_test_p_two_sided(double t, double df);

}  // namespace repeatlab
