#include "repeatlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "repeatlab/repeatability.hpp"

namespace repeatlab {

namespace {

constexpr int kMaxResampleAttempts = 50;

double sample_mean(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v;
  return sum / static_cast<double>(x.size());
}

// Unbiased (n-1) sample variance, two-pass.
double sample_variance(std::span<const double> x, double mean) {
  double sum = 0.0;
  for (double v : x) sum += (v - mean) * (v - mean);
  return sum / static_cast<double>(x.size() - 1);
}

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw_args(std::string(what) + " contains a non-finite value");
  }
}

double evaluate_polynomial(std::span<const double> coeffs_ascending, double x) {
  double value = 0.0;
  for (std::size_t i = coeffs_ascending.size(); i-- > 0;) {
    value = value * x + coeffs_ascending[i];
  }
  return value;
}

}  // namespace

BootstrapResult bootstrap_metric_indices(
    std::size_t n_units, const std::function<double(std::span<const std::size_t>)>& metric,
    int iterations, std::uint64_t seed) {
  if (n_units < 2) throw_args("bootstrap requires at least two units");
  if (iterations < 1) throw_args("bootstrap requires at least one iteration");

  BootstrapResult result;
  result.iterations = iterations;
  result.seed = seed;

  std::vector<std::size_t> identity(n_units);
  for (std::size_t i = 0; i < n_units; ++i) identity[i] = i;
  result.point_estimate = metric(identity);

  result.samples.reserve(static_cast<std::size_t>(iterations));
  std::vector<std::size_t> indices(n_units);
  for (int iter = 0; iter < iterations; ++iter) {
    Rng rng(derive_stream(seed, static_cast<std::uint64_t>(iter)));
    bool done = false;
    for (int attempt = 0; attempt < kMaxResampleAttempts && !done; ++attempt) {
      for (std::size_t i = 0; i < n_units; ++i) {
        indices[i] = static_cast<std::size_t>(rng.uniform_int(n_units));
      }
      try {
        result.samples.push_back(metric(indices));
        done = true;
      } catch (const Error&) {
        // degenerate resample; redraw from the same substream
      }
    }
    if (!done) {
      throw_degenerate("bootstrap iteration " + std::to_string(iter) + ": metric undefined on " +
                       std::to_string(kMaxResampleAttempts) + " consecutive resamples");
    }
  }

  std::vector<double> sorted = result.samples;
  std::sort(sorted.begin(), sorted.end());
  result.ci_low = percentile_linear(sorted, 0.025);
  result.ci_high = percentile_linear(sorted, 0.975);
  return result;
}

double normal_quantile(double p) {
  // Wichura's PPND16 rational approximations.
  if (!(p > 0.0 && p < 1.0)) throw_args("normal_quantile requires p in (0, 1)");
  static constexpr double a[8] = {
      3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3};
  static constexpr double b[8] = {
      1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3};
  static constexpr double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-6, 1.42151175831644588870e-15, 0.0};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    double num = a[7], den = b[7];
    for (int i = 6; i >= 0; --i) {
      num = num * r + a[i];
      den = den * r + b[i];
    }
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    double num = c[7], den = d[7];
    for (int i = 6; i >= 0; --i) {
      num = num * r + c[i];
      den = den * r + d[i];
    }
    value = num / den;
  } else {
    r -= 5.0;
    double num = e[7], den = f[7];
    for (int i = 6; i >= 0; --i) {
      num = num * r + e[i];
      den = den * r + f[i];
    }
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double incomplete_beta_cf(double a, double b, double x) {
  constexpr double kEpsilon = 3.0e-16;
  constexpr double kTiny = 1.0e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) return h;
  }
  throw_degenerate("incomplete beta continued fraction failed to converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw_args("incomplete_beta requires a, b > 0");
  if (x < 0.0 || x > 1.0) throw_args("incomplete_beta requires x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * incomplete_beta_cf(a, b, x) / a;
  }
  return 1.0 - front * incomplete_beta_cf(b, a, 1.0 - x) / b;
}

double t_test_p_two_sided(double t, double df) {
  if (!(df > 0.0)) throw_args("t test requires positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw_args("welch_t_test requires n >= 2 in both samples");
  check_finite(a, "sample a");
  check_finite(b, "sample b");
  const double mean_a = sample_mean(a);
  const double mean_b = sample_mean(b);
  const double var_a = sample_variance(a, mean_a);
  const double var_b = sample_variance(b, mean_b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());

  TestResult result;
  result.method = TestMethod::welch_t;
  const double se2 = var_a / na + var_b / nb;
  if (se2 <= 0.0) {
    // Zero variance on both sides: identical constants compare equal (p = 1),
    // different constants are unambiguously different (p = 0).
    const bool equal = mean_a == mean_b;
    result.statistic = equal ? 0.0
                             : std::copysign(std::numeric_limits<double>::infinity(),
                                             mean_a - mean_b);
    result.p_value = equal ? 1.0 : 0.0;
    return result;
  }
  result.statistic = (mean_a - mean_b) / std::sqrt(se2);
  const double ra = var_a / na;
  const double rb = var_b / nb;
  const double df = se2 * se2 / (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  result.p_value = t_test_p_two_sided(result.statistic, df);
  return result;
}

std::vector<double> shapiro_wilk_coefficients(int n) {
  if (n < 3 || n > 5000) throw_args("shapiro_wilk supports 3 <= n <= 5000");
  std::vector<double> coeffs(static_cast<std::size_t>(n), 0.0);
  if (n == 3) {
    coeffs[0] = -std::numbers::sqrt2 / 2.0;
    coeffs[2] = std::numbers::sqrt2 / 2.0;
    return coeffs;
  }
  const double an = static_cast<double>(n);
  const int half = n / 2;

  // Blom scores for the upper half, and the full squared norm.
  std::vector<double> m(static_cast<std::size_t>(half));
  double norm2 = 0.0;
  for (int i = 0; i < half; ++i) {
    // Upper-half plotting positions: ranks n, n-1, ..., n-half+1.
    const double rank = an - static_cast<double>(i);
    m[static_cast<std::size_t>(i)] = normal_quantile((rank - 0.375) / (an + 0.25));
    norm2 += 2.0 * m[static_cast<std::size_t>(i)] * m[static_cast<std::size_t>(i)];
  }
  const double norm = std::sqrt(norm2);
  const double rsn = 1.0 / std::sqrt(an);
  static constexpr double kC1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr double kC2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  const double a_n = m[0] / norm + evaluate_polynomial(kC1, rsn);

  double phi;
  std::size_t adjusted = 1;
  double a_n1 = 0.0;
  if (n > 5) {
    a_n1 = m[1] / norm + evaluate_polynomial(kC2, rsn);
    adjusted = 2;
    phi = (norm2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
          (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
  } else {
    phi = (norm2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a_n * a_n);
  }

  // Assemble the full ascending antisymmetric vector.
  coeffs[static_cast<std::size_t>(n - 1)] = a_n;
  coeffs[0] = -a_n;
  if (n > 5) {
    coeffs[static_cast<std::size_t>(n - 2)] = a_n1;
    coeffs[1] = -a_n1;
  }
  const double scale = std::sqrt(phi);
  for (std::size_t i = adjusted; i < static_cast<std::size_t>(half); ++i) {
    const double value = m[i] / scale;
    coeffs[static_cast<std::size_t>(n - 1) - i] = value;
    coeffs[i] = -value;
  }
  return coeffs;
}

TestResult shapiro_wilk(std::span<const double> sample) {
  const int n = static_cast<int>(sample.size());
  if (n < 3 || n > 5000) throw_args("shapiro_wilk supports 3 <= n <= 5000");
  check_finite(sample, "sample");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 0.0) throw_degenerate("shapiro_wilk: zero range");

  const std::vector<double> coeffs = shapiro_wilk_coefficients(n);
  const double mean = sample_mean(x);
  double numerator = 0.0;
  double denominator = 0.0;
  for (int i = 0; i < n; ++i) {
    numerator += coeffs[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    denominator += (x[static_cast<std::size_t>(i)] - mean) * (x[static_cast<std::size_t>(i)] - mean);
  }
  double w = numerator * numerator / denominator;
  if (w > 1.0) w = 1.0;

  TestResult result;
  result.method = TestMethod::shapiro_wilk;
  result.statistic = w;

  if (n == 3) {
    constexpr double kSixOverPi = 1.90985931710274371;
    constexpr double kAsinSqrt34 = 1.04719755119659771;  // asin(sqrt(3/4))
    double p = kSixOverPi * (std::asin(std::sqrt(w)) - kAsinSqrt34);
    result.p_value = std::clamp(p, 0.0, 1.0);
    return result;
  }

  const double one_minus_w = 1.0 - w;
  if (one_minus_w <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double y = std::log(one_minus_w);
  const double an = static_cast<double>(n);
  double z;
  if (n <= 11) {
    static constexpr double kG[2] = {-2.273, 0.459};
    static constexpr double kC3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double kC4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    const double gamma = evaluate_polynomial(kG, an);
    if (y >= gamma) {
      result.p_value = 0.0;
      return result;
    }
    const double transformed = -std::log(gamma - y);
    const double mu = evaluate_polynomial(kC3, an);
    const double sigma = std::exp(evaluate_polynomial(kC4, an));
    z = (transformed - mu) / sigma;
  } else {
    const double log_n = std::log(an);
    static constexpr double kC5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double kC6[3] = {-0.4803, -0.082676, 0.0030302};
    const double mu = evaluate_polynomial(kC5, log_n);
    const double sigma = std::exp(evaluate_polynomial(kC6, log_n));
    z = (y - mu) / sigma;
  }
  result.p_value = normal_sf(z);
  return result;
}

}  // namespace repeatlab
