#include <doctest.h>

#include <cmath>
#include <vector>

#include "repeatlab/errors.hpp"
#include "repeatlab/metrics.hpp"
#include "repeatlab/rng.hpp"
#include "test_util.hpp"

using namespace repeatlab;

namespace {

ConfusionMatrix matrix_from_counts(const std::vector<std::vector<long long>>& rows) {
  ConfusionMatrix cm;
  cm.k = static_cast<int>(rows.size());
  for (const auto& row : rows) {
    for (long long v : row) cm.counts.push_back(v);
  }
  return cm;
}

// Direct evaluation of the weighted-agreement formula, written independently
// of the library implementation (explicit O/E matrices, long-double sums).
double kappa_direct(const ConfusionMatrix& cm) {
  const int k = cm.k;
  long double total = 0.0L;
  for (long long c : cm.counts) total += static_cast<long double>(c);
  std::vector<long double> row(static_cast<std::size_t>(k), 0.0L);
  std::vector<long double> col(static_cast<std::size_t>(k), 0.0L);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      row[static_cast<std::size_t>(i)] += cm.at(i, j);
      col[static_cast<std::size_t>(j)] += cm.at(i, j);
    }
  }
  long double num = 0.0L, den = 0.0L;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const long double w =
          static_cast<long double>((i - j) * (i - j)) / ((k - 1.0L) * (k - 1.0L));
      num += w * static_cast<long double>(cm.at(i, j)) / total;
      den += w * (row[static_cast<std::size_t>(i)] / total) *
             (col[static_cast<std::size_t>(j)] / total);
    }
  }
  return static_cast<double>(1.0L - num / den);
}

}  // namespace

TEST_CASE("confusion matrices count label/prediction pairs") {
  const std::vector<int> labels = {0, 0, 1, 2, 2, 2};
  const std::vector<int> preds = {0, 1, 1, 2, 2, 0};
  const ConfusionMatrix cm = ConfusionMatrix::from_pairs(labels, preds, 3);
  CHECK_EQ(cm.at(0, 0), 1);
  CHECK_EQ(cm.at(0, 1), 1);
  CHECK_EQ(cm.at(1, 1), 1);
  CHECK_EQ(cm.at(2, 2), 2);
  CHECK_EQ(cm.at(2, 0), 1);
  CHECK_EQ(cm.at(1, 0), 0);
  CHECK_EQ(cm.total(), 6);

  CHECK_EQ(testutil::error_code_of([&] { ConfusionMatrix::from_pairs(labels, preds, 1); }),
           "args");
  const std::vector<int> bad = {0, 0, 3, 2, 2, 2};
  CHECK_EQ(testutil::error_code_of([&] { ConfusionMatrix::from_pairs(bad, preds, 3); }), "args");
  const std::vector<int> shorter = {0, 1};
  CHECK_EQ(testutil::error_code_of([&] { ConfusionMatrix::from_pairs(labels, shorter, 3); }),
           "args");
}

TEST_CASE("accuracy is the exact-match fraction") {
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  const std::vector<int> preds = {0, 1, 2, 0, 1, 2, 0, 2, 0, 1};
  CHECK_EQ(accuracy(labels, preds), doctest::Approx(0.7).epsilon(1e-15));
  CHECK_EQ(accuracy(labels, labels), 1.0);
  const std::vector<int> disjoint = {1, 2, 0, 1, 2, 0, 1, 0, 1, 2};
  CHECK_EQ(accuracy(labels, disjoint), 0.0);

  CHECK_EQ(testutil::error_code_of([] {
             std::vector<int> empty;
             accuracy(empty, empty);
           }),
           "args");
  const std::vector<int> shorter = {0};
  CHECK_EQ(testutil::error_code_of([&] { accuracy(labels, shorter); }), "args");
}

TEST_CASE("weighted agreement matches the frozen hand-evaluated value") {
  const ConfusionMatrix cm = matrix_from_counts({{2, 1, 0}, {0, 2, 1}, {0, 0, 4}});
  // 1 - 0.05/0.335 = 57/67, evaluated by hand before the implementation.
  CHECK_EQ(quadratic_weighted_kappa(cm), doctest::Approx(0.8507462686567164).epsilon(1e-12));
}

TEST_CASE("perfect agreement scores one; constant predictions score zero") {
  CHECK_EQ(quadratic_weighted_kappa(matrix_from_counts({{3, 0}, {0, 7}})), 1.0);
  CHECK_EQ(quadratic_weighted_kappa(matrix_from_counts({{5, 0, 0}, {0, 2, 0}, {0, 0, 9}})), 1.0);

  // Every prediction lands in class 0 while labels vary: observed equals
  // expected weighted disagreement, so the chance-corrected score vanishes.
  const ConfusionMatrix constant = matrix_from_counts({{4, 0, 0}, {3, 0, 0}, {2, 0, 0}});
  CHECK(std::abs(quadratic_weighted_kappa(constant)) < 1e-12);
}

TEST_CASE("degenerate one-class matrices are rejected") {
  const ConfusionMatrix one_cell = matrix_from_counts({{7, 0}, {0, 0}});
  CHECK_EQ(testutil::error_code_of([&] { quadratic_weighted_kappa(one_cell); }), "degenerate");
  ConfusionMatrix empty;
  empty.k = 2;
  empty.counts = {0, 0, 0, 0};
  CHECK_EQ(testutil::error_code_of([&] { quadratic_weighted_kappa(empty); }), "args");
}

TEST_CASE("weighted agreement is symmetric under transpose and class reversal") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<std::vector<long long>> counts(static_cast<std::size_t>(k),
                                               std::vector<long long>(static_cast<std::size_t>(k)));
    for (auto& row : counts) {
      for (long long& v : row) v = static_cast<long long>(rng.uniform_int(9));
    }
    // Guarantee a non-degenerate matrix with mass off the diagonal corners.
    counts[0][0] += 2;
    counts[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(k - 1)] += 2;
    counts[0][static_cast<std::size_t>(k - 1)] += 1;

    const ConfusionMatrix cm = matrix_from_counts(counts);
    const double base = quadratic_weighted_kappa(cm);

    std::vector<std::vector<long long>> transposed(counts);
    std::vector<std::vector<long long>> reversed(counts);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        transposed[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
            counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        reversed[static_cast<std::size_t>(k - 1 - i)][static_cast<std::size_t>(k - 1 - j)] =
            counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    CHECK_EQ(quadratic_weighted_kappa(matrix_from_counts(transposed)),
             doctest::Approx(base).epsilon(1e-12));
    CHECK_EQ(quadratic_weighted_kappa(matrix_from_counts(reversed)),
             doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("weighted agreement matches an independent direct evaluation") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(5));
    std::vector<std::vector<long long>> counts(static_cast<std::size_t>(k),
                                               std::vector<long long>(static_cast<std::size_t>(k)));
    for (auto& row : counts) {
      for (long long& v : row) v = static_cast<long long>(rng.uniform_int(20));
    }
    counts[0][static_cast<std::size_t>(k - 1)] += 1;  // keep the denominator positive
    const ConfusionMatrix cm = matrix_from_counts(counts);
    CHECK_EQ(quadratic_weighted_kappa(cm), doctest::Approx(kappa_direct(cm)).epsilon(1e-10));
  }
}

TEST_CASE("binary calibration error follows the squared-distance definition") {
  const std::vector<int> labels = {1, 0, 0};
  const std::vector<double> probs = {0.9, 0.2, 0.6};
  CHECK_EQ(brier_score_binary(labels, probs),
           doctest::Approx((0.01 + 0.04 + 0.36) / 3.0).epsilon(1e-12));

  const std::vector<int> any = {1, 0, 1, 0};
  const std::vector<double> half(4, 0.5);
  CHECK_EQ(brier_score_binary(any, half), 0.25);

  const std::vector<int> sure = {1, 0};
  const std::vector<double> exact = {1.0, 0.0};
  CHECK_EQ(brier_score_binary(sure, exact), 0.0);

  const std::vector<double> invalid = {1.2, 0.0};
  CHECK_EQ(testutil::error_code_of([&] { brier_score_binary(sure, invalid); }), "args");
  CHECK_EQ(testutil::error_code_of([&] {
             std::vector<int> empty;
             std::vector<double> none;
             brier_score_binary(empty, none);
           }),
           "args");
}

TEST_CASE("vector calibration error uses the sum-over-classes form") {
  const std::vector<int> labels = {0};
  const std::vector<std::vector<double>> probs = {{0.5, 0.25, 0.25}};
  CHECK_EQ(brier_score_multiclass(labels, probs), doctest::Approx(0.375).epsilon(1e-12));

  const std::vector<int> exact_labels = {2, 0};
  const std::vector<std::vector<double>> one_hot = {{0, 0, 1}, {1, 0, 0}};
  CHECK_EQ(brier_score_multiclass(exact_labels, one_hot), 0.0);

  // Moving confident mass toward the true class strictly improves the score.
  const std::vector<int> y = {1};
  const double worse = brier_score_multiclass(y, {{0.8, 0.2}});
  const double better = brier_score_multiclass(y, {{0.7, 0.3}});
  CHECK_LT(better, worse);
}

TEST_CASE("reliability bins are equal width with the top bin closed") {
  const std::vector<int> labels = {0, 1, 1, 1, 1};
  const std::vector<double> probs = {0.05, 0.05, 0.55, 0.95, 1.0};
  const auto bins = calibration_curve(labels, probs, 10);
  REQUIRE_EQ(bins.size(), 10);

  CHECK_EQ(bins[0].low, 0.0);
  CHECK_EQ(bins[0].high, doctest::Approx(0.1).epsilon(1e-15));
  CHECK_EQ(bins[0].count, 2);
  CHECK_EQ(bins[0].mean_predicted, doctest::Approx(0.05).epsilon(1e-12));
  CHECK_EQ(bins[0].empirical_frequency, doctest::Approx(0.5).epsilon(1e-12));

  CHECK_EQ(bins[5].count, 1);
  CHECK_EQ(bins[5].mean_predicted, doctest::Approx(0.55).epsilon(1e-12));
  CHECK_EQ(bins[5].empirical_frequency, 1.0);

  // 0.95 and the exact 1.0 both land in the top bin.
  CHECK_EQ(bins[9].count, 2);
  CHECK_EQ(bins[9].empirical_frequency, 1.0);

  long long total = 0;
  for (const auto& bin : bins) total += bin.count;
  CHECK_EQ(total, 5);

  // Empty bins carry the undefined-value marker.
  CHECK_EQ(bins[2].count, 0);
  CHECK(std::isnan(bins[2].mean_predicted));
  CHECK(std::isnan(bins[2].empirical_frequency));
}

TEST_CASE("an all-positive constant sample occupies only the top bin") {
  const std::vector<int> labels = {1, 1, 1};
  const std::vector<double> probs = {1.0, 1.0, 1.0};
  const auto bins = calibration_curve(labels, probs, 5);
  REQUIRE_EQ(bins.size(), 5);
  for (std::size_t i = 0; i + 1 < bins.size(); ++i) CHECK_EQ(bins[i].count, 0);
  CHECK_EQ(bins[4].count, 3);
  CHECK_EQ(bins[4].mean_predicted, 1.0);
  CHECK_EQ(bins[4].empirical_frequency, 1.0);
}

TEST_CASE("reliability curve input preconditions are enforced") {
  const std::vector<int> labels = {1};
  const std::vector<double> probs = {0.5};
  CHECK_EQ(testutil::error_code_of([&] { calibration_curve(labels, probs, 1); }), "args");
  CHECK_EQ(testutil::error_code_of([&] {
             std::vector<int> empty;
             std::vector<double> none;
             calibration_curve(empty, none, 10);
           }),
           "args");
  const std::vector<double> invalid = {1.5};
  CHECK_EQ(testutil::error_code_of([&] { calibration_curve(labels, invalid, 10); }), "args");
}

TEST_CASE("a calibrated generator yields matching bin means and frequencies") {
  // Law-of-large-numbers oracle: p uniform, outcome Bernoulli(p), n = 50000.
  Rng rng(50000);
  const int n = 50000;
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<double> probs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double p = rng.uniform();
    probs[static_cast<std::size_t>(i)] = p;
    labels[static_cast<std::size_t>(i)] = rng.uniform() < p ? 1 : 0;
  }
  const auto bins = calibration_curve(labels, probs, 10);
  REQUIRE_EQ(bins.size(), 10);
  for (const auto& bin : bins) {
    REQUIRE_GT(bin.count, 0);
    CHECK_LT(std::abs(bin.mean_predicted - bin.empirical_frequency), 0.05);
  }
}
