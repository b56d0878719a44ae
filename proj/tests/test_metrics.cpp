#include <doctest.h>

#include "pestvl/errors.hpp"
#include "pestvl/metrics.hpp"

#include <cmath>
#include <random>

using namespace pestvl;
using namespace pestvl::metrics;

TEST_CASE("confusion matrix accumulates label/prediction pairs") {
  const std::vector<int> labels = {0, 0, 1, 2, 2};
  const std::vector<int> preds = {0, 1, 1, 2, 0};
  const Matrixd c = confusion(labels, preds, 3);
  Matrixd want(3, 3);
  want << 1, 1, 0,
          0, 1, 0,
          1, 0, 1;
  CHECK(c == want);
  CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), DataError);
  CHECK_THROWS_AS(confusion({3}, {0}, 3), DataError);
  CHECK_THROWS_AS(confusion({0}, {-1}, 3), DataError);
}

TEST_CASE("reference fixture reproduces hand-computed values") {
  Matrixd c(3, 3);
  c << 3, 1, 0,
       0, 2, 2,
       1, 0, 1;
  const Report r = summarize(c);
  CHECK(r.accuracy == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.macroPrecision == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
  CHECK(r.macroF1 == doctest::Approx(241.0 / 420.0).epsilon(1e-12));
  CHECK(r.geometricMean ==
        doctest::Approx(std::pow(3.0 / 16.0, 1.0 / 3.0)).epsilon(1e-12));
  CHECK(r.weightedPrecision == doctest::Approx(19.0 / 30.0).epsilon(1e-12));
  CHECK(r.warnings.empty());
}

TEST_CASE("perfect predictions score one everywhere") {
  Matrixd c = Matrixd::Zero(4, 4);
  c.diagonal() << 5, 3, 9, 1;
  const Report r = summarize(c);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macroPrecision == 1.0);
  CHECK(r.macroF1 == 1.0);
  CHECK(r.geometricMean == 1.0);
  CHECK(r.weightedPrecision == 1.0);
}

TEST_CASE("geometric mean of {1.0, 0.25} is exactly 0.5") {
  CHECK(geometricMean({1.0, 0.25}) == 0.5);
  CHECK(geometricMean({1.0, 0.0, 1.0}) == 0.0);
  CHECK(geometricMean({0.7}) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("never-predicted class warns and contributes zero precision") {
  Matrixd c(2, 2);
  c << 2, 0,
       3, 0;  // class 1 never predicted
  const Report r = summarize(c);
  CHECK(r.macroPrecision == doctest::Approx(0.5 * (2.0 / 5.0)).epsilon(1e-12));
  REQUIRE(!r.warnings.empty());
  bool mentioned = false;
  for (const auto& w : r.warnings) mentioned |= w.find("never predicted") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("class absent from the labels is excluded from the geometric mean") {
  Matrixd c(3, 3);
  c << 2, 0, 0,
       0, 0, 0,  // no true samples of class 1
       0, 0, 2;
  const Report r = summarize(c);
  CHECK(r.geometricMean == 1.0);
  bool mentioned = false;
  for (const auto& w : r.warnings) mentioned |= w.find("absent") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("zero recall on a present class zeroes the geometric mean") {
  Matrixd c(2, 2);
  c << 3, 0,
       2, 0;  // class 1 present but never recalled
  CHECK(summarize(c).geometricMean == 0.0);
}

TEST_CASE("summarize validates its input") {
  CHECK_THROWS_AS(summarize(Matrixd::Zero(2, 3)), DataError);
  CHECK_THROWS_AS(summarize(Matrixd::Zero(2, 2)), DataError);
  Matrixd neg(2, 2);
  neg << 1, -1, 0, 2;
  CHECK_THROWS_AS(summarize(neg), DataError);
}

TEST_CASE("geometric mean never exceeds macro recall") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + int(gen() % 5);
    Matrixd c(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) c(i, j) = double(gen() % 10);
    // Guarantee every class appears so recall is defined for each row.
    for (Index i = 0; i < n; ++i) c(i, i) += 1.0;
    const Report r = summarize(c);
    std::vector<double> recalls;
    for (Index i = 0; i < n; ++i) recalls.push_back(c(i, i) / c.row(i).sum());
    double macroRecall = 0.0;
    for (double v : recalls) macroRecall += v / double(n);
    CHECK(r.geometricMean <= macroRecall + 1e-12);
    CHECK(r.geometricMean == doctest::Approx(geometricMean(recalls)).epsilon(1e-12));
  }
}
