#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "prokan/error.hpp"
#include "prokan/spline.hpp"

using namespace prokan;

namespace {

// Reference de Boor evaluation written from the triangular scheme, kept
// independent of the library's recursion.
double de_boor_reference(const std::vector<double>& t, const std::vector<double>& c, int k, double x) {
  int s = k;
  while (s + 1 < static_cast<int>(c.size()) && x >= t[s + 1]) ++s;
  std::vector<double> d(c.begin() + (s - k), c.begin() + s + 1);
  for (int r = 1; r <= k; ++r) {
    for (int j = k; j >= r; --j) {
      const int i = j + s - k;
      const double denom = t[i + k + 1 - r] - t[i];
      const double a = denom == 0.0 ? 0.0 : (x - t[i]) / denom;
      d[j] = (1.0 - a) * d[j - 1] + a * d[j];
    }
  }
  return d[k];
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no prokan::Error thrown";
  return ErrorCode::kParseError;
}

}  // namespace

TEST(UniformKnots, DegreeZeroAddsNoKnots) {
  const auto kv = make_uniform_knots(0, 2, 2, 0);
  EXPECT_EQ(std::vector<double>(kv.knots().begin(), kv.knots().end()), (std::vector<double>{0, 1, 2}));
  EXPECT_EQ(kv.num_basis(), 2);
}

TEST(UniformKnots, ClampedCubic) {
  const auto kv = make_uniform_knots(0, 1, 4, 3);
  const std::vector<double> want{0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1};
  EXPECT_EQ(std::vector<double>(kv.knots().begin(), kv.knots().end()), want);
  EXPECT_EQ(kv.size(), 11u);
  EXPECT_EQ(kv.num_basis(), 7);
}

TEST(UniformKnots, RejectsBadArguments) {
  EXPECT_EQ(code_of([] { make_uniform_knots(1, 0, 4, 3); }), ErrorCode::kInvalidDomain);
  EXPECT_EQ(code_of([] { make_uniform_knots(0, 0, 4, 3); }), ErrorCode::kInvalidDomain);
  EXPECT_EQ(code_of([] { make_uniform_knots(0, 1, 0, 3); }), ErrorCode::kInvalidGrid);
  EXPECT_EQ(code_of([] { make_uniform_knots(0, 1, 4, -1); }), ErrorCode::kInvalidArgument);
}

TEST(KnotVector, RejectsDecreasingKnots) {
  EXPECT_ANY_THROW(KnotVector({0, 2, 1}, 0));
}

TEST(BsplineBasis, HandValues) {
  const KnotVector kv({0, 1, 2}, 0);
  EXPECT_EQ(bspline_basis(0, 0, 0.5, kv), 1.0);
  EXPECT_EQ(bspline_basis(0, 1, 0.5, kv), 0.5);
  EXPECT_EQ(bspline_basis(0, 1, 1.0, kv), 1.0);
  EXPECT_EQ(bspline_basis(1, 0, 0.5, kv), 0.0);
}

TEST(BsplineBasis, IndexOutOfRange) {
  const KnotVector kv({0, 1, 2}, 0);
  EXPECT_EQ(code_of([&] { bspline_basis(2, 0, 0.5, kv); }), ErrorCode::kIndexOutOfRange);
  EXPECT_EQ(code_of([&] { bspline_basis(1, 1, 0.5, kv); }), ErrorCode::kIndexOutOfRange);
  EXPECT_EQ(code_of([&] { bspline_basis(-1, 0, 0.5, kv); }), ErrorCode::kIndexOutOfRange);
}

TEST(BsplineBasis, PartitionOfUnityAtDomainEnds) {
  for (int k = 0; k <= 3; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 5, k);
    for (double x : {-1.0, 1.0}) {
      double sum = 0;
      for (int i = 0; i < kv.num_basis(); ++i) sum += bspline_basis(i, k, x, kv);
      EXPECT_NEAR(sum, 1.0, 1e-12) << "k=" << k << " x=" << x;
    }
  }
}

TEST(BsplineBasis, SupportAndSignProperties) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> any(-1.5, 1.5);
  for (int k = 0; k <= 3; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 4, k);
    for (int n = 0; n < 300; ++n) {
      const double x = any(rng);
      for (int i = 0; i < kv.num_basis(); ++i) {
        const double b = bspline_basis(i, k, x, kv);
        EXPECT_GE(b, 0.0);
        if (x < kv[i] || x > kv[i + k + 1]) EXPECT_EQ(b, 0.0);
      }
    }
  }
}

TEST(NonzeroBasis, MatchesRecursion) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k <= 5; ++k) {
    for (int g : {1, 3, 7}) {
      const auto kv = make_uniform_knots(-1, 1, g, k);
      std::vector<double> vals(k + 1);
      for (int n = 0; n < 200; ++n) {
        const double x = n == 0 ? 1.0 : (n == 1 ? -1.0 : u(rng));
        const int first = nonzero_basis(kv, x, vals);
        for (int i = 0; i < kv.num_basis(); ++i) {
          const double want = bspline_basis(i, k, x, kv);
          const double got = (i >= first && i <= first + k) ? vals[i - first] : 0.0;
          EXPECT_NEAR(got, want, 1e-12) << "k=" << k << " g=" << g << " i=" << i << " x=" << x;
        }
      }
    }
  }
}

TEST(NonzeroBasis, DerivativesMatchFiniteDifferences) {
  const double h = 1e-6;
  for (int k = 1; k <= 4; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 5, k);
    std::vector<double> v(k + 1), d(k + 1), up(k + 1), dn(k + 1);
    for (double x = -0.93; x < 0.95; x += 0.137) {
      const int first = nonzero_basis(kv, x, v, d);
      ASSERT_EQ(nonzero_basis(kv, x + h, up), first);
      ASSERT_EQ(nonzero_basis(kv, x - h, dn), first);
      for (int j = 0; j <= k; ++j) EXPECT_NEAR(d[j], (up[j] - dn[j]) / (2 * h), 1e-6);
    }
  }
}

TEST(EvalSpline, MatchesReferenceDeBoor) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k <= 3; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 6, k);
    std::vector<double> c(kv.num_basis());
    for (double& v : c) v = u(rng);
    const SplineFunction s(kv, c);
    const std::vector<double> t(kv.knots().begin(), kv.knots().end());
    for (int n = 0; n < 100; ++n) {
      const double x = u(rng);
      EXPECT_NEAR(eval_spline(s, x), de_boor_reference(t, c, k, x), 1e-12);
    }
  }
}

TEST(EvalSpline, ConstantReproduction) {
  for (int k = 0; k <= 3; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 5, k);
    const SplineFunction s(kv, std::vector<double>(kv.num_basis(), 3.7));
    for (double x = -0.99; x < 1.0; x += 0.0731) {
      EXPECT_NEAR(eval_spline(s, x), 3.7, 1e-12);
      EXPECT_NEAR(spline_input_derivative(s, x), 0.0, 1e-12);
    }
  }
}

TEST(EvalSpline, DegreeZeroLookup) {
  const SplineFunction s(KnotVector({0, 1, 2}, 0), {2, 5});
  EXPECT_EQ(eval_spline(s, 0.5), 2.0);
  EXPECT_EQ(eval_spline(s, 1.5), 5.0);
  const auto g = spline_coefficient_gradient(s, 1.5);
  EXPECT_EQ(g, (std::vector<double>{0, 1}));
}

TEST(EvalSpline, ClampsOutsideDomain) {
  const auto kv = make_uniform_knots(-1, 1, 4, 3);
  std::vector<double> c(kv.num_basis());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::sin(static_cast<double>(i));
  const SplineFunction s(kv, c);
  EXPECT_EQ(eval_spline(s, 1.0 + 10), eval_spline(s, 1.0));
  EXPECT_EQ(eval_spline(s, -1.0 - 10), eval_spline(s, -1.0));
  EXPECT_EQ(spline_input_derivative(s, 3.0), 0.0);
  EXPECT_EQ(spline_input_derivative(s, -3.0), 0.0);
}

TEST(EvalSpline, LinearHatSlope) {
  // Clamped degree-1 knots [0,0,1,2,2]: the middle hat rises with slope 1 on [0,1].
  const SplineFunction s(KnotVector({0, 0, 1, 2, 2}, 1), {0, 1, 0});
  EXPECT_DOUBLE_EQ(spline_input_derivative(s, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(eval_spline(s, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(spline_input_derivative(s, 1.5), -1.0);
}

TEST(EvalSpline, LengthMismatch) {
  EXPECT_EQ(code_of([] { SplineFunction(make_uniform_knots(-1, 1, 4, 3), {1, 2}); }),
            ErrorCode::kLengthMismatch);
}

TEST(SplineDerivative, FiniteDifferenceOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> interior(-0.999, 0.999);
  const double h = 1e-5;
  for (int k = 1; k <= 3; ++k) {
    const auto kv = make_uniform_knots(-1, 1, 5, k);
    std::vector<double> c(kv.num_basis());
    for (double& v : c) v = u(rng);
    const SplineFunction s(kv, c);
    for (int n = 0; n < 100; ++n) {
      const double x = interior(rng);
      const double fd = (eval_spline(s, x + h) - eval_spline(s, x - h)) / (2 * h);
      EXPECT_NEAR(spline_input_derivative(s, x), fd, 1e-6) << "k=" << k << " x=" << x;
    }
  }
}

TEST(SplineCoefficientGradient, SumsToOneAndMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto kv = make_uniform_knots(-1, 1, 5, 3);
  std::vector<double> c(kv.num_basis());
  for (double& v : c) v = u(rng);
  for (int n = 0; n < 20; ++n) {
    const double x = u(rng);
    const SplineFunction s(kv, c);
    const auto g = spline_coefficient_gradient(s, x);
    double sum = 0;
    for (double v : g) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t i = 0; i < c.size(); ++i) {
      auto up = c, dn = c;
      up[i] += 1e-5;
      dn[i] -= 1e-5;
      const double fd = (eval_spline(SplineFunction(kv, up), x) - eval_spline(SplineFunction(kv, dn), x)) / 2e-5;
      EXPECT_NEAR(g[i], fd, 1e-8);
    }
  }
}
