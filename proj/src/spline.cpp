#include "prokan/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "prokan/error.hpp"

namespace prokan {

namespace {

constexpr int kMaxDegree = 10;

void validate_knots(const std::vector<double>& knots, int degree) {
  if (degree < 0 || degree > kMaxDegree) {
    throw Error(ErrorCode::kInvalidArgument, "spline degree must be in [0, 10], got " +
                                                 std::to_string(degree));
  }
  if (knots.size() < static_cast<std::size_t>(degree) + 2) {
    throw Error(ErrorCode::kInvalidGrid, "knot vector too short for degree " +
                                             std::to_string(degree));
  }
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!std::isfinite(knots[i])) throw Error(ErrorCode::kInvalidGrid, "non-finite knot");
    if (i > 0 && knots[i] < knots[i - 1]) {
      throw Error(ErrorCode::kInvalidGrid, "knots must be non-decreasing");
    }
  }
}

}  // namespace

KnotVector::KnotVector(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
  validate_knots(knots_, degree_);
  domain_min_ = knots_[static_cast<std::size_t>(degree_)];
  domain_max_ = knots_[static_cast<std::size_t>(num_basis())];
  if (!(domain_min_ < domain_max_)) {
    throw Error(ErrorCode::kInvalidDomain, "knot vector has an empty valid span");
  }
}

KnotVector::KnotVector(std::vector<double> knots, int degree, double domain_min,
                       double domain_max)
    : knots_(std::move(knots)), degree_(degree), domain_min_(domain_min),
      domain_max_(domain_max) {
  validate_knots(knots_, degree_);
  if (!(domain_min_ < domain_max_)) {
    throw Error(ErrorCode::kInvalidDomain, "domain_min must be < domain_max");
  }
  if (domain_min_ < knots_[static_cast<std::size_t>(degree_)] ||
      domain_max_ > knots_[static_cast<std::size_t>(num_basis())]) {
    throw Error(ErrorCode::kInvalidDomain, "domain exceeds the knot support");
  }
}

int KnotVector::find_span(double x) const {
  const int n = num_basis();
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  int span = static_cast<int>(it - knots_.begin()) - 1;
  span = std::clamp(span, degree_, n - 1);
  // Skip back over empty spans (repeated knots at the right end).
  while (span > degree_ && !(knots_[span] < knots_[span + 1])) --span;
  return span;
}

KnotVector make_uniform_knots(double domain_min, double domain_max, int grid_size,
                              int degree) {
  if (!(domain_min < domain_max)) {
    throw Error(ErrorCode::kInvalidDomain, "domain_min must be < domain_max");
  }
  if (grid_size < 1) throw Error(ErrorCode::kInvalidGrid, "grid size must be >= 1");
  if (degree < 0) throw Error(ErrorCode::kInvalidArgument, "degree must be >= 0");

  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(grid_size + 2 * degree + 1));
  knots.insert(knots.end(), static_cast<std::size_t>(degree), domain_min);
  const double width = domain_max - domain_min;
  for (int g = 0; g <= grid_size; ++g) {
    // Endpoints are written exactly so clamping lands on a knot.
    if (g == 0) {
      knots.push_back(domain_min);
    } else if (g == grid_size) {
      knots.push_back(domain_max);
    } else {
      knots.push_back(domain_min + width * static_cast<double>(g) / grid_size);
    }
  }
  knots.insert(knots.end(), static_cast<std::size_t>(degree), domain_max);
  return KnotVector(std::move(knots), degree, domain_min, domain_max);
}

namespace {

double basis_recursive(int i, int k, double x, std::span<const double> t) {
  if (k == 0) {
    if (t[i] <= x && x < t[i + 1]) return 1.0;
    // Right end of the knot vector: close the last non-empty span.
    if (x == t.back() && t[i] < t[i + 1] && t[i + 1] == t.back()) return 1.0;
    return 0.0;
  }
  double value = 0.0;
  const double left_den = t[i + k] - t[i];
  if (left_den != 0.0) {
    value += (x - t[i]) / left_den * basis_recursive(i, k - 1, x, t);
  }
  const double right_den = t[i + k + 1] - t[i + 1];
  if (right_den != 0.0) {
    value += (t[i + k + 1] - x) / right_den * basis_recursive(i + 1, k - 1, x, t);
  }
  return value;
}

}  // namespace

double bspline_basis(int i, int k, double x, const KnotVector& knots) {
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "negative degree");
  const int count = static_cast<int>(knots.size()) - k - 1;
  if (i < 0 || i >= count) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "basis index " + std::to_string(i) + " not in [0, " + std::to_string(count) + ")");
  }
  return basis_recursive(i, k, x, knots.knots());
}

int nonzero_basis(const KnotVector& knots, double x, std::span<double> values,
                  std::span<double> derivs) {
  const int p = knots.degree();
  const int s = knots.find_span(x);
  const auto t = knots.knots();

  std::array<double, kMaxDegree + 1> left{};
  std::array<double, kMaxDegree + 1> right{};
  std::array<double, kMaxDegree + 1> lower{};  // degree p-1 values, for derivatives
  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    if (j == p && !derivs.empty()) std::copy_n(values.begin(), p, lower.begin());
    left[j] = x - t[s + 1 - j];
    right[j] = t[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }

  if (!derivs.empty()) {
    if (p == 0) {
      derivs[0] = 0.0;
    } else {
      // B'_{s-p+j,p} = p * (B_{s-p+j,p-1} / (t_{s+j} - t_{s-p+j})
      //                   - B_{s-p+j+1,p-1} / (t_{s+j+1} - t_{s-p+j+1}))
      for (int j = 0; j <= p; ++j) {
        double d = 0.0;
        if (j >= 1) {
          const double den = t[s + j] - t[s - p + j];
          if (den != 0.0) d += lower[j - 1] / den;
        }
        if (j < p) {
          const double den = t[s + j + 1] - t[s - p + j + 1];
          if (den != 0.0) d -= lower[j] / den;
        }
        derivs[j] = p * d;
      }
    }
  }
  return s - p;
}

SplineFunction::SplineFunction(KnotVector knots, std::vector<double> coefficients)
    : knots_(std::move(knots)), coefficients_(std::move(coefficients)) {
  if (static_cast<int>(coefficients_.size()) != knots_.num_basis()) {
    throw Error(ErrorCode::kLengthMismatch,
                "expected " + std::to_string(knots_.num_basis()) + " coefficients, got " +
                    std::to_string(coefficients_.size()));
  }
  for (double c : coefficients_) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kInvalidArgument, "non-finite coefficient");
  }
}

double clamp_to_domain(const KnotVector& knots, double x) {
  return std::clamp(x, knots.domain_min(), knots.domain_max());
}

double eval_spline(const SplineFunction& s, double x) {
  const auto& kv = s.knot_vector();
  std::array<double, kMaxDegree + 1> basis{};
  const int first = nonzero_basis(kv, clamp_to_domain(kv, x), basis);
  const auto c = s.coefficients();
  double value = 0.0;
  for (int j = 0; j <= kv.degree(); ++j) value += c[first + j] * basis[j];
  return value;
}

double spline_input_derivative(const SplineFunction& s, double x) {
  const auto& kv = s.knot_vector();
  if (kv.degree() == 0) return 0.0;
  if (x < kv.domain_min() || x > kv.domain_max()) return 0.0;
  std::array<double, kMaxDegree + 1> basis{};
  std::array<double, kMaxDegree + 1> derivs{};
  const int first = nonzero_basis(kv, x, basis, derivs);
  const auto c = s.coefficients();
  double slope = 0.0;
  for (int j = 0; j <= kv.degree(); ++j) slope += c[first + j] * derivs[j];
  return slope;
}

std::vector<double> spline_coefficient_gradient(const SplineFunction& s, double x) {
  const auto& kv = s.knot_vector();
  std::array<double, kMaxDegree + 1> basis{};
  const int first = nonzero_basis(kv, clamp_to_domain(kv, x), basis);
  std::vector<double> grad(static_cast<std::size_t>(kv.num_basis()), 0.0);
  for (int j = 0; j <= kv.degree(); ++j) grad[static_cast<std::size_t>(first + j)] = basis[j];
  return grad;
}

}  // namespace prokan
