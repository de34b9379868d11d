#pragma once

#include <span>
#include <vector>

namespace prokan {

// Non-decreasing knot sequence t_0..t_{m-1} for splines of a fixed degree.
// num_basis = m - degree - 1. The evaluation domain must lie inside
// [t_degree, t_num_basis], where the basis forms a partition of unity.
class KnotVector {
 public:
  // Domain defaults to [t_degree, t_num_basis].
  KnotVector(std::vector<double> knots, int degree);
  KnotVector(std::vector<double> knots, int degree, double domain_min, double domain_max);

  std::span<const double> knots() const { return knots_; }
  double operator[](std::size_t i) const { return knots_[i]; }
  std::size_t size() const { return knots_.size(); }
  int degree() const { return degree_; }
  int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  double domain_min() const { return domain_min_; }
  double domain_max() const { return domain_max_; }

  // Index s of the knot span [t_s, t_{s+1}) containing x, with x already inside
  // the domain. At x == domain_max the last non-empty span is used.
  int find_span(double x) const;

  bool operator==(const KnotVector&) const = default;

 private:
  std::vector<double> knots_;
  int degree_;
  double domain_min_;
  double domain_max_;
};

// Clamped uniform knots: G+1 equally spaced breakpoints on [domain_min, domain_max]
// with `degree` extra copies of each end knot. num_basis = G + degree.
KnotVector make_uniform_knots(double domain_min, double domain_max, int grid_size, int degree);

// B_{i,k}(x) by direct Cox-de Boor recursion over `knots`. k may differ from
// knots.degree(); valid indices are 0 <= i < knots.size() - k - 1. Zero-width
// spans contribute 0. At x == knots.domain_max() the last non-empty span is
// treated as closed so the basis stays a partition of unity there.
double bspline_basis(int i, int k, double x, const KnotVector& knots);

// Fast path for the k+1 non-zero degree-k basis values at x (x inside the
// domain). Writes them into `values` (size degree+1) and returns the index of
// the first one. If `derivs` is non-empty it receives d/dx of the same bases.
int nonzero_basis(const KnotVector& knots, double x, std::span<double> values,
                  std::span<double> derivs = {});

class SplineFunction {
 public:
  SplineFunction(KnotVector knots, std::vector<double> coefficients);

  const KnotVector& knot_vector() const { return knots_; }
  std::span<const double> coefficients() const { return coefficients_; }
  std::span<double> coefficients() { return coefficients_; }
  int degree() const { return knots_.degree(); }
  int num_basis() const { return knots_.num_basis(); }

 private:
  KnotVector knots_;
  std::vector<double> coefficients_;
};

// Clamps x into the spline domain.
double clamp_to_domain(const KnotVector& knots, double x);

double eval_spline(const SplineFunction& s, double x);

// d/dx of eval_spline. Zero for degree 0 and outside the domain (the clamp is flat there).
double spline_input_derivative(const SplineFunction& s, double x);

// [B_{0,k}(x), ..., B_{n-1,k}(x)] at the clamped x.
std::vector<double> spline_coefficient_gradient(const SplineFunction& s, double x);

}  // namespace prokan
