#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "approxsense/model.hpp"

namespace approxsense {

// Restriction of the sensitivity class to a sample: row i holds
// (|f_i(x_k) - Af_i(x_k)|)_k. Entries are nonnegative.
struct SensitivityPointSet {
  Matrix points;  // n rows x m columns

  explicit SensitivityPointSet(Matrix points);

  int n() const { return static_cast<int>(points.rows()); }
  int m() const { return static_cast<int>(points.cols()); }
};

struct RadEstimate {
  enum class Method { kExactEnumeration, kMonteCarlo, kClosedForm, kCertifiedUpper };

  double value = 0.0;
  Method method = Method::kClosedForm;
  int m = 0;
  // Monte Carlo only.
  std::int64_t n_sigma = 0;
  std::uint64_t seed = 0;
  double standard_error = 0.0;
  std::vector<std::string> notes;

  // Exact, closed-form and certified upper values are safe to use as
  // Rademacher constituents of a certified bound; Monte Carlo values are not.
  bool certified() const { return method != Method::kMonteCarlo; }
};

std::string to_string(RadEstimate::Method method);

inline constexpr int kMaxEnumerationSize = 22;

// Conjugate exponent p' = p / (p - 1); infinity for p = 1.
double conjugate_exponent(double p);
// l_q norm; q = infinity gives the max norm.
double lp_norm(const Vector& v, double q);

// Unit-l_p vector z maximizing <g, z>; attains <g, z> = |g|_{p'}. For p = 1
// the mass goes to the lowest index of largest |g_k|.
Vector holder_maximizer(const Vector& g, double p);

SensitivityPointSet sensitivity_pointset(const std::vector<Hypothesis>& hypotheses,
                                         const ApproxOperator& op, const UnlabelledSample& s);

// Support function sigma -> sup_{x in set} <sigma, x>.
using SupportFn = std::function<double(const Vector& sigma)>;

// (1/m) 2^-m sum over all sign vectors of support(sigma). Patterns are
// visited in a fixed order and summed in fixed-size blocks, so the result is
// bit-stable.
RadEstimate exact_rademacher_support(int m, const SupportFn& support);
RadEstimate exact_rademacher_pointset(const SensitivityPointSet& ps);
// Same expectation for an arbitrary finite set, one point per row.
RadEstimate exact_rademacher_rows(const Matrix& rows);

RadEstimate mc_rademacher_support(int m, const SupportFn& support, std::int64_t n_sigma,
                                  std::uint64_t seed);
RadEstimate mc_rademacher_pointset(const SensitivityPointSet& ps, std::int64_t n_sigma,
                                   std::uint64_t seed);
// Draws the same sign vectors as mc_rademacher_support and evaluates them in
// blocks with one matrix product each.
RadEstimate mc_rademacher_rows(const Matrix& rows, std::int64_t n_sigma, std::uint64_t seed);

// |mu|_{p'} / m for the axis-aligned ellipse sum_k |x_k / mu_k|^p <= 1.
RadEstimate ellipse_rademacher(const Vector& mu, double p, int m);

// (1/m) max_i |mu_i|_{p'}; exact for unions of axis-aligned ellipses.
RadEstimate union_ellipse_bound(const std::vector<Vector>& mus, double p, int m);

struct RotatedEllipse {
  Matrix V;  // orthogonal, columns are principal directions
  Vector mu;
};

// |V diag(mu)|_{p->1}: exact when V = I or p = 1, otherwise the Holder
// over-estimate |(mu_k |V_k|_1)_k|_{p'}. `exact` reports which case applied.
double operator_norm_p_to_1(const Matrix& V, const Vector& mu, double p, bool* exact = nullptr);

// Diagnostic lower estimate of |M|_{p->1} by multi-start alternating
// maximization of |M u|_1 over the unit l_p sphere. Never used in bounds.
double operator_norm_p_to_1_lower(const Matrix& M, double p, int starts, std::uint64_t seed);

RadEstimate rotated_union_bound(const std::vector<RotatedEllipse>& components, double p, int m);

struct ClusterComponent {
  Vector center;
  Matrix V;
  Vector mu;
};

// Rotated-union term plus the Massart displacement max_i |c_i|_2 sqrt(2 ln l) / m.
RadEstimate cluster_bound(const std::vector<ClusterComponent>& components, double p, int m);

// (R_p / (2 * 2^(1/p)), R_p)
std::pair<double, double> crude_bounds(double R_p, double p);

// radius * |sigma_+|_{p'}: support function of the nonnegative part of the
// l_p ball, from the Moreau split sigma = Pi_K(sigma) + Pi_K*(sigma).
double positive_orthant_ball_sup(const Vector& sigma, double radius, double p);

// max_i |row_i|_2 sqrt(2 ln N) / m over the N rows of an N x m matrix.
double massart_bound(const Matrix& rows);

// (1/m) sup|w - Q(w)| sqrt(sum_k k(x_k, x_k)), m = gram_diagonal.size().
RadEstimate kernel_sensitivity_class_bound(double sup_weight_sensitivity, const Vector& gram_diagonal);

struct CrudeDecomposition {
  double value = 0.0;
  // Equality holds when the approximating class is a singleton.
  bool equality_case = false;
};

CrudeDecomposition crude_decomposition_bound(double rad_H, double rad_HA,
                                             bool approx_class_singleton = false);

}  // namespace approxsense
