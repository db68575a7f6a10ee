#pragma once

#include <numbers>

namespace quantbsde::gaussian {

inline constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

// Closed interval of the extended real line; either end may be infinite.
struct Interval {
    double lo;
    double hi;
};

// Zeroth and first moment of N(mean, std^2) restricted to a cell.
struct PartialMoments {
    double m0;
    double m1;
};

// Standard normal density. Returns exactly 0 for +-infinity.
double normal_pdf(double x) noexcept;

// Standard normal CDF, Phi(x) = erfc(-x / sqrt 2) / 2.
double normal_cdf(double x) noexcept;

// Upper tail 1 - Phi(x), computed without cancellation.
double normal_sf(double x) noexcept;

// Phi(b) - Phi(a) for a <= b, evaluated on the side that avoids cancellation.
double normal_mass(double a, double b) noexcept;

// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

// Integrals of phi_{mean,std} and xi * phi_{mean,std} over `cell`.
// Throws InvalidArgument when std <= 0 or cell.lo > cell.hi.
PartialMoments partial_moments(Interval cell, double mean, double std);

// Integral of xi^2 * phi_{mean,std} over `cell`.
double second_partial_moment(Interval cell, double mean, double std);

}  // namespace quantbsde::gaussian
