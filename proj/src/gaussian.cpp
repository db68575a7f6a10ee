#include "quantbsde/gaussian.hpp"

#include "quantbsde/error.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace quantbsde::gaussian {

namespace {

constexpr double kInvSqrt2 = 0.5 * std::numbers::sqrt2;

// x * phi(x), with the infinite-endpoint limit 0.
double x_pdf(double x) noexcept {
    return std::isinf(x) ? 0.0 : x * normal_pdf(x);
}

}  // namespace

double normal_pdf(double x) noexcept {
    if (std::isinf(x)) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) noexcept {
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double normal_sf(double x) noexcept {
    return normal_cdf(-x);
}

double normal_mass(double a, double b) noexcept {
    if (a >= b) return 0.0;
    // Both ends in the upper half: difference of upper tails keeps relative accuracy.
    if (a > 0.0) return normal_sf(a) - normal_sf(b);
    return normal_cdf(b) - normal_cdf(a);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("normal_quantile: probability must lie in (0, 1)");
    }
    // Acklam's rational approximation, then one Halley step against erfc.
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                             -2.759285104469687e+02, 1.383577518672690e+02,
                                             -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                             -1.556989798598866e+02, 6.680131188771972e+01,
                                             -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                             -2.400758277161838e+00, -2.549732539343734e+00,
                                             4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                             2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = (x < 0.0) ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    const double u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

PartialMoments partial_moments(Interval cell, double mean, double std) {
    if (!(std > 0.0)) throw InvalidArgument("partial_moments: std must be positive");
    if (cell.lo > cell.hi) throw InvalidArgument("partial_moments: cell.lo > cell.hi");
    const double a = (cell.lo - mean) / std;
    const double b = (cell.hi - mean) / std;
    const double m0 = normal_mass(a, b);
    const double m1 = mean * m0 + std * (normal_pdf(a) - normal_pdf(b));
    return {m0, m1};
}

double second_partial_moment(Interval cell, double mean, double std) {
    if (!(std > 0.0)) throw InvalidArgument("second_partial_moment: std must be positive");
    if (cell.lo > cell.hi) throw InvalidArgument("second_partial_moment: cell.lo > cell.hi");
    const double a = (cell.lo - mean) / std;
    const double b = (cell.hi - mean) / std;
    const double m0 = normal_mass(a, b);
    // xi = mean + std z:  E[xi^2 1_cell] = (mean^2 + std^2) m0 + 2 mean std (phi(a) - phi(b))
    //                                      + std^2 (a phi(a) - b phi(b)).
    return (mean * mean + std * std) * m0 +
           2.0 * mean * std * (normal_pdf(a) - normal_pdf(b)) +
           std * std * (x_pdf(a) - x_pdf(b));
}

}  // namespace quantbsde::gaussian
