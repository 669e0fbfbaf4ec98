#ifndef BISG_MATHUTIL_HPP
#define BISG_MATHUTIL_HPP

#include <cmath>

namespace bisg {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727;

// Standard normal density / cumulative / quantile.
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }
inline double norm_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// log Φ(x); asymptotic expansion in the far left tail where erfc underflows.
inline double norm_log_cdf(double x) {
    if (x > -10.0) return std::log(norm_cdf(x));
    const double x2 = x * x;
    return -0.5 * x2 - kLogSqrt2Pi - std::log(-x) +
           std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}
inline double norm_log_sf(double x) { return norm_log_cdf(-x); }

// Quantile via Acklam's rational approximation plus one Halley step.
double norm_quantile(double p);

// log Σ_{k=1..m} convention: log_rising(m, a) = log Π_{k=0..m-1} (a + k)
//                                            = lgamma(m + a) - lgamma(a).
// Sum-of-logs for short products avoids lgamma cancellation for tiny a.
inline double log_rising(long long m, double a) {
    if (m <= 0) return 0.0;
    if (m <= 16) {
        double acc = 0.0;
        for (long long k = 0; k < m; ++k) acc += std::log(a + static_cast<double>(k));
        return acc;
    }
    return std::lgamma(static_cast<double>(m) + a) - std::lgamma(a);
}

}  // namespace bisg

#endif
