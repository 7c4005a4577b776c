#pragma once

// Log-semiring addition used by the trellis recursions.
//
// The kernel is branch-free and calls no libm functions so that the row loops
// in the decoder vectorize. exp and log1p are evaluated with range reduction
// and short polynomials accurate to a few ulp on the ranges used here.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace nnc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

// exp(x) for x in [-40, 0].
inline double exp_nonpositive(double x) noexcept {
    constexpr double log2e = 1.4426950408889634074;
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double shifter = 6755399441055744.0;  // 1.5 * 2^52
    const double biased = x * log2e + shifter;
    const double k = biased - shifter;
    const double r = (x - k * ln2_hi) - k * ln2_lo;  // |r| <= ln2 / 2
    // Taylor polynomial through r^13 / 13!.
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // The low bits of `biased` hold k in two's complement; build 2^k directly.
    const std::uint64_t bits = (std::bit_cast<std::uint64_t>(biased) + 1023u) << 52;
    return p * std::bit_cast<double>(bits);
}

// log1p(u) for u in [0, 1].
inline double log1p_unit(double u) noexcept {
    constexpr double ln2 = 0.69314718055994530942;
    // For u > sqrt(2) - 1 use log1p(u) = ln 2 + log1p((u - 1) / 2).
    const bool upper = u > 0.41421356237309504880;
    const double v = upper ? (u - 1.0) * 0.5 : u;
    const double offset = upper ? ln2 : 0.0;
    // log1p(v) = 2 atanh(s), s = v / (2 + v), |s| < 0.172.
    const double s = v / (2.0 + v);
    const double s2 = s * s;
    double p = 1.0 / 23.0;
    p = p * s2 + 1.0 / 21.0;
    p = p * s2 + 1.0 / 19.0;
    p = p * s2 + 1.0 / 17.0;
    p = p * s2 + 1.0 / 15.0;
    p = p * s2 + 1.0 / 13.0;
    p = p * s2 + 1.0 / 11.0;
    p = p * s2 + 1.0 / 9.0;
    p = p * s2 + 1.0 / 7.0;
    p = p * s2 + 1.0 / 5.0;
    p = p * s2 + 1.0 / 3.0;
    p = p * s2 + 1.0;
    return offset + 2.0 * s * p;
}

// log1p(exp(d)) for d <= 0, including d = -inf. Exactly 0 for d < -40
// (the true value is below 4.3e-18 there).
inline double softplus_nonpositive(double d) noexcept {
    const double x = d < -40.0 ? -40.0 : d;
    const double value = log1p_unit(exp_nonpositive(x));
    return d < -40.0 ? 0.0 : value;
}

}  // namespace detail

// log(exp(a) + exp(b)) = max + log1p(exp(-|a - b|)). Exact for -inf operands
// and never NaN for non-NaN input.
inline double lse(double a, double b) noexcept {
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    const double d = hi == kNegInf ? kNegInf : lo - hi;
    return hi + detail::softplus_nonpositive(d);
}

// Left fold of lse in index order.
inline double lse(std::span<const double> values) noexcept {
    double acc = kNegInf;
    for (double v : values) acc = lse(acc, v);
    return acc;
}

}  // namespace nnc
