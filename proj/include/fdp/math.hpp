#pragma once

#include <cmath>

namespace fdp {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal CDF via erfc; absolute error below 1e-15 across the real line.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

inline double norm_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace fdp
