#pragma once

#include <cmath>

namespace loopcft {

/// A real number stored as sign * exp(log_abs).
///
/// Zero is represented by log_abs = -inf with sign +1.
struct LogValue {
    double log_abs = -INFINITY;
    int sign = 1;

    static LogValue from_value(double x) {
        if (x == 0.0) return {};
        return {std::log(std::fabs(x)), x < 0.0 ? -1 : 1};
    }

    double value() const { return sign * std::exp(log_abs); }
    bool is_zero() const { return std::isinf(log_abs) && log_abs < 0.0; }

    friend LogValue operator*(LogValue a, LogValue b) { return {a.log_abs + b.log_abs, a.sign * b.sign}; }
    friend LogValue operator/(LogValue a, LogValue b) { return {a.log_abs - b.log_abs, a.sign * b.sign}; }
};

/// log|Gamma(x)| and the sign of Gamma(x).
///
/// Throws PoleError at non-positive integers.
LogValue log_gamma(double x);

/// Barnes double Gamma function Gamma_beta(x) in log scale.
///
/// Normalised so that Gamma_beta((beta + 1/beta)/2) = 1, and satisfying
///   Gamma_beta(x + beta)   = sqrt(2 pi) beta^{beta x - 1/2}       / Gamma(beta x)   * Gamma_beta(x)
///   Gamma_beta(x + 1/beta) = sqrt(2 pi) beta^{-x/beta + 1/2}      / Gamma(x / beta) * Gamma_beta(x)
/// The function is symmetric under beta -> 1/beta, so any beta > 0 is accepted.
///
/// The value is computed from the convergent integral representation at a
/// point of the strip |x - (beta + 1/beta)/2| <= beta/2 and continued to other
/// arguments with the beta-shift equation.
///
/// Throws DomainError for beta <= 0 and PoleError at x = -m beta - n/beta
/// (m, n non-negative integers).
LogValue barnes_double_gamma(double x, double beta);

/// True when x lies within a relative distance tol of a pole -m beta - n/beta.
bool is_barnes_pole(double x, double beta, double tol = 1e-12);

}  // namespace loopcft
