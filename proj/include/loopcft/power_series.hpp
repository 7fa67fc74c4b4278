#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace loopcft {

/// Truncated power series a_0 + a_1 t + ... + a_{n-1} t^{n-1}.
///
/// All operations keep the truncation length of their left operand, so a
/// computation started at length n never silently grows or shrinks.
class PowerSeries {
public:
    explicit PowerSeries(std::size_t length) : c_(length, 0.0) {}
    explicit PowerSeries(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

    static PowerSeries constant(double value, std::size_t length) {
        PowerSeries s(length);
        if (length > 0) s.c_[0] = value;
        return s;
    }

    /// The series of t itself.
    static PowerSeries variable(std::size_t length) {
        PowerSeries s(length);
        if (length > 1) s.c_[1] = 1.0;
        return s;
    }

    std::size_t size() const { return c_.size(); }
    double operator[](std::size_t k) const { return c_[k]; }
    double& operator[](std::size_t k) { return c_[k]; }
    std::span<const double> coefficients() const { return c_; }

    PowerSeries operator+(const PowerSeries& o) const {
        PowerSeries r(*this);
        for (std::size_t k = 0; k < r.size() && k < o.size(); ++k) r.c_[k] += o.c_[k];
        return r;
    }

    PowerSeries operator-(const PowerSeries& o) const {
        PowerSeries r(*this);
        for (std::size_t k = 0; k < r.size() && k < o.size(); ++k) r.c_[k] -= o.c_[k];
        return r;
    }

    PowerSeries operator*(double s) const {
        PowerSeries r(*this);
        for (auto& x : r.c_) x *= s;
        return r;
    }

    PowerSeries operator*(const PowerSeries& o) const {
        PowerSeries r(size());
        for (std::size_t i = 0; i < size(); ++i) {
            if (c_[i] == 0.0) continue;
            for (std::size_t j = 0; i + j < size() && j < o.size(); ++j) r.c_[i + j] += c_[i] * o.c_[j];
        }
        return r;
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    PowerSeries inverse() const {
        if (c_.empty() || c_[0] == 0.0) throw std::domain_error("PowerSeries::inverse: zero constant term");
        PowerSeries r(size());
        r.c_[0] = 1.0 / c_[0];
        for (std::size_t k = 1; k < size(); ++k) {
            double acc = 0.0;
            for (std::size_t j = 1; j <= k; ++j) acc += c_[j] * r.c_[k - j];
            r.c_[k] = -acc / c_[0];
        }
        return r;
    }

    /// exp of a series with zero constant term handled exactly; a nonzero
    /// constant term contributes the scalar factor exp(a_0).
    PowerSeries exp() const {
        PowerSeries r(size());
        if (size() == 0) return r;
        r.c_[0] = std::exp(c_[0]);
        // r' = a' r
        for (std::size_t k = 1; k < size(); ++k) {
            double acc = 0.0;
            for (std::size_t j = 1; j <= k; ++j) acc += static_cast<double>(j) * c_[j] * r.c_[k - j];
            r.c_[k] = acc / static_cast<double>(k);
        }
        return r;
    }

    /// Natural log; requires a positive constant term.
    PowerSeries log() const {
        if (c_.empty() || c_[0] <= 0.0) throw std::domain_error("PowerSeries::log: non-positive constant term");
        PowerSeries r(size());
        r.c_[0] = std::log(c_[0]);
        // a r' = a'
        for (std::size_t k = 1; k < size(); ++k) {
            double acc = static_cast<double>(k) * c_[k];
            for (std::size_t j = 1; j < k; ++j) acc -= static_cast<double>(j) * r.c_[j] * c_[k - j];
            r.c_[k] = acc / (static_cast<double>(k) * c_[0]);
        }
        return r;
    }

    PowerSeries pow(double exponent) const { return (log() * exponent).exp(); }

    /// Composition this(inner(t)); inner must have zero constant term.
    PowerSeries compose(const PowerSeries& inner) const {
        if (inner.size() > 0 && inner.c_[0] != 0.0)
            throw std::domain_error("PowerSeries::compose: inner series has a constant term");
        const std::size_t n = inner.size();
        PowerSeries result = PowerSeries::constant(size() > 0 ? c_[0] : 0.0, n);
        PowerSeries power = PowerSeries::constant(1.0, n);
        for (std::size_t k = 1; k < size() && k < n; ++k) {
            power = power * inner;
            result = result + power * c_[k];
        }
        return result;
    }

    /// Evaluate by Horner's rule.
    double operator()(double t) const {
        double acc = 0.0;
        for (std::size_t k = size(); k-- > 0;) acc = acc * t + c_[k];
        return acc;
    }

private:
    std::vector<double> c_;
};

}  // namespace loopcft
