#include "loopcft/special_functions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "loopcft/errors.hpp"
#include "loopcft/power_series.hpp"

namespace loopcft {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfLogTwoPi = 0.91893853320467274178032973640562;

// The small-t expansion is used on [0, kSeriesCut]; singularities of the
// integrand sit at |t| = 2 pi min(beta, 1/beta) >= 4.4 for beta^2 >= 1/2.
constexpr double kSeriesCut = 1.0;
constexpr std::size_t kSeriesTerms = 40;

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// log Gamma_beta(Q/2 + a) for |a| <= max(beta, 1/beta)/2, from
//   log Gamma_beta(x) = int_0^inf dt/t [ (e^{-a t} - 1) / (4 sinh(beta t/2) sinh(t/(2 beta)))
//                                        + a/t - (a^2/2) e^{-t} ],   a = x - Q/2.
double log_barnes_fundamental(double a, double beta) {
    const std::size_t n = kSeriesTerms + 2;

    // sinh(z)/z = sum z^{2k}/(2k+1)!
    auto sinhc = [n](double scale) {
        PowerSeries s(n);
        double term = 1.0;
        for (std::size_t k = 0; 2 * k < n; ++k) {
            s[2 * k] = term;
            term *= scale * scale / static_cast<double>((2 * k + 2) * (2 * k + 3));
        }
        return s;
    };
    // 4 sinh(beta t/2) sinh(t/(2 beta)) = t^2 * g(t)^{-1}
    const PowerSeries g = (sinhc(beta / 2.0) * sinhc(0.5 / beta)).inverse();

    // (e^{-a t} - 1)/t
    PowerSeries e(n);
    {
        double term = -a;
        for (std::size_t k = 0; k < n; ++k) {
            e[k] = term;
            term *= -a / static_cast<double>(k + 2);
        }
    }
    const PowerSeries p = e * g;

    // Integrand near 0: sum_{j>=1} [p_{j+1} - (a^2/2)(-1)^j/j!] t^{j-1}
    double series_integral = 0.0;
    {
        double inv_fact = 1.0;
        double tpow = kSeriesCut;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            inv_fact /= static_cast<double>(j);
            const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
            const double cj = p[j + 1] - 0.5 * a * a * sgn * inv_fact;
            series_integral += cj * tpow / static_cast<double>(j);
            tpow *= kSeriesCut;
        }
    }

    // Exponentially decaying part beyond the cut; the a/t^2 and e^{-t}/t pieces
    // are integrated in closed form.
    auto decaying = [a, beta](double t) {
        const double den = 4.0 * std::sinh(0.5 * beta * t) * std::sinh(0.5 * t / beta);
        return std::expm1(-a * t) / (den * t);
    };
    using Gauss = boost::math::quadrature::gauss<double, 30>;
    double tail = 0.0;
    for (double lo = kSeriesCut; lo < 256.0; lo *= 2.0) tail += Gauss::integrate(decaying, lo, 2.0 * lo);

    const double e1 = -std::expint(-kSeriesCut);  // E_1(cut)
    return series_integral + tail + a / kSeriesCut - 0.5 * a * a * e1;
}

}  // namespace

LogValue log_gamma(double x) {
    if (std::isnan(x)) throw DomainError("log_gamma: NaN argument");
    if (is_nonpositive_integer(x)) {
        std::ostringstream os;
        os << "log_gamma: pole at x = " << x;
        throw PoleError(os.str());
    }
    int sign = 1;
#if defined(__GLIBC__)
    const double l = ::lgamma_r(x, &sign);
#else
    const double l = std::lgamma(x);
    if (x < 0.0) sign = (static_cast<long long>(std::floor(x)) % 2 == 0) ? 1 : -1;
#endif
    return {l, sign};
}

bool is_barnes_pole(double x, double beta, double tol) {
    if (x > tol) return false;
    const double inv = 1.0 / beta;
    const double scale = std::max(1.0, std::fabs(x));
    for (int m = 0; m * beta <= -x + tol * scale + 1e-300; ++m) {
        const double rest = -x - m * beta;  // must equal n / beta
        const double n = std::round(rest / inv);
        if (n >= 0.0 && std::fabs(rest - n * inv) <= tol * scale) return true;
    }
    return false;
}

LogValue barnes_double_gamma(double x, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("barnes_double_gamma: beta must be positive");
    if (!std::isfinite(x)) throw DomainError("barnes_double_gamma: non-finite argument");
    if (is_barnes_pole(x, beta)) {
        std::ostringstream os;
        os.precision(17);
        os << "barnes_double_gamma: pole at x = " << x << " (beta = " << beta << ")";
        throw PoleError(os.str());
    }

    const double half_q = 0.5 * (beta + 1.0 / beta);
    const double log_beta = std::log(beta);
    double log_abs = 0.0;
    int sign = 1;

    // Gamma_beta(y) = Gamma_beta(y + beta) Gamma(beta y) / (sqrt(2pi) beta^{beta y - 1/2})
    while (x < half_q - 0.5 * beta) {
        const LogValue g = log_gamma(beta * x);
        log_abs += g.log_abs - kHalfLogTwoPi - (beta * x - 0.5) * log_beta;
        sign *= g.sign;
        x += beta;
    }
    // Gamma_beta(y + beta) = sqrt(2pi) beta^{beta y - 1/2} Gamma_beta(y) / Gamma(beta y)
    while (x > half_q + 0.5 * beta) {
        x -= beta;
        const LogValue g = log_gamma(beta * x);
        log_abs += kHalfLogTwoPi + (beta * x - 0.5) * log_beta - g.log_abs;
        sign *= g.sign;
    }
    log_abs += log_barnes_fundamental(x - half_q, beta);
    return {log_abs, sign};
}

}  // namespace loopcft
