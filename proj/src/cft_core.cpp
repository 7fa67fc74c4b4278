#include "loopcft/cft_core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "loopcft/errors.hpp"

namespace loopcft {

namespace {

constexpr double kPi = std::numbers::pi;

std::string half_integer(int twice) {
    if (twice % 2 == 0) return std::to_string(twice / 2);
    return std::to_string(twice) + "/2";
}

}  // namespace

Coupling Coupling::from_q(double q) {
    if (!(q > 0.0 && q <= 4.0)) {
        std::ostringstream os;
        os << "coupling_from_q: q = " << q << " outside (0, 4]";
        throw DomainError(os.str());
    }
    // 4 cos^2(pi b2) = q with b2 in (1/2, 1]  =>  b2 = 1 - arccos(sqrt(q)/2) / pi
    const double half_root = std::min(1.0, 0.5 * std::sqrt(q));
    Coupling c = from_beta_sq(1.0 - std::acos(half_root) / kPi);
    c.q = q;
    return c;
}

Coupling Coupling::from_beta_sq(double beta_sq) {
    if (!(beta_sq > 0.0) || !std::isfinite(beta_sq)) throw DomainError("coupling_from_beta_sq: beta^2 must be positive");
    Coupling c;
    c.beta_sq = beta_sq;
    c.beta = std::sqrt(beta_sq);
    const double cs = std::cos(kPi * beta_sq);
    c.q = 4.0 * cs * cs;
    const double d = c.beta - 1.0 / c.beta;
    c.central_charge = 1.0 - 6.0 * d * d;
    return c;
}

std::string to_string(BoundaryCondition bc) { return bc == BoundaryCondition::free ? "free" : "wired"; }

BoundaryCondition boundary_condition_from_string(const std::string& s) {
    if (s == "free") return BoundaryCondition::free;
    if (s == "wired") return BoundaryCondition::wired;
    throw DomainError("unknown boundary condition '" + s + "'");
}

std::string KacIndex::to_string() const { return "(" + half_integer(r2) + "," + half_integer(s2) + ")"; }

double momentum(double r, double s, const Coupling& c) { return 0.5 * (r * c.beta - s / c.beta); }

double momentum(KacIndex kac, const Coupling& c) { return momentum(kac.r(), kac.s(), c); }

double weight_from_momentum(double p, const Coupling& c) {
    const double p11 = momentum(1.0, 1.0, c);
    return p * p - p11 * p11;
}

double weight(double r, double s, const Coupling& c) { return weight_from_momentum(momentum(r, s, c), c); }

double weight(KacIndex kac, const Coupling& c) { return weight_from_momentum(momentum(kac, c), c); }

KacIndex FieldLabel::kac() const {
    switch (kind) {
        case FieldKind::bulk_fuseau: return KacIndex::twice(n, 0);
        case FieldKind::bulk_spin: return KacIndex::twice(0, 1);
        case FieldKind::bulk_degenerate: return KacIndex::integer(1, n);
        case FieldKind::boundary: return KacIndex::integer(n, 1);
    }
    return {};
}

LogValue log_ope_coefficient(int n, KacIndex f1, KacIndex f2, const Coupling& c) {
    if (n < 1) throw DomainError("ope_coefficient: N must be positive");
    if (c.beta_sq == 1.0) return {};

    const double beta = c.beta;
    const double half_q = 0.5 * (beta + 1.0 / beta);
    const double p = momentum(1.0, static_cast<double>(n), c);

    auto gamma_b = [&](double x, const std::string& where) {
        if (is_barnes_pole(x, beta)) {
            std::ostringstream os;
            os.precision(17);
            os << "ope_coefficient: Gamma_beta pole at x = " << x << " in " << where << " for N = " << n << ", "
               << f1.to_string() << " x " << f2.to_string() << ", beta^2 = " << c.beta_sq;
            throw PoleError(os.str());
        }
        return barnes_double_gamma(x, beta);
    };

    LogValue result = LogValue::from_value(16.0 * p * std::sin(kPi * c.beta_sq) * std::sin(kPi / c.beta_sq));
    if (result.is_zero()) {
        if (p == 0.0) throw PoleError("ope_coefficient: P_(1,N) = 0 puts Gamma_beta(0) in the numerator");
        return result;
    }
    result = result * gamma_b(2.0 * p, "numerator +") * gamma_b(-2.0 * p, "numerator -");

    for (int e1 : {1, -1}) {
        for (int e2 : {1, -1}) {
            for (int e3 : {1, -1}) {
                const double rsum = std::fabs(e1 * f1.r() + e2 * f2.r());
                const double ssum = e1 * f1.s() + e2 * f2.s();
                const double x = half_q + 0.5 * beta * rsum + 0.5 * ssum / beta + e3 * p;
                std::ostringstream where;
                where << "denominator (e1,e2,e3) = (" << e1 << "," << e2 << "," << e3 << ")";
                result = result / gamma_b(x, where.str());
            }
        }
    }
    return result;
}

double ope_coefficient(int n, KacIndex f1, KacIndex f2, const Coupling& c) {
    return log_ope_coefficient(n, f1, f2, c).value();
}

double one_point_amplitude(int n, const Coupling& c) {
    if (n < 1) throw DomainError("one_point_amplitude: N must be positive");
    return std::sin(2.0 * kPi * momentum(1.0, static_cast<double>(n), c) / c.beta);
}

}  // namespace loopcft
