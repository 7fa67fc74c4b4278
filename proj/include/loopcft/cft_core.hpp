#pragma once

#include <string>

#include "loopcft/special_functions.hpp"

namespace loopcft {

/// A point (Q, beta, c) on the critical FK line.
///
/// The branch beta^2 in (1/2, 1] is used, so Q = 2 gives beta^2 = 3/4 and c = 1/2.
struct Coupling {
    double q = 2.0;
    double beta_sq = 0.75;
    double beta = 0.8660254037844386;
    double central_charge = 0.5;

    /// Throws DomainError for q outside (0, 4].
    static Coupling from_q(double q);

    /// Any beta^2 > 0 is accepted; values off the FK branch are used as
    /// nearby evaluation points when regularising rational couplings.
    static Coupling from_beta_sq(double beta_sq);
};

enum class BoundaryCondition { free, wired };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_condition_from_string(const std::string& s);

/// Kac indices (r, s), each an integer or half-integer, stored as twice their value.
struct KacIndex {
    int r2 = 0;
    int s2 = 0;

    static constexpr KacIndex integer(int r, int s) { return {2 * r, 2 * s}; }
    static constexpr KacIndex twice(int r2, int s2) { return {r2, s2}; }

    double r() const { return 0.5 * r2; }
    double s() const { return 0.5 * s2; }
    std::string to_string() const;

    friend bool operator==(const KacIndex&, const KacIndex&) = default;
};

/// P_(r,s) = (r beta - s / beta) / 2
double momentum(KacIndex kac, const Coupling& c);
double momentum(double r, double s, const Coupling& c);

/// Delta_(r,s) = P_(r,s)^2 - P_(1,1)^2
double weight(KacIndex kac, const Coupling& c);
double weight(double r, double s, const Coupling& c);

/// Weight whose momentum is p.
double weight_from_momentum(double p, const Coupling& c);

enum class FieldKind { bulk_fuseau, bulk_spin, bulk_degenerate, boundary };

struct FieldLabel {
    FieldKind kind = FieldKind::bulk_spin;
    int n = 0;

    static FieldLabel fuseau(int n) { return {FieldKind::bulk_fuseau, n}; }
    static FieldLabel spin() { return {FieldKind::bulk_spin, 0}; }
    static FieldLabel degenerate(int n) { return {FieldKind::bulk_degenerate, n}; }
    static FieldLabel boundary(int n) { return {FieldKind::boundary, n}; }

    /// (N/2, 0), (0, 1/2), (1, N) and (N, 1) respectively.
    KacIndex kac() const;
};

/// C^{(1,N)}_{(r1,s1)(r2,s2)} in log scale.
///
/// Throws PoleError naming the offending argument if any Gamma_beta factor
/// sits on a pole. At beta = 1 the sine prefactor vanishes and zero is
/// returned without examining the Gamma_beta factors.
LogValue log_ope_coefficient(int n, KacIndex f1, KacIndex f2, const Coupling& c);
double ope_coefficient(int n, KacIndex f1, KacIndex f2, const Coupling& c);

/// R_(1,N) = sin(2 pi P_(1,N) / beta)
double one_point_amplitude(int n, const Coupling& c);

}  // namespace loopcft
