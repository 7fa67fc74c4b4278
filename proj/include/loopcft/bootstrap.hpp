#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "loopcft/cft_core.hpp"
#include "loopcft/conformal_blocks.hpp"

namespace loopcft {

struct BootstrapOptions {
    int n_s = 31;
    int n_t = 12;
    int order = 24;
    double block_tolerance = 1e-10;
    int samples = 40;
    double sigma_lo = 0.1;
    double sigma_hi = 0.9;
    /// Bound on the condition number of the column-scaled normal equations.
    double max_condition = 1e12;
    double residual_bound = 1e-6;
    /// Step in beta^2 for evaluations around rational couplings.
    double coupling_step = 1.0 / 1024.0;
    /// Relative agreement required between the 4- and 6-point coupling extrapolants.
    double coupling_tolerance = 1e-7;
    /// Relative agreement required between the analytic and numerical lambda.
    double lambda_tolerance = 1e-6;
};

/// Exchanged fields: (1,N) for N = 1..n_s in the bulk channel and (N,1) for
/// N = 1..n_t in the boundary channel. Boundary fields whose block has a pole
/// with nonzero residue at the working coupling are dropped by the solver.
struct SpectrumAnsatz {
    int n_s = 31;
    int n_t = 12;
};

struct FunctionValue {
    double value = 0.0;
    /// Ratio |last included term| / |sum|.
    double tail = 0.0;
    bool truncation_warning = false;
};

/// F^{(k)}_{f1 f2}(sigma): sum over N = k, k+2, ... <= n_max of C R times the
/// bulk-channel block with internal (1,N).
FunctionValue f_function(int k, KacIndex f1, KacIndex f2, double sigma, int n_max, const Coupling& c,
                         const BootstrapOptions& options = {});

/// Two-point connectivity G = F1 + F2 (wired) or F1 - F2 (free) for the spin field.
///
/// The wired solution is the one whose boundary channel starts with the
/// identity; with C and R as given this is the sum. At rational beta^2 the
/// value is obtained by extrapolation in the coupling.
double g_connectivity(BoundaryCondition bc, double sigma, const Coupling& c, const BootstrapOptions& options = {});

struct CrossingSolution {
    std::map<int, double> bulk_constants;      // N -> D^bulk_(1,N)
    std::map<int, double> boundary_constants;  // N -> D^bdy_(N,1)
    std::vector<int> excluded;                 // boundary fields with a genuine block pole
    double residual = 0.0;
    double condition = 0.0;
    bool solved = false;
    std::vector<double> sample_points;
};

/// Least-squares solution of the crossing equation for the boundary constants.
/// Throws ConditioningError if the normal equations are too ill-conditioned.
CrossingSolution solve_crossing(KacIndex f1, KacIndex f2, const std::map<int, double>& bulk_side,
                                const SpectrumAnsatz& ansatz, const Coupling& c, const BootstrapOptions& options = {});

/// Bulk constants of the spin connectivity: C R, with the sign of the even-N terms set by bc.
std::map<int, double> spin_bulk_constants(BoundaryCondition bc, const Coupling& c, int n_s);

struct TwoPointResult {
    BoundaryCondition bc = BoundaryCondition::wired;
    double lambda = 0.0;
    double lambda_numeric = 0.0;
    double mu = 0.0;
    double ratio = 0.0;
    double boundary_weight = 0.0;
    double residual = 0.0;
    double condition = 0.0;
    bool regularized = false;
    std::map<int, double> boundary_constants;
};

/// lambda = lim sigma^{2 Delta} G, mu = lim (1 - sigma)^{2 Delta - Delta_b} G, ratio = lambda / mu.
TwoPointResult two_point_result(BoundaryCondition bc, const Coupling& c, const BootstrapOptions& options = {});

/// -sin(pi beta^2) / cos(pi / (2 beta^2)); throws PoleError where the cosine vanishes.
double ratio_wired_closed_form(const Coupling& c);

/// F^{(1)}_{(N/2,0)(M/2,0)}(sigma); exactly 0 when N + M is odd.
double g_fuseau(int n, int m, double sigma, const Coupling& c, const BootstrapOptions& options = {});

/// C R for the odd-N bulk fields (1,N) of the pair ((n/2,0), (m/2,0)) whose
/// bulk-channel block exists at this coupling. Fields whose block has a pole
/// with nonzero residue cannot appear and are left out, so the map is empty
/// when n + m is odd. Meant for generic (irrational) beta^2.
std::map<int, double> fuseau_bulk_constants(int n, int m, const Coupling& c, int n_s);

/// True when beta^2 lies within 1e-9 of a rational with denominator at most 128.
bool near_rational_coupling(const Coupling& c);

/// Evaluate fn at the coupling, or, if that coupling is rational or fn hits a
/// pole or resonance there, at beta^2 + k step (k = +-1, +-2, +-3) and
/// extrapolate each component polynomially. Throws RegularizationError if the
/// 4- and 6-point extrapolants disagree.
std::vector<double> evaluate_near_coupling(const Coupling& c, const BootstrapOptions& options,
                                           const std::function<std::vector<double>(const Coupling&)>& fn,
                                           bool* regularized = nullptr);

}  // namespace loopcft
