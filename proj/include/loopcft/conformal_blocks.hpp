#pragma once

#include <array>
#include <vector>

#include "loopcft/cft_core.hpp"
#include "loopcft/power_series.hpp"
#include "loopcft/special_functions.hpp"

namespace loopcft {

enum class Channel { s, t };

/// A four-point block with mirror-pair externals.
///
/// The s-channel block fuses the two distinct fields, external weights
/// (e1, e2, e2, e1) at cross-ratio sigma; the t-channel block fuses each field
/// with its mirror image, external weights (e1, e1, e2, e2) at 1 - sigma.
struct BlockQuery {
    Coupling coupling;
    double external_1 = 0.0;
    double external_2 = 0.0;
    KacIndex internal;
    Channel channel = Channel::s;

    /// External weights (D1, D2, D3, D4) in the order used by the recursion.
    std::array<double, 4> externals() const;
};

struct BlockSeries {
    BlockQuery query;
    int truncation_order = 0;
    /// Coefficients of x^k after the leading power x^{D - D1 - D2} is removed.
    std::vector<double> coefficients;
};

struct BlockOptions {
    int order = 24;
    /// Relative size allowed for the last two terms of the nome series.
    double tolerance = 1e-10;
};

/// Zamolodchikov recursion for one coupling and one set of external weights.
///
/// Construction tabulates the residues R_mn and the values of the regular
/// part at the shifted degenerate weights for all mn <= order. The engine is
/// immutable afterwards and may be shared between threads.
class BlockEngine {
public:
    BlockEngine(const Coupling& coupling, std::array<double, 4> externals, int order = 24);

    int order() const { return order_; }
    const Coupling& coupling() const { return coupling_; }

    /// Coefficients h_k of H = sum_k h_k (16 q)^k for internal momentum p.
    /// Throws PoleError if p sits on a pole with nonzero residue.
    std::vector<double> h_coefficients(double p) const;

    /// As h_coefficients, but at a pole position the value is obtained by
    /// extrapolating from p + k h, k = 1..6, and cross-checked against the
    /// four-point extrapolant. Throws RegularizationError if they disagree.
    std::vector<double> regularized_h_coefficients(double p) const;

    /// Block at cross-ratio x in log scale, internal momentum p.
    LogValue log_value(double p, double x, double tolerance = 1e-10) const;

    /// As log_value, reusing coefficients from regularized_h_coefficients(p).
    LogValue log_value(const std::vector<double>& h, double p, double x, double tolerance = 1e-10) const;

    /// Block divided by its leading power, as a series in x.
    PowerSeries x_series(double p, int length) const;

    /// True when a factor of the numerator of R_mn vanishes, so the pole at
    /// Delta_(m,n) is absent for these external weights. Any m, n >= 1.
    bool residue_vanishes(int m, int n) const;

    /// True when the weight of momentum p coincides with a pole of the truncated recursion.
    bool on_pole(double p) const;

private:
    struct Node {
        int m, n;
        double pole;       // Delta_(m,n)
        double shifted;    // Delta_(m,-n)
        double residue;    // R_mn, exactly 0 when a factor vanishes identically
        std::vector<double> h;  // h_j(Delta_(m,-n)), j = 0..order - mn
    };

    double residue(int m, int n) const;
    double nearest_singular_distance(double p) const;

    Coupling coupling_;
    std::array<double, 4> externals_;
    std::array<double, 4> ext_momenta_;
    int order_;
    std::vector<Node> nodes_;
};

/// log of the nome 16 q(x) and theta_3(q(x)), shared by the block prefactor.
double log_sixteen_nome(double x);

LogValue log_block_value(const BlockQuery& query, double sigma, const BlockOptions& options = {});
double block_value(const BlockQuery& query, double sigma, const BlockOptions& options = {});

BlockSeries block_series(const BlockQuery& query, int order);

/// Block coefficients up to the given level, from the Gram matrix of the
/// Verma module of the internal weight.
/// Throws SingularGramError if the Gram matrix is numerically singular.
std::vector<double> gram_oracle(const BlockQuery& query, int level);
std::vector<double> gram_oracle(double central_charge, std::array<double, 4> externals, double internal_weight, int level);

}  // namespace loopcft
