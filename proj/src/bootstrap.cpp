#include "loopcft/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "loopcft/errors.hpp"

namespace loopcft {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr KacIndex kSpin = KacIndex::twice(0, 1);

std::vector<double> chebyshev_points(int n, double lo, double hi) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * std::cos(kPi * (i + 0.5) / n);
    return out;
}

// Value at 0 of the polynomial through (x_i, f_i).
double lagrange_at_zero(const std::vector<double>& x, const std::vector<double>& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            if (j != i) w *= -x[j] / (x[i] - x[j]);
        acc += w * f[i];
    }
    return acc;
}

// Bulk-channel sum with constants d at cross-ratio sigma.
double bulk_sum(const BlockEngine& engine, const std::map<int, double>& d, double sigma, const Coupling& c,
                double tolerance) {
    double sum = 0.0;
    for (const auto& [n, dn] : d) {
        if (dn == 0.0) continue;
        const double p = momentum(1.0, static_cast<double>(n), c);
        sum += (LogValue::from_value(dn) * engine.log_value(p, sigma, tolerance)).value();
    }
    return sum;
}

}  // namespace

bool near_rational_coupling(const Coupling& c) {
    for (int d = 1; d <= 128; ++d) {
        const double x = c.beta_sq * d;
        if (std::fabs(x - std::round(x)) < 1e-9 * d) return true;
    }
    return false;
}

std::vector<double> evaluate_near_coupling(const Coupling& c, const BootstrapOptions& options,
                                           const std::function<std::vector<double>(const Coupling&)>& fn,
                                           bool* regularized) {
    if (regularized) *regularized = false;
    if (!near_rational_coupling(c)) {
        try {
            return fn(c);
        } catch (const PoleError&) {
        } catch (const ResonanceError&) {
        } catch (const RegularizationError&) {
        }
    }
    if (regularized) *regularized = true;

    const std::vector<int> ks{-3, -2, -1, 1, 2, 3};
    std::vector<std::vector<double>> values;
    for (int k : ks) values.push_back(fn(Coupling::from_beta_sq(c.beta_sq + k * options.coupling_step)));
    const std::size_t dim = values.front().size();
    for (const auto& v : values)
        if (v.size() != dim) throw RegularizationError("evaluate_near_coupling: result size changes with the coupling");

    std::vector<double> x6, x4;
    for (int k : ks) x6.push_back(k * options.coupling_step);
    for (int k : {-2, -1, 1, 2}) x4.push_back(k * options.coupling_step);

    std::vector<double> out(dim);
    double largest = 0.0;
    std::vector<double> e4s(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::vector<double> f6, f4;
        for (std::size_t j = 0; j < ks.size(); ++j) {
            f6.push_back(values[j][i]);
            if (std::abs(ks[j]) <= 2) f4.push_back(values[j][i]);
        }
        out[i] = lagrange_at_zero(x6, f6);
        e4s[i] = lagrange_at_zero(x4, f4);
        largest = std::max(largest, std::fabs(out[i]));
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const double scale = largest;
        if (!(std::fabs(out[i] - e4s[i]) <= options.coupling_tolerance * scale)) {
            std::ostringstream os;
            os.precision(17);
            os << "evaluate_near_coupling: extrapolation to beta^2 = " << c.beta_sq << " unstable in component " << i
               << " (" << e4s[i] << " vs " << out[i] << ")";
            throw RegularizationError(os.str());
        }
    }
    return out;
}

FunctionValue f_function(int k, KacIndex f1, KacIndex f2, double sigma, int n_max, const Coupling& c,
                         const BootstrapOptions& options) {
    if (k != 1 && k != 2) throw DomainError("f_function: k must be 1 or 2");
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("f_function: sigma must lie in (0, 1)");
    FunctionValue out;
    if (n_max < k) return out;

    const double w1 = weight(f1, c), w2 = weight(f2, c);
    BlockEngine engine(c, {w1, w2, w2, w1}, options.order);
    double last = 0.0;
    for (int n = k; n <= n_max; n += 2) {
        const LogValue d = log_ope_coefficient(n, f1, f2, c) * LogValue::from_value(one_point_amplitude(n, c));
        const double p = momentum(1.0, static_cast<double>(n), c);
        last = (d * engine.log_value(p, sigma, options.block_tolerance)).value();
        out.value += last;
    }
    out.tail = out.value == 0.0 ? 0.0 : std::fabs(last / out.value);
    out.truncation_warning = out.tail >= 1e-12;
    return out;
}

std::map<int, double> spin_bulk_constants(BoundaryCondition bc, const Coupling& c, int n_s) {
    std::map<int, double> d;
    for (int n = 1; n <= n_s; ++n) {
        double v = ope_coefficient(n, kSpin, kSpin, c) * one_point_amplitude(n, c);
        if (n % 2 == 0 && bc == BoundaryCondition::free) v = -v;
        d[n] = v;
    }
    return d;
}

double g_connectivity(BoundaryCondition bc, double sigma, const Coupling& c, const BootstrapOptions& options) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("g_connectivity: sigma must lie in (0, 1)");
    auto fn = [&](const Coupling& cc) {
        const double f1 = f_function(1, kSpin, kSpin, sigma, options.n_s, cc, options).value;
        const double f2 = f_function(2, kSpin, kSpin, sigma, options.n_s, cc, options).value;
        return std::vector<double>{bc == BoundaryCondition::wired ? f1 + f2 : f1 - f2};
    };
    return evaluate_near_coupling(c, options, fn).front();
}

CrossingSolution solve_crossing(KacIndex f1, KacIndex f2, const std::map<int, double>& bulk_side,
                                const SpectrumAnsatz& ansatz, const Coupling& c, const BootstrapOptions& options) {
    if (options.samples < 2 * ansatz.n_t) throw DomainError("solve_crossing: need at least 2 n_t sample points");

    CrossingSolution sol;
    sol.sample_points = chebyshev_points(options.samples, options.sigma_lo, options.sigma_hi);
    for (const auto& [n, d] : bulk_side)
        if (n <= ansatz.n_s) sol.bulk_constants[n] = d;

    const double w1 = weight(f1, c), w2 = weight(f2, c);
    const BlockEngine s_engine(c, {w1, w2, w2, w1}, options.order);
    const BlockEngine t_engine(c, {w1, w1, w2, w2}, options.order);

    std::vector<int> fields;
    std::vector<std::vector<double>> h_tables;
    for (int n = 1; n <= ansatz.n_t; ++n) {
        try {
            h_tables.push_back(t_engine.regularized_h_coefficients(momentum(static_cast<double>(n), 1.0, c)));
            fields.push_back(n);
        } catch (const RegularizationError&) {
            sol.excluded.push_back(n);
        } catch (const PoleError&) {
            sol.excluded.push_back(n);
        }
    }

    const auto rows = static_cast<Eigen::Index>(sol.sample_points.size());
    const auto cols = static_cast<Eigen::Index>(fields.size());
    Eigen::VectorXd y(rows);
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double sigma = sol.sample_points[i];
        y(i) = bulk_sum(s_engine, sol.bulk_constants, sigma, c, options.block_tolerance);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double p = momentum(static_cast<double>(fields[j]), 1.0, c);
            a(i, j) = t_engine.log_value(h_tables[j], p, 1.0 - sigma, options.block_tolerance).value();
        }
    }

    for (int n : fields) sol.boundary_constants[n] = 0.0;
    if (y.isZero(0.0) || cols == 0) {
        sol.residual = y.isZero(0.0) ? 0.0 : 1.0;
        sol.solved = y.isZero(0.0);
        return sol;
    }

    const Eigen::VectorXd scale = a.colwise().norm().cwiseMax(1e-300).cwiseInverse();
    const Eigen::MatrixXd scaled = a * scale.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    sol.condition = cond * cond;
    if (!(sol.condition <= options.max_condition)) {
        std::ostringstream os;
        os << "solve_crossing: normal-equation condition number " << sol.condition << " exceeds "
           << options.max_condition;
        throw ConditioningError(os.str());
    }
    const Eigen::VectorXd z = svd.solve(y);
    const Eigen::VectorXd fit = scaled * z;
    for (Eigen::Index j = 0; j < cols; ++j) sol.boundary_constants[fields[j]] = scale(j) * z(j);

    double residual = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double diff = std::fabs(y(i) - fit(i));
        residual = std::max(residual, y(i) == 0.0 ? diff : diff / std::fabs(y(i)));
    }
    sol.residual = residual;
    sol.solved = residual <= options.residual_bound;
    return sol;
}

TwoPointResult two_point_result(BoundaryCondition bc, const Coupling& c, const BootstrapOptions& options) {
    TwoPointResult out;
    out.bc = bc;
    const SpectrumAnsatz ansatz{options.n_s, options.n_t};

    std::vector<int> fields;
    double worst_residual = 0.0, worst_condition = 0.0;

    auto fn = [&](const Coupling& cc) {
        const auto bulk = spin_bulk_constants(bc, cc, options.n_s);
        const auto sol = solve_crossing(kSpin, kSpin, bulk, ansatz, cc, options);
        worst_residual = std::max(worst_residual, sol.residual);
        worst_condition = std::max(worst_condition, sol.condition);

        std::vector<int> present;
        for (const auto& [n, d] : sol.boundary_constants) present.push_back(n);
        if (fields.empty()) fields = present;
        if (present != fields) throw RegularizationError("two_point_result: boundary spectrum changes with the coupling");

        // sigma^{2 Delta} G = lambda + b1 sigma^{a1} + b2 sigma^{a2} + ..., with a1 the lowest
        // exchanged weight above 0 and a2 the next exponent in the expansion.
        const double ds = weight(kSpin, cc);
        std::vector<double> exponents;
        for (const auto& [n, d] : bulk)
            if (n >= 2 && d != 0.0) exponents.push_back(weight(1.0, static_cast<double>(n), cc));
        std::sort(exponents.begin(), exponents.end());
        const double a1 = exponents.at(0);
        const double a2 = std::min({exponents.size() > 1 ? exponents[1] : INFINITY, a1 + 1.0, 2.0});
        const BlockEngine engine(cc, {ds, ds, ds, ds}, options.order);
        Eigen::Matrix3d m;
        Eigen::Vector3d g;
        const double sigmas[3] = {1e-3, 1e-4, 1e-5};
        for (int i = 0; i < 3; ++i) {
            const double s = sigmas[i];
            g(i) = std::pow(s, 2.0 * ds) * bulk_sum(engine, bulk, s, cc, options.block_tolerance);
            m(i, 0) = 1.0;
            m(i, 1) = std::pow(s, a1);
            m(i, 2) = std::pow(s, a2);
        }
        const double lambda_numeric = m.fullPivLu().solve(g)(0);

        std::vector<double> v{bulk.at(1), lambda_numeric};
        for (const auto& [n, d] : sol.boundary_constants) v.push_back(d);
        return v;
    };

    const auto v = evaluate_near_coupling(c, options, fn, &out.regularized);
    out.lambda = v[0];
    out.lambda_numeric = v[1];
    for (std::size_t i = 0; i < fields.size(); ++i) out.boundary_constants[fields[i]] = v[2 + i];
    out.residual = worst_residual;
    out.condition = worst_condition;

    if (!(std::fabs(out.lambda_numeric - out.lambda) <= options.lambda_tolerance * std::fabs(out.lambda))) {
        std::ostringstream os;
        os.precision(17);
        os << "two_point_result: analytic lambda " << out.lambda << " and numerical limit " << out.lambda_numeric
           << " disagree";
        throw InconsistentLimitError(os.str());
    }

    const int leading = bc == BoundaryCondition::wired ? 1 : 3;
    out.boundary_weight = bc == BoundaryCondition::wired ? 0.0 : weight(KacIndex::integer(3, 1), c);
    if (!out.boundary_constants.count(leading)) throw DomainError("two_point_result: leading boundary field not in the ansatz");
    out.mu = out.boundary_constants.at(leading);
    out.ratio = out.lambda / out.mu;
    return out;
}

double ratio_wired_closed_form(const Coupling& c) {
    const double den = std::cos(kPi / (2.0 * c.beta_sq));
    if (std::fabs(den) < 1e-15) throw PoleError("ratio_wired_closed_form: cos(pi / (2 beta^2)) vanishes");
    return -std::sin(kPi * c.beta_sq) / den;
}

double g_fuseau(int n, int m, double sigma, const Coupling& c, const BootstrapOptions& options) {
    if (n < 1 || m < 1) throw DomainError("g_fuseau: N and M must be positive");
    if ((n + m) % 2 != 0) return 0.0;
    const KacIndex a = KacIndex::twice(n, 0), b = KacIndex::twice(m, 0);
    auto fn = [&](const Coupling& cc) {
        return std::vector<double>{f_function(1, a, b, sigma, options.n_s, cc, options).value};
    };
    return evaluate_near_coupling(c, options, fn).front();
}

std::map<int, double> fuseau_bulk_constants(int n, int m, const Coupling& c, int n_s) {
    if (n < 1 || m < 1) throw DomainError("fuseau_bulk_constants: N and M must be positive");
    const KacIndex a = KacIndex::twice(n, 0), b = KacIndex::twice(m, 0);
    const double wa = weight(a, c), wb = weight(b, c);
    const BlockEngine engine(c, {wa, wb, wb, wa}, 1);
    std::map<int, double> d;
    for (int k = 1; k <= n_s; k += 2) {
        if (!engine.residue_vanishes(1, k)) continue;
        d[k] = ope_coefficient(k, a, b, c) * one_point_amplitude(k, c);
    }
    return d;
}

}  // namespace loopcft
