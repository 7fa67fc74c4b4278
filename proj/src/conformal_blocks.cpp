#include "loopcft/conformal_blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "loopcft/errors.hpp"

namespace loopcft {

namespace {

constexpr double kPi = std::numbers::pi;
const double kLog16 = std::log(16.0);

// Factors smaller than this are treated as identically zero in a residue.
constexpr double kZeroFactor = 1e-12;

double near_scale(double v) { return std::max(1.0, std::fabs(v)); }

// Value at 0 of the polynomial through (k h, f_k), k = 1..n.
double extrapolate_to_zero(const std::vector<double>& f, int n) {
    double acc = 0.0;
    for (int k = 1; k <= n; ++k) {
        double w = 1.0;
        for (int j = 1; j <= n; ++j)
            if (j != k) w *= static_cast<double>(-j) / static_cast<double>(k - j);
        acc += w * f[k - 1];
    }
    return acc;
}

double theta3(double q) {
    double sum = 1.0;
    for (int n = 1;; ++n) {
        const double term = 2.0 * std::pow(q, n * n);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

}  // namespace

std::array<double, 4> BlockQuery::externals() const {
    if (channel == Channel::s) return {external_1, external_2, external_2, external_1};
    return {external_1, external_1, external_2, external_2};
}

double log_sixteen_nome(double x) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("log_sixteen_nome: x must lie in (0, 1)");
    const double k = std::comp_ellint_1(std::sqrt(x));
    const double kp = std::comp_ellint_1(std::sqrt(1.0 - x));
    return kLog16 - kPi * kp / k;
}

BlockEngine::BlockEngine(const Coupling& coupling, std::array<double, 4> externals, int order)
    : coupling_(coupling), externals_(externals), order_(order) {
    if (order < 0) throw DomainError("BlockEngine: negative order");
    const double p11 = momentum(1.0, 1.0, coupling_);
    for (int i = 0; i < 4; ++i) {
        const double p2 = externals_[i] + p11 * p11;
        if (p2 < -1e-14) throw DomainError("BlockEngine: external weight below the momentum-zero weight");
        ext_momenta_[i] = std::sqrt(std::max(0.0, p2));
    }

    for (int m = 1; m <= order_; ++m) {
        for (int n = 1; m * n <= order_; ++n) {
            Node node;
            node.m = m;
            node.n = n;
            node.pole = weight(m, n, coupling_);
            node.shifted = weight(m, -n, coupling_);
            node.residue = residue(m, n);
            node.h.assign(order_ - m * n + 1, 0.0);
            node.h[0] = 1.0;
            nodes_.push_back(std::move(node));
        }
    }

    for (int j = 1; j <= order_; ++j) {
        for (auto& node : nodes_) {
            if (node.m * node.n + j > order_) continue;
            double sum = 0.0;
            for (const auto& other : nodes_) {
                const int mn = other.m * other.n;
                if (mn > j || other.residue == 0.0) continue;
                const double tail = other.h[j - mn];
                if (tail == 0.0) continue;
                const double d = node.shifted - other.pole;
                if (std::fabs(d) < 1e-10 * near_scale(other.pole)) {
                    std::ostringstream os;
                    os.precision(17);
                    os << "BlockEngine: Delta_(" << node.m << ",-" << node.n << ") coincides with the pole Delta_("
                       << other.m << "," << other.n << ") at beta^2 = " << coupling_.beta_sq;
                    throw ResonanceError(os.str());
                }
                sum += other.residue / d * tail;
            }
            node.h[j] = sum;
        }
    }
}

double BlockEngine::residue(int m, int n) const {
    const auto& p = ext_momenta_;
    // p[0..3] are P1..P4
    double log_abs = -std::log(2.0);
    int sign = -1;
    auto mul = [&](double f) {
        if (std::fabs(f) < kZeroFactor) return false;
        log_abs += std::log(std::fabs(f));
        if (f < 0.0) sign = -sign;
        return true;
    };
    for (int r = 1 - m; r <= m - 1; r += 2) {
        for (int s = 1 - n; s <= n - 1; s += 2) {
            const double prs = momentum(r, s, coupling_);
            for (double f : {p[1] + p[0] + prs, p[1] - p[0] + prs, p[2] + p[3] + prs, p[2] - p[3] + prs})
                if (!mul(f)) return 0.0;
        }
    }
    for (int r = 1 - m; r <= m; ++r) {
        for (int s = 1 - n; s <= n; ++s) {
            if ((r == 0 && s == 0) || (r == m && s == n)) continue;
            const double f = 2.0 * momentum(r, s, coupling_);
            if (std::fabs(f) < kZeroFactor) {
                std::ostringstream os;
                os.precision(17);
                os << "BlockEngine: P_(" << r << "," << s << ") vanishes in R_(" << m << "," << n
                   << ") at beta^2 = " << coupling_.beta_sq;
                throw ResonanceError(os.str());
            }
            log_abs -= std::log(std::fabs(f));
            if (f < 0.0) sign = -sign;
        }
    }
    return sign * std::exp(log_abs);
}

bool BlockEngine::residue_vanishes(int m, int n) const {
    const auto& p = ext_momenta_;
    for (int r = 1 - m; r <= m - 1; r += 2) {
        for (int s = 1 - n; s <= n - 1; s += 2) {
            const double prs = momentum(r, s, coupling_);
            for (double f : {p[1] + p[0] + prs, p[1] - p[0] + prs, p[2] + p[3] + prs, p[2] - p[3] + prs})
                if (std::fabs(f) < kZeroFactor) return true;
        }
    }
    return false;
}

bool BlockEngine::on_pole(double p) const {
    const double delta = weight_from_momentum(p, coupling_);
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& node) {
        return std::fabs(delta - node.pole) <= 1e-9 * near_scale(delta);
    });
}

double BlockEngine::nearest_singular_distance(double p) const {
    const double delta = weight_from_momentum(p, coupling_);
    double d = 1.0;
    for (const auto& node : nodes_) {
        if (node.residue == 0.0) continue;
        if (std::fabs(delta - node.pole) <= 1e-9 * near_scale(delta)) continue;
        const double pm = momentum(node.m, node.n, coupling_);
        d = std::min({d, std::fabs(p - pm), std::fabs(p + pm)});
    }
    return d;
}

std::vector<double> BlockEngine::h_coefficients(double p) const {
    const double delta = weight_from_momentum(p, coupling_);
    std::vector<double> h(order_ + 1, 0.0);
    h[0] = 1.0;
    for (const auto& node : nodes_) {
        if (node.residue == 0.0) continue;
        const double d = delta - node.pole;
        if (std::fabs(d) < 1e-13 * near_scale(delta)) {
            std::ostringstream os;
            os.precision(17);
            os << "BlockEngine: internal weight " << delta << " on the pole Delta_(" << node.m << "," << node.n
               << ") with nonzero residue";
            throw PoleError(os.str());
        }
        const double f = node.residue / d;
        const int mn = node.m * node.n;
        for (int k = mn; k <= order_; ++k) h[k] += f * node.h[k - mn];
    }
    return h;
}

std::vector<double> BlockEngine::regularized_h_coefficients(double p) const {
    if (!on_pole(p)) return h_coefficients(p);

    const double step = std::min(1e-4, nearest_singular_distance(p) / 1000.0);
    std::vector<std::vector<double>> samples;
    for (int k = 1; k <= 6; ++k) samples.push_back(h_coefficients(p + k * step));

    // Disagreement is measured in the norm sum_k |h_k| 4^k, which bounds the
    // effect on block values for nomes up to 16 q = 4.
    std::vector<double> out(order_ + 1);
    std::vector<double> f(6);
    double diff = 0.0, norm = 0.0, weight = 1.0;
    for (int i = 0; i <= order_; ++i) {
        for (int k = 0; k < 6; ++k) f[k] = samples[k][i];
        const double e6 = extrapolate_to_zero(f, 6);
        const double e4 = extrapolate_to_zero(f, 4);
        diff += std::fabs(e6 - e4) * weight;
        norm += std::fabs(e6) * weight;
        weight *= 4.0;
        out[i] = e6;
    }
    if (!(diff <= 1e-7 * norm)) {
        std::ostringstream os;
        os.precision(17);
        os << "BlockEngine: degenerate-limit extrapolation unstable at momentum " << p << " (relative disagreement "
           << diff / norm << ")";
        throw RegularizationError(os.str());
    }
    return out;
}

LogValue BlockEngine::log_value(double p, double x, double tolerance) const {
    return log_value(regularized_h_coefficients(p), p, x, tolerance);
}

LogValue BlockEngine::log_value(const std::vector<double>& h, double p, double x, double tolerance) const {
    if (static_cast<int>(h.size()) != order_ + 1) throw DomainError("BlockEngine::log_value: coefficient count mismatch");
    const double delta = weight_from_momentum(p, coupling_);
    const double e = (coupling_.central_charge - 1.0) / 24.0;
    const auto& d = externals_;
    const double sum_ext = d[0] + d[1] + d[2] + d[3];

    const double l16q = log_sixteen_nome(x);
    const double u = std::exp(l16q);

    double big_h = 0.0;
    double upow = 1.0;
    std::vector<double> terms(order_ + 1);
    for (int k = 0; k <= order_; ++k) {
        terms[k] = h[k] * upow;
        big_h += terms[k];
        upow *= u;
    }
    if (order_ >= 2) {
        const double tail = std::fabs(terms[order_]) + std::fabs(terms[order_ - 1]);
        if (!(tail <= tolerance * std::fabs(big_h))) {
            std::ostringstream os;
            os << "block: nome series not converged at x = " << x << " (order " << order_ << ", tail " << tail
               << ", sum " << big_h << ")";
            throw ConvergenceError(os.str());
        }
    }

    const double log_prefactor = (delta - e) * l16q + (e - d[0] - d[1]) * std::log(x) +
                                 (e - d[0] - d[3]) * std::log1p(-x) +
                                 (12.0 * e - 4.0 * sum_ext) * std::log(theta3(u / 16.0));
    LogValue hv = LogValue::from_value(big_h);
    return {log_prefactor + hv.log_abs, hv.sign};
}

PowerSeries BlockEngine::x_series(double p, int length) const {
    if (length < 1 || length - 1 > order_) throw DomainError("BlockEngine::x_series: length exceeds recursion order");
    const auto n = static_cast<std::size_t>(length);
    const auto h = regularized_h_coefficients(p);
    const double delta = weight_from_momentum(p, coupling_);
    const double e = (coupling_.central_charge - 1.0) / 24.0;
    const auto& d = externals_;
    const double sum_ext = d[0] + d[1] + d[2] + d[3];

    // theta-type series in u = 16 q, of length n + 1
    const std::size_t m = n + 1;
    PowerSeries th3(m), s(m);
    th3[0] = 1.0;
    for (std::size_t k = 1; k * k < m; ++k) th3[k * k] = 2.0 * std::pow(16.0, -static_cast<double>(k * k));
    for (std::size_t k = 0; k * (k + 1) < m; ++k) s[k * (k + 1)] = std::pow(16.0, -static_cast<double>(k * (k + 1)));

    // x = u (S/theta3)^4; revert to u(x) by fixed-point iteration u = x / phi(u)
    const PowerSeries psi = (s * th3.inverse()).pow(-4.0);
    const PowerSeries var = PowerSeries::variable(m);
    PowerSeries u = var;
    for (std::size_t it = 0; it < m; ++it) u = var * psi.compose(u);

    PowerSeries u_n(n), u_over_x(n);
    for (std::size_t k = 0; k < n; ++k) {
        u_n[k] = u[k];
        u_over_x[k] = u[k + 1];
    }
    PowerSeries th3_n(n), big_h(n);
    for (std::size_t k = 0; k < n; ++k) {
        th3_n[k] = th3[k];
        big_h[k] = h[k];
    }
    const PowerSeries one_minus_x = PowerSeries::constant(1.0, n) - PowerSeries::variable(n);

    return u_over_x.pow(delta - e) * one_minus_x.pow(e - d[0] - d[3]) *
           th3_n.compose(u_n).pow(12.0 * e - 4.0 * sum_ext) * big_h.compose(u_n);
}

LogValue log_block_value(const BlockQuery& query, double sigma, const BlockOptions& options) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("block_value: sigma must lie in (0, 1)");
    BlockEngine engine(query.coupling, query.externals(), options.order);
    const double x = query.channel == Channel::s ? sigma : 1.0 - sigma;
    return engine.log_value(momentum(query.internal, query.coupling), x, options.tolerance);
}

double block_value(const BlockQuery& query, double sigma, const BlockOptions& options) {
    return log_block_value(query, sigma, options).value();
}

BlockSeries block_series(const BlockQuery& query, int order) {
    BlockEngine engine(query.coupling, query.externals(), std::max(order, 1));
    const PowerSeries s = engine.x_series(momentum(query.internal, query.coupling), order + 1);
    BlockSeries out;
    out.query = query;
    out.truncation_order = order;
    out.coefficients.assign(s.coefficients().begin(), s.coefficients().end());
    return out;
}

namespace {

using Word = std::vector<int>;

// <Delta| L_{w0} L_{w1} ... |Delta> by normal ordering
class VermaMatrixElements {
public:
    VermaMatrixElements(double c, double delta) : c_(c), delta_(delta) {}

    double operator()(const Word& w) {
        int total = 0;
        for (int a : w) total += a;
        if (total != 0) return 0.0;
        if (w.empty()) return 1.0;
        if (auto it = memo_.find(w); it != memo_.end()) return it->second;

        double result = 0.0;
        std::size_t i = 0;
        while (i + 1 < w.size() && !(w[i] >= 0 && w[i + 1] < 0)) ++i;
        if (i + 1 < w.size()) {
            const int a = w[i], b = w[i + 1];
            Word swapped = w;
            std::swap(swapped[i], swapped[i + 1]);
            result = (*this)(swapped);

            Word merged(w.begin(), w.begin() + i);
            merged.push_back(a + b);
            merged.insert(merged.end(), w.begin() + i + 2, w.end());
            result += (a - b) * (*this)(merged);

            if (a + b == 0) {
                Word removed(w.begin(), w.begin() + i);
                removed.insert(removed.end(), w.begin() + i + 2, w.end());
                result += c_ / 12.0 * (static_cast<double>(a) * a * a - a) * (*this)(removed);
            }
        } else if (std::all_of(w.begin(), w.end(), [](int a) { return a == 0; })) {
            result = std::pow(delta_, static_cast<double>(w.size()));
        }
        memo_.emplace(w, result);
        return result;
    }

private:
    double c_, delta_;
    std::map<Word, double> memo_;
};

void partitions(int n, int max_part, Word& current, std::vector<Word>& out) {
    if (n == 0) {
        out.push_back(current);
        return;
    }
    for (int k = std::min(n, max_part); k >= 1; --k) {
        current.push_back(k);
        partitions(n - k, k, current, out);
        current.pop_back();
    }
}

// <Delta_b| ... vertex ... L_{-k1} ... L_{-kn}|Delta> style three-point factor
double rho(const Word& ks, double delta, double da, double db) {
    double acc = 1.0;
    int later = 0;
    for (std::size_t i = ks.size(); i-- > 0;) {
        acc *= delta + ks[i] * da - db + later;
        later += ks[i];
    }
    return acc;
}

}  // namespace

std::vector<double> gram_oracle(double central_charge, std::array<double, 4> d, double internal_weight, int level) {
    if (level < 0 || level > 6) throw DomainError("gram_oracle: level must lie in [0, 6]");
    std::vector<double> out{1.0};
    VermaMatrixElements me(central_charge, internal_weight);
    for (int l = 1; l <= level; ++l) {
        std::vector<Word> basis;
        Word cur;
        partitions(l, l, cur, basis);
        const auto dim = static_cast<Eigen::Index>(basis.size());
        Eigen::MatrixXd gram(dim, dim);
        Eigen::VectorXd left(dim), right(dim);
        for (Eigen::Index a = 0; a < dim; ++a) {
            for (Eigen::Index b = 0; b < dim; ++b) {
                Word w;
                for (auto it = basis[a].rbegin(); it != basis[a].rend(); ++it) w.push_back(*it);
                for (int k : basis[b]) w.push_back(-k);
                gram(a, b) = me(w);
            }
            left(a) = rho(basis[a], internal_weight, d[3], d[2]);
            right(a) = rho(basis[a], internal_weight, d[0], d[1]);
        }
        const Eigen::VectorXd scale = gram.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(scale.asDiagonal() * gram * scale.asDiagonal());
        const auto& sv = svd.singularValues();
        if (sv(dim - 1) <= 1e-12 * sv(0)) {
            std::ostringstream os;
            os << "gram_oracle: Gram matrix singular at level " << l << " for internal weight " << internal_weight;
            throw SingularGramError(os.str());
        }
        out.push_back(left.dot(gram.partialPivLu().solve(right)));
    }
    return out;
}

std::vector<double> gram_oracle(const BlockQuery& query, int level) {
    return gram_oracle(query.coupling.central_charge, query.externals(), weight(query.internal, query.coupling), level);
}

}  // namespace loopcft
