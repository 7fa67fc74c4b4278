#include "loopcft/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <typeinfo>

#include <Eigen/Dense>

#include "json.hpp"
#include "loopcft/bootstrap.hpp"
#include "loopcft/conformal_blocks.hpp"
#include "loopcft/errors.hpp"
#include "loopcft/fk_lattice.hpp"

namespace loopcft {

namespace {

constexpr double kClosedFormTolerance = 1e-6;
constexpr double kGramTolerance = 1e-11;
constexpr double kDegenerateTolerance = 1e-8;
constexpr double kBruteForceTolerance = 1e-10;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        if constexpr (std::is_same_v<T, double>)
            out += format_real(xs[i]);
        else if constexpr (std::is_same_v<T, std::string>)
            out += xs[i];
        else
            out += std::to_string(xs[i]);
    }
    return out;
}

std::string opt_real(const std::optional<double>& x) { return x ? format_real(*x) : std::string{}; }

nlohmann::json json_real(const std::optional<double>& x) {
    if (!x || !std::isfinite(*x)) return nullptr;
    return std::stod(format_real(*x));
}

std::optional<double> finite_or_none(double x) {
    if (!std::isfinite(x)) return std::nullopt;
    return x;
}

}  // namespace

std::string to_string(BcSelection b) {
    switch (b) {
        case BcSelection::free: return "free";
        case BcSelection::wired: return "wired";
        case BcSelection::both: return "both";
    }
    return "both";
}

BcSelection bc_selection_from_string(const std::string& s) {
    if (s == "free") return BcSelection::free;
    if (s == "wired") return BcSelection::wired;
    if (s == "both") return BcSelection::both;
    throw DomainError("unknown boundary condition selection '" + s + "'");
}

std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

OutputFormat output_format_from_string(const std::string& s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json") return OutputFormat::json;
    throw DomainError("unknown output format '" + s + "'");
}

void RunConfig::validate() const {
    for (double q : q_grid)
        if (!(q > 0.0 && q < 4.0)) throw DomainError("q = " + format_real(q) + " outside (0, 4)");
    for (int l : lattice_sizes)
        if (l < 3 || l % 2 == 0) throw DomainError("lattice size " + std::to_string(l) + " is not an odd integer >= 3");
    if (n_s < 1 || n_t < 1 || order < 1) throw DomainError("truncations must be positive");
    if (rows_per_width < 1) throw DomainError("rows per width must be positive");
    if (workers < 1) throw DomainError("workers must be positive");
}

std::vector<BoundaryCondition> RunConfig::conditions() const {
    switch (bc) {
        case BcSelection::free: return {BoundaryCondition::free};
        case BcSelection::wired: return {BoundaryCondition::wired};
        case BcSelection::both: break;
    }
    return {BoundaryCondition::free, BoundaryCondition::wired};
}

std::vector<double> parse_real_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split(s)) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw DomainError("not a number: '" + item + "'");
        out.push_back(x);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split(s)) {
        std::size_t used = 0;
        int x = 0;
        try {
            x = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw DomainError("not an integer: '" + item + "'");
        out.push_back(x);
    }
    return out;
}

void apply_environment(RunConfig& config) {
    auto get = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v) return std::nullopt;
        return std::string(v);
    };
    auto integer = [](const std::string& name, const std::string& v) {
        const auto xs = parse_int_list(v);
        if (xs.size() != 1) throw DomainError(name + ": expected one integer");
        return xs.front();
    };
    if (auto v = get("LOOPCFT_Q_GRID")) config.q_grid = parse_real_list(*v);
    if (auto v = get("LOOPCFT_BC")) config.bc = bc_selection_from_string(*v);
    if (auto v = get("LOOPCFT_SIZES")) config.lattice_sizes = parse_int_list(*v);
    if (auto v = get("LOOPCFT_NS")) config.n_s = integer("LOOPCFT_NS", *v);
    if (auto v = get("LOOPCFT_NT")) config.n_t = integer("LOOPCFT_NT", *v);
    if (auto v = get("LOOPCFT_ORDER")) config.order = integer("LOOPCFT_ORDER", *v);
    if (auto v = get("LOOPCFT_ROWS_PER_WIDTH")) config.rows_per_width = integer("LOOPCFT_ROWS_PER_WIDTH", *v);
    if (auto v = get("LOOPCFT_OUT")) config.output_path = *v;
    if (auto v = get("LOOPCFT_FORMAT")) config.format = output_format_from_string(*v);
    if (auto v = get("LOOPCFT_WORKERS")) config.workers = integer("LOOPCFT_WORKERS", *v);
    if (auto v = get("LOOPCFT_CACHE_DIR")) config.cache_dir = *v;
}

std::vector<std::array<std::string, 3>> defaults_table() {
    const RunConfig r;
    const BootstrapOptions b;
    const CorrelatorOptions c;
    return {
        {"defaults_version", kDefaultsVersion, "version of this table"},
        {"q_grid", join(r.q_grid, ","), "values of Q for ratio commands"},
        {"bc", to_string(r.bc), "boundary conditions for ratio commands"},
        {"lattice_sizes", join(r.lattice_sizes, ","), "strip and cylinder widths L"},
        {"n_s", std::to_string(b.n_s), "s-channel fields (1,N), N <= n_s"},
        {"n_t", std::to_string(b.n_t), "t-channel fields (N,1), N <= n_t"},
        {"order", std::to_string(b.order), "block recursion order"},
        {"block_tolerance", format_real(b.block_tolerance), "nome series tail tolerance"},
        {"samples", std::to_string(b.samples), "Chebyshev sample points for crossing"},
        {"sigma_range", format_real(b.sigma_lo) + "," + format_real(b.sigma_hi), "crossing sample interval"},
        {"max_condition", format_real(b.max_condition), "crossing least-squares condition guard"},
        {"residual_bound", format_real(b.residual_bound), "crossing residual guard"},
        {"coupling_step", format_real(b.coupling_step), "beta^2 step for rational-coupling extrapolation"},
        {"coupling_tolerance", format_real(b.coupling_tolerance), "agreement of the two extrapolants"},
        {"lambda_tolerance", format_real(b.lambda_tolerance), "analytic vs numerical lambda"},
        {"rows_per_width", std::to_string(r.rows_per_width), "correlator window rows per unit width"},
        {"eigen_tolerance", format_real(c.eigen_tolerance), "power iteration tolerance"},
        {"max_iterations", std::to_string(c.max_iterations), "power iteration cap"},
        {"max_width", std::to_string(kMaxWidth), "largest lattice width"},
        {"closed_form_tolerance", format_real(kClosedFormTolerance), "wired |ratio - closed form| check"},
        {"log_correction_q", format_real(kLogCorrectionQ), "lattice rows above this q are flagged"},
        {"workers", std::to_string(r.workers), "worker threads for per-q work items"},
        {"format", to_string(r.format), "report format"},
    };
}

double extrapolate(const std::vector<int>& sizes, const std::vector<double>& values, int degree) {
    if (degree < 0) throw DomainError("extrapolate: negative degree");
    if (sizes.size() != values.size()) throw DomainError("extrapolate: sizes and values differ in length");
    if (static_cast<int>(sizes.size()) < degree + 1)
        throw DegenerateFitError("extrapolate: " + std::to_string(sizes.size()) + " points for degree " +
                                 std::to_string(degree));
    if (std::set<int>(sizes.begin(), sizes.end()).size() != sizes.size())
        throw DegenerateFitError("extrapolate: repeated sizes");
    for (int l : sizes)
        if (l <= 0) throw DomainError("extrapolate: sizes must be positive");

    const int n = static_cast<int>(sizes.size());
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double x = 1.0 / sizes[i];
        double p = 1.0;
        for (int k = 0; k <= degree; ++k, p *= x) a(i, k) = p;
        b(i) = values[i];
    }
    return a.colPivHouseholderQr().solve(b)(0);
}

bool RatioReport::checks_pass() const {
    for (const auto& r : rows)
        if (r.closed_form_check && !*r.closed_form_check) return false;
    return true;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const DegenerateFitError*>(&e)) return "DegenerateFitError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    if (dynamic_cast<const PoleError*>(&e)) return "PoleError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const RegularizationError*>(&e)) return "RegularizationError";
    if (dynamic_cast<const ResonanceError*>(&e)) return "ResonanceError";
    if (dynamic_cast<const SingularGramError*>(&e)) return "SingularGramError";
    if (dynamic_cast<const InconsistentLimitError*>(&e)) return "InconsistentLimitError";
    if (dynamic_cast<const ConditioningError*>(&e)) return "ConditioningError";
    if (dynamic_cast<const CapacityError*>(&e)) return "CapacityError";
    return "Error";
}

std::string to_json_line(const ErrorRecord& e) {
    nlohmann::json j;
    j["level"] = "error";
    j["command"] = e.command;
    j["kind"] = e.kind;
    j["message"] = e.message;
    if (e.q) j["q"] = *e.q;
    if (e.bc) j["bc"] = to_string(*e.bc);
    if (e.width_l) j["L"] = *e.width_l;
    return j.dump();
}

namespace {

std::string mode_name(RatioMode m) {
    switch (m) {
        case RatioMode::compare: return "ratio compare";
        case RatioMode::bootstrap: return "ratio bootstrap";
        case RatioMode::lattice: return "ratio lattice";
    }
    return "ratio";
}

RatioRow compute_row(const RunConfig& config, RatioMode mode, double q, BoundaryCondition bc,
                     std::vector<ErrorRecord>& errors) {
    RatioRow row;
    row.q = q;
    row.bc = bc;
    auto record = [&](const std::exception& e, std::optional<int> l = std::nullopt) {
        errors.push_back({mode_name(mode), error_kind(e), e.what(), q, bc, l});
    };
    const auto c = Coupling::from_q(q);

    if (mode != RatioMode::lattice) {
        BootstrapOptions opts;
        opts.n_s = config.n_s;
        opts.n_t = config.n_t;
        opts.order = config.order;
        try {
            const auto r = two_point_result(bc, c, opts);
            row.ratio_bootstrap = r.ratio;
            row.crossing_residual = r.residual;
            if (r.regularized) row.flags.push_back("regularized");
        } catch (const Error& e) {
            record(e);
            row.flags.push_back("bootstrap_failed");
        }
        if (bc == BoundaryCondition::wired) {
            try {
                row.ratio_closed_form = ratio_wired_closed_form(c);
            } catch (const Error& e) {
                record(e);
                row.flags.push_back("closed_form_failed");
            }
            if (row.ratio_bootstrap && row.ratio_closed_form) {
                row.closed_form_product = *row.ratio_bootstrap * *row.ratio_closed_form;
                row.closed_form_check = std::fabs(*row.ratio_bootstrap - *row.ratio_closed_form) < kClosedFormTolerance;
            } else {
                row.closed_form_check = false;
            }
        }
    }

    if (mode != RatioMode::bootstrap) {
        LatticeOptions opts;
        opts.rows_per_width = config.rows_per_width;
        opts.correlator.cache_dir = config.cache_dir;
        std::vector<int> sizes;
        std::vector<double> values;
        for (int l : config.lattice_sizes) {
            try {
                const auto r = lattice_ratio(l, q, bc, opts);
                row.ratio_lattice[l] = r.ratio;
                sizes.push_back(l);
                values.push_back(r.ratio);
            } catch (const Error& e) {
                record(e, l);
                row.flags.push_back("lattice_failed_L" + std::to_string(l));
            }
        }
        if (sizes.size() >= 3) row.ratio_extrapolated_deg2 = finite_or_none(extrapolate(sizes, values, 2));
        if (sizes.size() >= 4) row.ratio_extrapolated_deg3 = finite_or_none(extrapolate(sizes, values, 3));
        if (q > kLogCorrectionQ) row.flags.push_back("convergence_warning_log_corrections");
    }
    return row;
}

}  // namespace

RatioReport run_ratio(const RunConfig& config, RatioMode mode, std::vector<ErrorRecord>& errors) {
    config.validate();
    std::vector<double> qs = config.q_grid;
    std::sort(qs.begin(), qs.end());
    const auto bcs = config.conditions();

    struct Item {
        double q;
        BoundaryCondition bc;
    };
    std::vector<Item> items;
    for (double q : qs)
        for (auto bc : bcs) items.push_back({q, bc});

    RatioReport report;
    report.lattice_sizes = config.lattice_sizes;
    report.rows.resize(items.size());
    std::vector<std::vector<ErrorRecord>> item_errors(items.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++)
            report.rows[i] = compute_row(config, mode, items[i].q, items[i].bc, item_errors[i]);
    };
    const int n = std::min<int>(config.workers, std::max<std::size_t>(items.size(), 1));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    for (auto& e : item_errors) errors.insert(errors.end(), e.begin(), e.end());
    return report;
}

std::string format_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{"q",
                                               "bc",
                                               "ratio_bootstrap",
                                               "ratio_closed_form",
                                               "closed_form_product",
                                               "crossing_residual",
                                               "lattice_sizes",
                                               "ratio_lattice",
                                               "ratio_extrapolated_deg2",
                                               "ratio_extrapolated_deg3",
                                               "closed_form_check",
                                               "flags"};
    return cols;
}

void write_csv(const RatioReport& report, std::ostream& out) {
    out << join(csv_columns(), ",") << '\n';
    for (const auto& r : report.rows) {
        std::vector<int> sizes;
        std::vector<double> values;
        for (const auto& [l, v] : r.ratio_lattice) {
            sizes.push_back(l);
            values.push_back(v);
        }
        out << format_real(r.q) << ',' << to_string(r.bc) << ',' << opt_real(r.ratio_bootstrap) << ','
            << opt_real(r.ratio_closed_form) << ',' << opt_real(r.closed_form_product) << ','
            << opt_real(r.crossing_residual) << ',' << join(sizes, ";") << ',' << join(values, ";") << ','
            << opt_real(r.ratio_extrapolated_deg2) << ',' << opt_real(r.ratio_extrapolated_deg3) << ','
            << (r.closed_form_check ? (*r.closed_form_check ? "pass" : "fail") : "") << ',' << join(r.flags, ";")
            << '\n';
    }
}

void write_json(const RatioReport& report, std::ostream& out) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json j;
        j["q"] = json_real(r.q);
        j["bc"] = to_string(r.bc);
        j["ratio_bootstrap"] = json_real(r.ratio_bootstrap);
        j["ratio_closed_form"] = json_real(r.ratio_closed_form);
        j["closed_form_product"] = json_real(r.closed_form_product);
        j["crossing_residual"] = json_real(r.crossing_residual);
        nlohmann::json lat = nlohmann::json::object();
        for (const auto& [l, v] : r.ratio_lattice) lat[std::to_string(l)] = json_real(v);
        j["ratio_lattice"] = lat;
        j["ratio_extrapolated_deg2"] = json_real(r.ratio_extrapolated_deg2);
        j["ratio_extrapolated_deg3"] = json_real(r.ratio_extrapolated_deg3);
        j["closed_form_check"] = r.closed_form_check ? nlohmann::json(*r.closed_form_check) : nlohmann::json(nullptr);
        j["flags"] = r.flags;
        rows.push_back(j);
    }
    out << rows.dump(2) << '\n';
}

std::vector<GfunRow> gfun_table(BoundaryCondition bc, double q, const std::vector<double>& sigmas, int n_s, int order) {
    const auto c = Coupling::from_q(q);
    BootstrapOptions opts;
    opts.n_s = n_s;
    opts.order = order;
    std::vector<GfunRow> out;
    for (double s : sigmas) out.push_back({s, g_connectivity(bc, s, c, opts)});
    return out;
}

BlocksCheck blocks_check(double q, int queries, unsigned seed) {
    const auto c = Coupling::from_q(q);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ext(0.05, 1.5), internal(0.1, 3.0);
    const double p11 = momentum(1.0, 1.0, c);
    auto rel = [](double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); };

    BlocksCheck out;
    for (int i = 0; i < queries; ++i) {
        const BlockQuery query{c, ext(rng), ext(rng), KacIndex{}, Channel::s};
        const double delta = internal(rng);
        const auto externals = query.externals();
        BlockEngine engine(c, externals, 8);
        const auto series = engine.x_series(std::sqrt(delta + p11 * p11), 7);
        const auto gram = gram_oracle(c.central_charge, externals, delta, 6);
        for (int k = 0; k <= 6; ++k) out.worst_generic = std::max(out.worst_generic, rel(series[k], gram[k]));
        ++out.queries;
    }

    const double ds = weight(KacIndex::twice(0, 1), c);
    const std::array<double, 4> spin{ds, ds, ds, ds};
    for (int n = 1; n <= 4; ++n) {
        const BlockQuery query{c, ds, ds, KacIndex::integer(1, n), Channel::s};
        const auto series = block_series(query, 6);
        const double delta = weight(query.internal, c);
        const auto g1 = gram_oracle(c.central_charge, spin, delta + 1e-4, 6);
        const auto g2 = gram_oracle(c.central_charge, spin, delta + 1e-5, 6);
        for (int k = 0; k <= 6; ++k) {
            const double limit = g2[k] + (g2[k] - g1[k]) * 1e-5 / (1e-4 - 1e-5);
            out.worst_degenerate =
                std::max(out.worst_degenerate, std::fabs(series.coefficients[k] - limit) / std::max(1.0, std::fabs(limit)));
        }
    }
    out.pass = out.worst_generic < kGramTolerance && out.worst_degenerate < kDegenerateTolerance;
    return out;
}

BruteForceCheck lattice_bruteforce_check(int width_l, int rows, double q, BoundaryCondition bc, const std::string& topology) {
    const auto g = Geometry::critical(width_l, topology_from_string(topology), bc, q);
    const Site a{0, g.middle_column()}, b{rows, g.middle_column()};
    BruteForceCheck out;
    out.transfer_matrix = connectivity(g, rows, a, b);
    out.enumeration = brute_force_oracle(g, rows, a, b).connectivity;
    auto rel = [](double x, double y) { return std::fabs(x - y) / std::max(std::fabs(y), 1e-300); };
    out.worst_relative = rel(out.transfer_matrix, out.enumeration);
    if (q == 2.0) {
        out.ising = ising_spin_correlator(g, rows, a, b);
        out.worst_relative = std::max(out.worst_relative, rel(out.transfer_matrix, *out.ising));
    }
    out.pass = out.worst_relative < kBruteForceTolerance;
    return out;
}

}  // namespace loopcft
