#pragma once

#include <array>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "loopcft/cft_core.hpp"

namespace loopcft {

/// Version of the defaults table; bump whenever a default changes.
inline constexpr const char* kDefaultsVersion = "1";

enum class BcSelection { free, wired, both };
enum class OutputFormat { csv, json };

std::string to_string(BcSelection b);
BcSelection bc_selection_from_string(const std::string& s);
std::string to_string(OutputFormat f);
OutputFormat output_format_from_string(const std::string& s);

struct RunConfig {
    std::vector<double> q_grid{1.0, 1.5, 2.0, 2.5, 3.0};
    BcSelection bc = BcSelection::both;
    std::vector<int> lattice_sizes{5, 7, 9, 11};
    int n_s = 31;
    int n_t = 12;
    int order = 24;
    int rows_per_width = 30;
    std::filesystem::path output_path;  // empty: standard output
    OutputFormat format = OutputFormat::csv;
    int workers = 1;
    std::filesystem::path cache_dir;

    /// q in (0, 4), odd sizes >= 3, positive truncations. Throws DomainError.
    void validate() const;
    std::vector<BoundaryCondition> conditions() const;
};

/// Applies LOOPCFT_Q_GRID, LOOPCFT_BC, LOOPCFT_SIZES, LOOPCFT_NS, LOOPCFT_NT,
/// LOOPCFT_ORDER, LOOPCFT_ROWS_PER_WIDTH, LOOPCFT_OUT, LOOPCFT_FORMAT,
/// LOOPCFT_WORKERS and LOOPCFT_CACHE_DIR when set.
void apply_environment(RunConfig& config);

/// Comma-separated list parsing; throws DomainError on junk.
std::vector<double> parse_real_list(const std::string& s);
std::vector<int> parse_int_list(const std::string& s);

/// Name, value and meaning of every default.
std::vector<std::array<std::string, 3>> defaults_table();

/// Constant term of the least-squares polynomial of the given degree in 1/L.
double extrapolate(const std::vector<int>& sizes, const std::vector<double>& values, int degree);

/// Above this q the lattice estimates carry logarithmic corrections and are only flagged.
inline constexpr double kLogCorrectionQ = 3.5;

struct RatioRow {
    double q = 0.0;
    BoundaryCondition bc = BoundaryCondition::wired;
    std::optional<double> ratio_bootstrap;
    std::optional<double> ratio_closed_form;
    /// ratio_bootstrap * ratio_closed_form
    std::optional<double> closed_form_product;
    std::optional<double> crossing_residual;
    std::map<int, double> ratio_lattice;
    std::optional<double> ratio_extrapolated_deg2;
    std::optional<double> ratio_extrapolated_deg3;
    std::vector<std::string> flags;
    /// |ratio_bootstrap - ratio_closed_form| < 1e-6; wired rows with a bootstrap value only.
    std::optional<bool> closed_form_check;
};

struct RatioReport {
    std::vector<int> lattice_sizes;
    std::vector<RatioRow> rows;

    /// False when any wired closed-form consistency check failed.
    bool checks_pass() const;
};

enum class RatioMode { compare, bootstrap, lattice };

/// A failure inside one work item, reported on standard error.
struct ErrorRecord {
    std::string command;
    std::string kind;
    std::string message;
    std::optional<double> q;
    std::optional<BoundaryCondition> bc;
    std::optional<int> width_l;
};

std::string to_json_line(const ErrorRecord& e);
std::string error_kind(const std::exception& e);

/// Runs the per-q work items on config.workers threads; rows come back
/// ordered by q, then bc (free before wired).
RatioReport run_ratio(const RunConfig& config, RatioMode mode, std::vector<ErrorRecord>& errors);

/// Fixed column order:
/// q,bc,ratio_bootstrap,ratio_closed_form,closed_form_product,crossing_residual,
/// lattice_sizes,ratio_lattice,ratio_extrapolated_deg2,ratio_extrapolated_deg3,
/// closed_form_check,flags
const std::vector<std::string>& csv_columns();
void write_csv(const RatioReport& report, std::ostream& out);
void write_json(const RatioReport& report, std::ostream& out);

/// "%.15g"
std::string format_real(double x);

struct GfunRow {
    double sigma = 0.0;
    double value = 0.0;
};
std::vector<GfunRow> gfun_table(BoundaryCondition bc, double q, const std::vector<double>& sigmas, int n_s = 31,
                                int order = 24);

struct BlocksCheck {
    int queries = 0;
    double worst_generic = 0.0;     // relative, recursion vs Gram, level 6
    double worst_degenerate = 0.0;  // (1,N), N <= 4, vs Richardson-limited Gram
    bool pass = false;
};
/// Fixed-seed randomized queries at this q plus the degenerate (1,N) limits.
BlocksCheck blocks_check(double q, int queries = 20, unsigned seed = 20240611);

struct BruteForceCheck {
    double transfer_matrix = 0.0;
    double enumeration = 0.0;
    std::optional<double> ising;
    double worst_relative = 0.0;
    bool pass = false;
};
/// Mid-column connectivity between rows 0 and rows, transfer matrix vs enumeration
/// (and vs the Ising spin transfer matrix at q = 2).
BruteForceCheck lattice_bruteforce_check(int width_l, int rows, double q, BoundaryCondition bc,
                                         const std::string& topology = "strip");

}  // namespace loopcft
