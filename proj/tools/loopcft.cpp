// loopcft: bootstrap and transfer-matrix amplitude ratios of critical loop models.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "loopcft/bootstrap.hpp"
#include "loopcft/cli.hpp"
#include "loopcft/errors.hpp"

using namespace loopcft;

namespace {

void report_error(const std::string& command, const std::exception& e) {
    std::cerr << to_json_line({command, error_kind(e), e.what(), {}, {}, {}}) << '\n';
}

int write_report(const RatioReport& report, const RunConfig& config) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!config.output_path.empty()) {
        file.open(config.output_path);
        if (!file) throw DomainError("cannot open " + config.output_path.string());
        out = &file;
    }
    if (config.format == OutputFormat::csv)
        write_csv(report, *out);
    else
        write_json(report, *out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Amplitude ratios of the critical Potts / loop model: bootstrap and transfer matrix"};
    app.require_subcommand(1);

    RunConfig config;
    std::string command;
    try {
        apply_environment(config);
    } catch (const std::exception& e) {
        report_error("environment", e);
        return 2;
    }

    std::string q_grid, sizes, bc = to_string(config.bc), format = to_string(config.format), out_path;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--q-grid", q_grid, "comma-separated values of Q in (0,4)");
        sub->add_option("--q", q_grid, "single Q (same as --q-grid with one value)");
        sub->add_option("--bc", bc, "free, wired or both")->check(CLI::IsMember({"free", "wired", "both"}));
        sub->add_option("--sizes", sizes, "comma-separated odd widths L");
        sub->add_option("--ns", config.n_s, "s-channel truncation");
        sub->add_option("--nt", config.n_t, "t-channel truncation");
        sub->add_option("--order", config.order, "block recursion order");
        sub->add_option("--out", out_path, "output file (default: standard output)");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--workers", config.workers, "worker threads");
    };

    auto* ratio = app.add_subcommand("ratio", "universal ratio lambda/mu");
    ratio->require_subcommand(1);
    auto* compare = ratio->add_subcommand("compare", "bootstrap and lattice ratios with extrapolation");
    auto* boot = ratio->add_subcommand("bootstrap", "bootstrap ratios only");
    auto* lattice = ratio->add_subcommand("lattice", "lattice ratios only");
    for (auto* s : {compare, boot, lattice}) add_run_flags(s);

    double gq = 2.0;
    std::string gbc = "wired", sigmas = "0.5";
    auto* gfun = app.add_subcommand("gfun", "G(sigma) table");
    gfun->add_option("--q", gq, "Q");
    gfun->add_option("--bc", gbc, "free or wired")->check(CLI::IsMember({"free", "wired"}));
    gfun->add_option("--sigma", sigmas, "comma-separated cross-ratios");
    gfun->add_option("--ns", config.n_s, "s-channel truncation");
    gfun->add_option("--order", config.order, "block recursion order");

    double bq = 2.5;
    auto* blocks = app.add_subcommand("blocks-check", "block recursion against the Gram-matrix oracle");
    blocks->add_option("--q", bq, "Q");

    int bl = 3, brows = 2;
    double bfq = 2.0;
    std::string bfbc = "free", topo = "strip";
    auto* brute = app.add_subcommand("lattice-bruteforce", "transfer matrix against edge-subset enumeration");
    brute->add_option("--L", bl, "width");
    brute->add_option("--rows", brows, "distance between the two points");
    brute->add_option("--q", bfq, "Q");
    brute->add_option("--bc", bfbc, "free or wired")->check(CLI::IsMember({"free", "wired"}));
    brute->add_option("--topology", topo, "strip or cylinder")->check(CLI::IsMember({"strip", "cylinder"}));

    auto* show = app.add_subcommand("show-config", "print the defaults table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (show->parsed()) {
            command = "show-config";
            std::cout << "name,value,meaning\n";
            for (const auto& [name, value, meaning] : defaults_table())
                std::cout << name << ",\"" << value << "\"," << meaning << '\n';
            return 0;
        }
        if (gfun->parsed()) {
            command = "gfun";
            std::cout << "sigma,g\n";
            for (const auto& r : gfun_table(boundary_condition_from_string(gbc), gq, parse_real_list(sigmas), config.n_s,
                                            config.order))
                std::cout << format_real(r.sigma) << ',' << format_real(r.value) << '\n';
            return 0;
        }
        if (blocks->parsed()) {
            command = "blocks-check";
            const auto r = blocks_check(bq);
            std::cout << "queries,worst_generic,worst_degenerate,result\n"
                      << r.queries << ',' << format_real(r.worst_generic) << ',' << format_real(r.worst_degenerate)
                      << ',' << (r.pass ? "pass" : "fail") << '\n';
            return r.pass ? 0 : 1;
        }
        if (brute->parsed()) {
            command = "lattice-bruteforce";
            const auto r = lattice_bruteforce_check(bl, brows, bfq, boundary_condition_from_string(bfbc), topo);
            std::cout << "transfer_matrix,enumeration,ising,worst_relative,result\n"
                      << format_real(r.transfer_matrix) << ',' << format_real(r.enumeration) << ','
                      << (r.ising ? format_real(*r.ising) : "") << ',' << format_real(r.worst_relative) << ','
                      << (r.pass ? "pass" : "fail") << '\n';
            return r.pass ? 0 : 1;
        }

        RatioMode mode = RatioMode::compare;
        command = "ratio compare";
        if (boot->parsed()) mode = RatioMode::bootstrap, command = "ratio bootstrap";
        if (lattice->parsed()) mode = RatioMode::lattice, command = "ratio lattice";
        for (auto* s : {compare, boot, lattice}) {
            if (!s->parsed()) continue;
            if (s->count("--q-grid") || s->count("--q")) config.q_grid = parse_real_list(q_grid);
            if (s->count("--sizes")) config.lattice_sizes = parse_int_list(sizes);
            if (s->count("--bc")) config.bc = bc_selection_from_string(bc);
            if (s->count("--format")) config.format = output_format_from_string(format);
            if (s->count("--out")) config.output_path = out_path;
        }

        std::vector<ErrorRecord> errors;
        const auto report = run_ratio(config, mode, errors);
        for (const auto& e : errors) std::cerr << to_json_line(e) << '\n';
        for (const auto& r : report.rows) {
            if (r.closed_form_check && !*r.closed_form_check)
                std::cerr << to_json_line({command, "ClosedFormMismatch",
                                           "|ratio_bootstrap - ratio_closed_form| >= 1e-6; ratio * closed form = " +
                                               (r.closed_form_product ? format_real(*r.closed_form_product) : "n/a"),
                                           r.q, r.bc, {}})
                          << '\n';
        }
        write_report(report, config);
        return errors.empty() && report.checks_pass() ? 0 : 1;
    } catch (const std::exception& e) {
        report_error(command.empty() ? "loopcft" : command, e);
        return 2;
    }
}
