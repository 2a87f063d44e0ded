// Command-line front end. Exit codes: 0 ok, 2 configuration or usage error,
// 3 numerical failure.
#include "ethlab/config.hpp"
#include "ethlab/errors.hpp"
#include "ethlab/experiment.hpp"
#include "ethlab/manifest.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string cache;
    bool no_cache = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
    sub->add_option("--config", c.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    if (needs_out) sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "overrides dynamics.seed");
    sub->add_option("--workers", c.workers, "parallel tasks")->check(CLI::PositiveNumber);
    sub->add_option("--cache", c.cache, "eigendecomposition cache directory");
    sub->add_flag("--no-cache", c.no_cache, "keep decompositions in memory only");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ethlab: qubit coupled to a nonintegrable spin chain"};
    app.set_version_flag("--version", ethlab::code_version());
    app.require_subcommand(1);

    Common c;
    std::optional<double> lambda;
    std::string run_dir;

    auto* spectrum = app.add_subcommand("spectrum", "level spacing statistics of the environment");
    add_common(spectrum, c);
    auto* eth = app.add_subcommand("eth-check", "matrix elements of local observables in the environment eigenbasis");
    add_common(eth, c);
    auto* evolve = app.add_subcommand("evolve", "one trajectory and its steady state");
    add_common(evolve, c);
    evolve->add_option("--lambda", lambda, "coupling strength, overrides coupling.lambda");
    auto* sweep = app.add_subcommand("sweep", "steady states over the lambda grid, with crossover tables");
    add_common(sweep, c);
    auto* width = app.add_subcommand("ef-width", "eigenfunction widths over the grid");
    add_common(width, c);
    auto* report = app.add_subcommand("report", "summarize finished runs");
    report->add_option("run_dir", run_dir, "directory holding one or more runs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (report->parsed()) {
            const auto r = ethlab::cmd_report(run_dir);
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << r.table;
            return 0;
        }
        const auto cfg = ethlab::load_config(c.config);
        std::optional<std::filesystem::path> cache_root;
        if (!c.no_cache) cache_root = c.cache.empty() ? ethlab::EigenCache::default_root() : std::filesystem::path(c.cache);
        ethlab::Workspace ws(cache_root);
        ethlab::CommandOptions opt{c.out, c.seed, c.workers, lambda};

        if (spectrum->parsed()) {
            ethlab::cmd_spectrum(cfg, opt, ws);
        } else if (eth->parsed()) {
            ethlab::cmd_eth_check(cfg, opt, ws);
        } else if (evolve->parsed()) {
            const auto r = ethlab::cmd_evolve(cfg, opt, ws);
            const auto& p = r.prediction;
            std::cout << "lambda " << p.lambda << "  |rho12| " << std::abs(p.rho12_measured) << " (" << p.measured_source
                      << ")  tls " << std::abs(p.rho12_tls) << "  weak " << std::abs(p.rho12_weak) << '\n';
            for (const auto& n : r.notes) std::cerr << "note: " << n << '\n';
        } else if (sweep->parsed()) {
            const auto table = ethlab::cmd_sweep(cfg, opt, ws);
            std::cout << ethlab::format_table(table["rows"]);
        } else if (width->parsed()) {
            ethlab::cmd_ef_width(cfg, opt, ws);
        }
        std::cerr << "results in " << opt.out.string() << '\n';
        return 0;
    } catch (const ethlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ethlab::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 3;
    }
}
