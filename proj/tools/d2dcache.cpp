// Command-line front end: parameter sweeps, figure reproductions, config
// validation and a quick self test.
//
// Exit codes: 0 success, 1 validation failure, 2 numerical nonconvergence,
// 3 failed figure or self-test assertion.

#include "d2dcache/d2dcache.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit { kOk = 0, kInvalid = 1, kNonConvergence = 2, kAssertion = 3 };

struct Flags {
    std::string config;
    std::string out;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::string methods;
    bool quiet = false;
};

int exit_for_rows(const d2d::sweep::Table& t) {
    int code = kOk;
    for (const auto& r : t.rows) {
        if (r.status == "invalid" || r.status == "error") code = std::max(code, static_cast<int>(kInvalid));
        if (r.status == "nonconvergence") return kNonConvergence;
    }
    return code;
}

void emit(const d2d::sweep::Table& t, const d2d::Meta& meta, const std::string& out, bool quiet) {
    const std::string csv = d2d::sweep::to_csv(t);
    if (out.empty()) {
        std::cout << csv;
        return;
    }
    d2d::sweep::write_atomic(out, csv);
    d2d::sweep::write_atomic(d2d::sweep::metadata_path(out), d2d::sweep::to_metadata(t, meta));
    if (!quiet) std::fprintf(stderr, "wrote %s (%zu rows)\n", out.c_str(), t.rows.size());
}

d2d::sweep::SweepSpec load_spec(const Flags& f) {
    auto cfg = f.config.empty() ? d2d::sweep::Config() : d2d::sweep::Config::from_file(f.config);
    cfg.apply_environment();
    if (f.seed) cfg.set("sim.seed", std::to_string(*f.seed));
    if (f.trials) cfg.set("sim.trials", std::to_string(*f.trials));
    if (f.workers) cfg.set("workers", std::to_string(*f.workers));
    if (!f.methods.empty()) cfg.set("methods", f.methods);
    if (!f.out.empty()) cfg.set("output", f.out);
    auto spec = d2d::sweep::spec_from_config(cfg);
    d2d::sweep::check(spec);
    return spec;
}

int run_sweep(const Flags& f) {
    const auto spec = load_spec(f);
    const auto table = d2d::sweep::run_sweep(spec, {spec.workers, f.quiet});
    emit(table, d2d::sweep::spec_meta(spec), spec.output, f.quiet);
    return exit_for_rows(table);
}

int run_validate(const Flags& f) {
    const auto spec = load_spec(f);
    std::size_t rows = 0;
    for (const auto& c : d2d::sweep::curves(spec)) {
        (void)c;
        rows += spec.values.size() * spec.methods.size();
    }
    std::printf("valid: %s, case %s, axis %s with %zu values, up to %zu rows\n", d2d::describe(spec.base).c_str(),
                d2d::to_string(spec.pcase).c_str(), d2d::sweep::to_string(spec.axis), spec.values.size(), rows);
    return kOk;
}

int run_figure(const Flags& f, const std::string& name) {
    d2d::sweep::FigureOptions opt;
    opt.trials = f.trials;
    opt.seed = f.seed;
    if (!f.methods.empty()) opt.methods = d2d::sweep::parse_methods(f.methods);
    opt.workers = f.workers.value_or(1);
    opt.quiet = f.quiet;
    const auto fig = d2d::sweep::reproduce_figure(name, opt);
    d2d::Meta meta{{"figure", name}};
    if (f.trials) meta.emplace_back("sim.trials", std::to_string(*f.trials));
    if (f.seed) meta.emplace_back("sim.seed", std::to_string(*f.seed));
    for (const auto& c : fig.checks) meta.emplace_back("check." + c.name, c.passed ? "pass" : "fail");
    emit(fig.table, meta, f.out, f.quiet);
    std::fputs(d2d::sweep::checks_report(fig).c_str(), stderr);
    const int rows = exit_for_rows(fig.table);
    if (rows != kOk) return rows;
    return fig.passed() ? kOk : kAssertion;
}

int run_selftest(const Flags& f) {
    bool ok = true;
    for (const auto& c : d2d::selftest::run()) {
        ok = ok && c.passed;
        if (!f.quiet || !c.passed) {
            std::printf("%s  %s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                        c.detail.empty() ? "" : (" (" + c.detail + ")").c_str());
        }
    }
    return ok ? kOk : kAssertion;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coverage, ASE and hit probability of cache-enabled clustered D2D networks"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "configuration file (key = value)");
    app.add_option("--out", f.out, "CSV output path; metadata goes to PATH.meta");
    app.add_option("--workers", f.workers, "rows evaluated concurrently");
    app.add_option("--seed", f.seed, "Monte Carlo seed");
    app.add_option("--trials", f.trials, "Monte Carlo trials per row");
    app.add_option("--methods", f.methods, "comma list of analytic_exact, analytic_approx, analytic_fast, monte_carlo");
    app.add_flag("--quiet", f.quiet, "suppress progress output");

    auto* sweep = app.add_subcommand("sweep", "run the sweep described by a configuration");
    sweep->add_option("config", f.config, "configuration file");
    auto* figure = app.add_subcommand("figure", "reproduce a figure's data and check its qualitative claims");
    std::string name;
    figure->add_option("name", name, "fig3, fig4, fig5, fig6, fig7, fig9 or fig10")->required();
    auto* validate = app.add_subcommand("validate", "check a configuration without running it");
    validate->add_option("config", f.config, "configuration file");
    auto* selftest = app.add_subcommand("selftest", "run the invariant suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return run_sweep(f);
        if (figure->parsed()) return run_figure(f, name);
        if (validate->parsed()) return run_validate(f);
        if (selftest->parsed()) return run_selftest(f);
    } catch (const d2d::ValidationError& e) {
        std::fprintf(stderr, "invalid: %s\n", e.what());
        return kInvalid;
    } catch (const d2d::NonConvergenceError& e) {
        std::fprintf(stderr, "nonconvergence: %s\n", e.what());
        return kNonConvergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    }
    return kOk;
}
