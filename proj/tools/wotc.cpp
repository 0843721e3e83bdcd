#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wotc/commands.hpp"

// wotc: wisdom-of-the-crowd voting mechanisms over two alternatives.
// Subcommands: validate, simulate, exact, equilibrium, impossibility,
// sweep, decide. See README.md for the config schema and exit codes.

int main(int argc, char** argv) {
    CLI::App app{"wisdom-of-the-crowd voting mechanisms: simulation and verification"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string ballots_path;
    int threads = 1;
    std::optional<long long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mechanism;
    std::vector<double> grid_values;
    std::optional<double> epsilon_value;
    std::string epsilon_text = "auto";
    int max_coalition = 3;
    std::string stub;
    long long impossibility_t = 3000;
    std::vector<long long> t_values;

    CLI::App* validate = app.add_subcommand("validate", "check a scenario config");
    validate->add_option("config", config_path, "scenario config (JSON)")->required();

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the truthful profile");
    simulate->add_option("config", config_path, "scenario config (JSON)")->required();
    simulate->add_option("--trials", trials, "trials per world (default: config)");
    simulate->add_option("--seed", seed, "master seed (default: config)");
    simulate->add_option("--mechanism", mechanism, "override the config's mechanism");
    simulate->add_option("--out", out_path, "output CSV path (default: stdout)");
    simulate->add_option("--threads", threads, "worker threads (output is thread-count invariant)")
        ->check(CLI::Range(1, 256));

    CLI::App* exact = app.add_subcommand("exact", "exact per-world outcome probabilities");
    exact->add_option("config", config_path, "scenario config (JSON)")->required();
    exact->add_option("--out", out_path, "output CSV path (default: stdout)");

    CLI::App* equilibrium = app.add_subcommand("equilibrium", "exhaustive SBNE and dominance audit");
    equilibrium->add_option("config", config_path, "scenario config (JSON)")->required();
    equilibrium->add_option("--grid", grid_values,
                            "extra grid values (0, 1 and truthful values are always included)");
    equilibrium->add_option("--epsilon", epsilon_text, "epsilon, or `auto` for the Theorem-3 default");
    equilibrium->add_option("--max-coalition", max_coalition, "largest coalition size")
        ->check(CLI::Range(1, 16));
    equilibrium->add_option("--stub", stub, "replace the mechanism: broken-median | constant-accept");

    CLI::App* impossibility = app.add_subcommand(
        "impossibility", "binomial/Gaussian TVD figures and the anonymous-mechanism audit");
    impossibility->add_option("--t", impossibility_t, "number of agents (multiple of 3)")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "simulate across population sizes");
    sweep->add_option("config", config_path, "scenario config (JSON, aggregated population)")->required();
    sweep->add_option("--t-values", t_values, "population sizes (even values round up to odd)")
        ->required();
    sweep->add_option("--trials", trials, "trials per world (default: config)");
    sweep->add_option("--seed", seed, "master seed (default: config)");
    sweep->add_option("--out", out_path, "output CSV path (default: stdout)");
    sweep->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));

    CLI::App* decide = app.add_subcommand("decide", "decide one election from a questionnaire ballot file");
    decide->add_option("config", config_path, "scenario config (JSON)")->required();
    decide->add_option("ballots", ballots_path, "ballot file: `a`, `b`, `c <pct>`, `d <pct>` per line")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? wotc::kExitOk : wotc::kExitParse;
    }

    if (validate->parsed()) {
        return wotc::cmd_validate(config_path, std::cout, std::cerr);
    }
    if (simulate->parsed()) {
        wotc::SimulateOptions options;
        options.trials = trials;
        options.seed = seed;
        options.mechanism = mechanism;
        options.out_path = out_path;
        options.threads = threads;
        return wotc::cmd_simulate(config_path, options, std::cout, std::cerr);
    }
    if (exact->parsed()) {
        return wotc::cmd_exact(config_path, out_path, std::cout, std::cerr);
    }
    if (equilibrium->parsed()) {
        wotc::EquilibriumOptions options;
        options.grid_values = grid_values;
        options.max_coalition = max_coalition;
        options.stub = stub;
        if (epsilon_text != "auto") {
            try {
                options.epsilon = std::stod(epsilon_text);
            } catch (const std::exception&) {
                std::cerr << "error: --epsilon must be `auto` or a number\n";
                return wotc::kExitParse;
            }
        }
        return wotc::cmd_equilibrium(config_path, options, std::cout, std::cerr);
    }
    if (impossibility->parsed()) {
        return wotc::cmd_impossibility(impossibility_t, std::cout, std::cerr);
    }
    if (sweep->parsed()) {
        wotc::SweepOptions options;
        options.t_values = t_values;
        options.trials = trials;
        options.seed = seed;
        options.out_path = out_path;
        options.threads = threads;
        return wotc::cmd_sweep(config_path, options, std::cout, std::cerr);
    }
    if (decide->parsed()) {
        return wotc::cmd_decide(config_path, ballots_path, std::cout, std::cerr);
    }
    return wotc::kExitParse;
}
