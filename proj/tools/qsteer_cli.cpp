// qsteer: command-line front end.
//   qsteer <decoherence|target|composite|feedback|compare>
//          [--config FILE] [--out DIR] [--set key=value]... [--seed N]
// Without --out, results go to $QSTEER_OUTPUT_ROOT/<mode> (default
// ./qsteer_out/<mode>).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qsteer/config.hpp"
#include "qsteer/runner.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::vector<std::string> sets;
    std::optional<long long> seed;
};

void add_run_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "configuration file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--set", o.sets, "override a configuration key (key=value), repeatable")
        ->allow_extra_args(false);
    cmd->add_option("--seed", o.seed, "RNG seed for stochastic runs");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace qsteer;
    CLI::App app{"Open-loop and feedback qubit state steering"};
    app.require_subcommand(1);

    Options opts;
    const std::vector<std::pair<Mode, std::string>> modes = {
        {Mode::decoherence, "tabulate the decoherence function g(tau)"},
        {Mode::target, "open-loop drive between two states"},
        {Mode::composite, "open-loop drive with two control Hamiltonians in sequence"},
        {Mode::feedback, "homodyne feedback: trajectory, ensemble or master equation"},
        {Mode::compare, "open-loop and feedback drives for the same endpoints"},
    };
    std::vector<std::pair<Mode, CLI::App*>> commands;
    for (const auto& [mode, help] : modes) {
        CLI::App* cmd = app.add_subcommand(std::string(to_string(mode)), help);
        add_run_options(cmd, opts);
        commands.emplace_back(mode, cmd);
    }

    CLI11_PARSE(app, argc, argv);

    Mode mode = Mode::target;
    for (const auto& [m, cmd] : commands) {
        if (cmd->parsed()) mode = m;
    }

    RunSpec spec;
    try {
        std::string text;
        if (!opts.config.empty()) {
            std::ifstream in(opts.config, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& s : opts.sets) overrides.push_back(parse_override(s));
        if (opts.seed) {
            if (mode != Mode::feedback && mode != Mode::compare) {
                throw ParseError("--seed applies only to the feedback and compare modes");
            }
            overrides.emplace_back("feedback.seed", std::to_string(*opts.seed));
        }
        spec = parse_config(mode, text, overrides);
        spec.config_path = opts.config;
    } catch (const std::exception& e) {
        std::cerr << "qsteer: " << e.what() << '\n';
        return kExitConfig;
    }

    if (!opts.out.empty()) {
        spec.out_dir = opts.out;
    } else {
        const char* root = std::getenv("QSTEER_OUTPUT_ROOT");
        spec.out_dir = default_output_dir(mode, root ? std::optional<std::string>(root) : std::nullopt);
    }

    try {
        const RunOutcome outcome = run(spec);
        std::cout << outcome.message;
        if (outcome.exit_code != kExitOk) {
            std::cerr << "qsteer: run failed (see " << (spec.out_dir / "FAILED").string() << ")\n";
        }
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "qsteer: " << e.what() << '\n';
        return kExitNumerical;
    }
}
