// frachaos <command> --config <file> [--seed N] [--out DIR]

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "frachaos/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Wick-type fractional SDE solver (H < 1/2)"};
    app.set_version_flag("--version", frachaos::kVersion);
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    for (const auto& name : frachaos::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key = value config file")->required();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--out", out_dir, "overrides output_dir");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? frachaos::kExitOk : frachaos::kExitError;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        auto cfg = frachaos::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.output_dir = *out_dir;
        const auto m = frachaos::run_command(name, cfg);
        if (!m.summary.empty()) std::cout << m.summary << (m.summary.back() == '\n' ? "" : "\n");
        std::cout << "wrote " << cfg.output_dir << "/manifest.txt\n";
        return m.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return frachaos::kExitError;
    }
}
