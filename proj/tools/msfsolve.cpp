#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msf/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"msfsolve: non-isothermal multicomponent diffusion solver"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::vector<std::string> sweep;

    auto* run = app.add_subcommand("run", "run a simulation and write fields/diagnostics CSVs");
    run->add_option("--config", config, "config file (.cfg text or manifest.json)");
    run->add_option("--sweep", sweep, "several configs run concurrently")->expected(1, -1);
    run->add_option("--out", out, "output directory");

    auto* check = app.add_subcommand("check-matrix", "certify the configured diffusion matrix");
    check->add_option("--config", config, "config file")->required();
    check->add_option("--out", out, "directory for certificates.csv");

    auto* conv = app.add_subcommand("convergence", "spatial and temporal convergence orders");
    conv->add_option("--config", config, "config file")->required();
    conv->add_option("--out", out, "directory for convergence.csv");

    CLI11_PARSE(app, argc, argv);

    const std::optional<std::filesystem::path> out_dir =
        out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out);
    if (*run) {
        if (!sweep.empty()) {
            std::vector<std::filesystem::path> paths(sweep.begin(), sweep.end());
            if (!config.empty()) paths.insert(paths.begin(), config);
            return msf::cmd_sweep(paths, out_dir, std::cout);
        }
        if (config.empty()) {
            std::cerr << "run: --config or --sweep is required\n";
            return msf::kExitError;
        }
        return msf::cmd_run(config, out_dir, std::cout);
    }
    if (*check) return msf::cmd_check_matrix(config, out_dir, std::cout);
    return msf::cmd_convergence(config, out_dir, std::cout);
}
