#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "risnoma/experiment.hpp"

namespace {

// 0 ok, 1 validation failure, 2 runtime failure.
constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

std::string preset_dir() {
    if (const char* env = std::getenv("RISNOMA_PRESET_DIR")) return env;
    return RISNOMA_PRESET_DIR;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uplink RIS-NOMA average BER toolkit: closed-form curves, "
                 "Monte Carlo validation, and power allocation"};
    app.require_subcommand(1);

    std::string run_preset;
    std::string mode;
    std::string pa;
    std::string out_path;
    std::uint64_t runs = 0;
    bool have_runs = false;
    std::uint64_t seed = 0;
    bool have_seed = false;

    CLI::App* run = app.add_subcommand("run", "Evaluate a preset sweep and emit CSV");
    run->add_option("preset-file", run_preset, "Preset JSON file")->required();
    run->add_option("--mode", mode, "Override evaluation mode: analytic|mc|both");
    run->add_option("--runs", runs, "Override Monte Carlo run budget")
        ->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "Override the master seed");
    run->add_option("--out", out_path, "Write CSV here instead of stdout");
    run->add_option("--pa", pa, "Force power allocation: on|off");

    std::string validate_preset_path;
    CLI::App* val = app.add_subcommand("validate", "Check a preset file without running it");
    val->add_option("preset-file", validate_preset_path, "Preset JSON file")->required();

    CLI::App* list = app.add_subcommand("presets", "List bundled preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kValidationFailure;
    }

    if (list->parsed()) {
        try {
            for (const auto& name : risnoma::list_presets(preset_dir()))
                std::cout << name << "\n";
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kRuntimeFailure;
        }
        return kOk;
    }

    if (val->parsed()) {
        try {
            const auto p = risnoma::load_preset(validate_preset_path);
            risnoma::validate_preset(p);
            std::cout << "ok: " << p.name << "\n";
        } catch (const std::exception& e) {
            std::cerr << "invalid: " << e.what() << "\n";
            return kValidationFailure;
        }
        return kOk;
    }

    have_runs = run->count("--runs") > 0;
    have_seed = run->count("--seed") > 0;
    risnoma::ExperimentPreset preset;
    try {
        preset = risnoma::load_preset(run_preset);
        if (!mode.empty()) preset.mode = risnoma::mode_from_string(mode);
        if (have_runs) preset.runs = runs;
        if (have_seed) preset.seed = seed;
        if (!pa.empty()) {
            if (pa == "on")
                preset.pa = true;
            else if (pa == "off")
                preset.pa = false;
            else
                throw std::invalid_argument("--pa expects on|off, got '" + pa + "'");
        }
        risnoma::validate_preset(preset);
    } catch (const std::exception& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kValidationFailure;
    }

    try {
        const auto result = risnoma::run_experiment(preset);
        if (out_path.empty()) {
            risnoma::write_experiment_csv(result, std::cout);
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open output file '" + out_path + "'");
            risnoma::write_experiment_csv(result, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}
