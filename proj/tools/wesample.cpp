#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "wesample/experiment.hpp"
#include "wesample/parallel.hpp"

namespace fs = std::filesystem;
using namespace wesample;

namespace {

OutputFormat format_from_name(const std::string& name) {
    if (name == "csv") return OutputFormat::kCsv;
    if (name == "json") return OutputFormat::kJson;
    if (name == "dat") return OutputFormat::kGnuplotDat;
    throw ConfigError("unknown output format: " + name);
}

const char* format_extension(OutputFormat f) {
    switch (f) {
        case OutputFormat::kCsv: return ".csv";
        case OutputFormat::kJson: return ".json";
        case OutputFormat::kGnuplotDat: return ".dat";
    }
    return ".csv";
}

int run_command(const std::string& config_path, const std::string& preset, bool full,
                int threads, const std::string& out_dir, const std::string& format_name) {
    const OutputFormat format = format_from_name(format_name);
    std::vector<PresetRun> jobs;
    if (!config_path.empty()) {
        ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
        std::string label = cfg.output;
        if (label.empty()) label = fs::path(config_path).stem().string();
        jobs.push_back({label, cfg.raw});
    } else {
        jobs = preset_configs(preset, full);
    }

    fs::create_directories(out_dir);
    RunOptions options{threads};
    for (const auto& job : jobs) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(job.config);
        const ResultsTable table = run_experiment(cfg, options);
        const fs::path path = fs::path(out_dir) / (job.label + format_extension(format));
        emit_results(table, format, path);
        std::printf("wrote %s (%zu rows, %.1fs)\n", path.c_str(), table.rows.size(),
                    table.wall_seconds);
    }
    return 0;
}

int presets_command() {
    for (const auto& name : preset_names())
        std::printf("%-22s %s\n", name.c_str(), preset_description(name).c_str());
    return 0;
}

int audit_command(const std::string& config_path, long replicates, int threads,
                  const std::string& out_file) {
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    const auto bundle = make_audit_bundle(cfg);
    const long m = replicates > 0 ? replicates : cfg.replicates;
    const DoobAudit audit = doob_audit(bundle->setup, m, threads);
    const std::string payload = audit_to_json(audit, cfg.scheme).dump(2) + "\n";
    if (out_file.empty()) {
        std::fputs(payload.c_str(), stdout);
    } else {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open output file: " + out_file);
        out << payload;
    }
    return audit.passes() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted-ensemble steady-state sampling experiments"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir, format_name = "csv", audit_out;
    bool full = false;
    int threads = default_thread_count();
    long audit_replicates = 0;

    CLI::App* run = app.add_subcommand("run", "run a config file or a named preset");
    auto* config_opt = run->add_option("--config", config_path, "experiment config (JSON)");
    auto* preset_opt = run->add_option("--preset", preset, "preset name (see `presets`)");
    run->add_flag("--full", full, "paper-scale replicate counts");
    run->add_option("--threads", threads, "worker threads");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--format", format_name, "csv | json | dat");
    config_opt->excludes(preset_opt);

    app.add_subcommand("presets", "list available presets");

    CLI::App* audit = app.add_subcommand("audit", "Doob-decomposition variance audit");
    audit->add_option("--config", config_path, "experiment config (JSON)")->required();
    audit->add_option("--replicates", audit_replicates, "replicate count (overrides config)");
    audit->add_option("--threads", threads, "worker threads");
    audit->add_option("--out", audit_out, "output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (config_path.empty() && preset.empty())
                throw ConfigError("run: one of --config or --preset is required");
            return run_command(config_path, preset, full, threads, out_dir, format_name);
        }
        if (app.get_subcommand("presets")->parsed()) return presets_command();
        if (audit->parsed())
            return audit_command(config_path, audit_replicates, threads, audit_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const InvariantError& e) {
        std::fprintf(stderr, "invariant violation: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
