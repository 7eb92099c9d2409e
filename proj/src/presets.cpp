#include "wesample/experiment.hpp"

namespace wesample {

using njson = nlohmann::json;

namespace {

struct PresetInfo {
    const char* name;
    const char* description;
};

const PresetInfo kPresets[] = {
    {"fig_three_state",
     "three-state chain, delta=1e-3: theta vs N at T=500, WE vs DMC"},
    {"fig_three_state_T",
     "three-state chain, delta=1e-3: theta vs T at N=120, WE vs DMC"},
    {"fig_lineage_n2_1",
     "periodic chain: theta and lineage average vs N at T=1000, N2=1 allocation"},
    {"fig_lineage_half",
     "periodic chain: theta and lineage average vs N at T=1000, N2=N/2 allocation"},
    {"fig_smc_3state",
     "three-state chain, delta=0.25: SMC theta vs T at N=120, V(u)=u"},
    {"fig_torus",
     "torus Langevin, beta=6: theta vs T at N=200, WE vs DMC vs SMC"},
    {"fig_torus_marginal",
     "torus Langevin, beta=5: time-marginal average vs T, WE vs SMC"},
};

njson three_state_base(double delta, std::uint64_t seed) {
    return {{"kernel", {{"kind", "three_state"}, {"delta", delta}}},
            {"initial", {{"kind", "point"}, {"state", 0}}},
            {"observable", {{"kind", "indicator_state"}, {"state", 2}}},
            {"estimators", njson::array({"theta"})},
            {"seed", seed}};
}

njson with_we_bins(njson cfg) {
    cfg["scheme"] = "we_multinomial";
    cfg["binning"] = {{"kind", "per_state"}};
    cfg["allocation"] = {{"kind", "uniform"}};
    return cfg;
}

njson torus_base(double beta, std::uint64_t seed) {
    return {{"kernel",
             {{"kind", "torus_langevin"}, {"beta", beta}, {"dt", 1e-3}, {"skeleton", 10}}},
            {"initial", {{"kind", "gibbs_cos"}, {"beta", beta}}},
            {"observable", {{"kind", "indicator_interval"}, {"lo", 0.45}, {"hi", 0.55}}},
            {"N", 200},
            {"seed", seed}};
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& p : kPresets) out.emplace_back(p.name);
        return out;
    }();
    return names;
}

std::string preset_description(const std::string& name) {
    for (const auto& p : kPresets)
        if (name == p.name) return p.description;
    throw ConfigError("unknown preset: " + name);
}

std::vector<PresetRun> preset_configs(const std::string& name, bool full_scale) {
    std::vector<PresetRun> runs;

    if (name == "fig_three_state") {
        njson base = three_state_base(1e-3, 101);
        base["N"] = njson::array({60, 120, 240});
        base["T"] = 500;
        base["replicates"] = 10'000;
        njson we = with_we_bins(base);
        njson dmc = base;
        dmc["scheme"] = "dmc";
        runs.push_back({"fig_three_state_we", we});
        runs.push_back({"fig_three_state_dmc", dmc});
        return runs;
    }
    if (name == "fig_three_state_T") {
        njson base = three_state_base(1e-3, 102);
        base["N"] = 120;
        base["T"] = njson::array({125, 250, 500, 1000, 2000});
        base["replicates"] = full_scale ? 10'000 : 1'000;
        njson we = with_we_bins(base);
        njson dmc = base;
        dmc["scheme"] = "dmc";
        runs.push_back({"fig_three_state_T_we", we});
        runs.push_back({"fig_three_state_T_dmc", dmc});
        return runs;
    }
    if (name == "fig_lineage_n2_1" || name == "fig_lineage_half") {
        const bool half = name == "fig_lineage_half";
        njson cfg = {{"kernel", {{"kind", "periodic_three_state"}}},
                     {"initial", {{"kind", "point"}, {"state", 0}}},
                     {"observable", {{"kind", "indicator_state"}, {"state", 2}}},
                     {"estimators", njson::array({"theta", "theta_tilde"})},
                     {"scheme", "we_multinomial"},
                     {"binning", {{"kind", "per_state"}}},
                     {"N", njson::array({24, 48, 120})},
                     {"T", 1000},
                     {"replicates", 10'000},
                     {"seed", half ? 104 : 103}};
        cfg["allocation"] = {{"kind", "periodic_example"}, {"n2", half ? njson("half") : njson(1)}};
        runs.push_back({name, cfg});
        return runs;
    }
    if (name == "fig_smc_3state") {
        njson cfg = three_state_base(0.25, 105);
        // the transient of nu = point(0) is visible against M=1e6-scale error
        // bars at small T; a stationary start isolates the selection effect
        cfg["initial"] = {{"kind", "stationary"}};
        cfg["scheme"] = "smc_gb";
        cfg["potential"] = {{"kind", "state_affine"}, {"scale", 1.0}, {"offset", 1.0}};
        cfg["N"] = 120;
        cfg["T"] = njson::array({125, 250, 500, 1000, 2000});
        cfg["replicates"] = full_scale ? 1'000'000 : 10'000;
        runs.push_back({name, cfg});
        return runs;
    }
    if (name == "fig_torus") {
        njson base = torus_base(6.0, 106);
        base["T"] = njson::array({50, 100, 200, 400});
        base["estimators"] = njson::array({"theta"});
        base["replicates"] = full_scale ? 100'000 : 1'000;
        njson we = base;
        we["scheme"] = "we_multinomial";
        we["binning"] = {{"kind", "uniform_torus"}, {"count", 20}};
        we["allocation"] = {{"kind", "uniform"}};
        njson dmc = base;
        dmc["scheme"] = "dmc";
        njson smc = base;
        smc["scheme"] = "smc_gb";
        smc["potential"] = {{"kind", "gauss_well"}, {"center", 0.5}, {"stiffness", 10.0}};
        runs.push_back({"fig_torus_we", we});
        runs.push_back({"fig_torus_dmc", dmc});
        runs.push_back({"fig_torus_smc", smc});
        return runs;
    }
    if (name == "fig_torus_marginal") {
        njson base = torus_base(5.0, 107);
        base["T"] = njson::array({100, 400});
        base["estimators"] = njson::array({"theta_bar"});
        base["replicates"] = full_scale ? 500'000 : 1'000;
        njson we = base;
        we["scheme"] = "we_multinomial";
        we["binning"] = {{"kind", "uniform_torus"}, {"count", 20}};
        we["allocation"] = {{"kind", "uniform"}};
        njson smc = base;
        smc["scheme"] = "smc_gb";
        smc["potential"] = {{"kind", "gauss_well"}, {"center", 0.5}, {"stiffness", 10.0}};
        runs.push_back({"fig_torus_marginal_we", we});
        runs.push_back({"fig_torus_marginal_smc", smc});
        return runs;
    }
    throw ConfigError("unknown preset: " + name);
}

}  // namespace wesample
