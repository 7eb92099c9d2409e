#pragma once

#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wesample/ensemble.hpp"
#include "wesample/kernels.hpp"
#include "wesample/variance_lab.hpp"

namespace wesample {

inline constexpr const char* kVersion = "0.1.0";

enum class EstimatorKind { kTheta, kThetaBar, kThetaTilde };

const char* estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct BinningSpec {
    enum class Kind { kPerState, kUniformTorus, kCustomTable };
    Kind kind = Kind::kPerState;
    int count = 0;
    std::vector<int> table;
};

struct ObservableSpec {
    enum class Kind { kIndicatorState, kIndicatorInterval, kConstant, kTable };
    Kind kind = Kind::kIndicatorState;
    int state = 0;
    double lo = 0.0, hi = 0.0;
    double value = 0.0;
    std::vector<double> values;
};

struct InitialSpec {
    enum class Kind { kPoint, kUniform, kGibbsCos, kStationary };
    Kind kind = Kind::kPoint;
    int state = 0;
    double x = 0.0;
    double beta = 1.0;
};

struct PotentialSpec {
    enum class Kind { kNone, kStateAffine, kGaussWell, kConstant };
    Kind kind = Kind::kNone;
    double scale = 1.0, offset = 0.0;
    double center = 0.5, stiffness = 1.0;
    double value = 1.0;
};

// A fully validated experiment description. Exactly one of the N / T grids
// may hold more than one value; that one is the sweep. The seed is mandatory:
// there is no ambient randomness anywhere.
struct ExperimentConfig {
    nlohmann::json raw;
    std::variant<FiniteKernel, TorusLangevinKernel> kernel{FiniteKernel(Eigen::MatrixXd::Identity(1, 1))};
    SchemeKind scheme = SchemeKind::kDmc;
    BinningSpec binning;
    AllocationPolicy allocation;
    PotentialSpec potential;
    InitialSpec initial;
    ObservableSpec observable;
    std::vector<EstimatorKind> estimators;
    std::vector<long> n_values;
    std::vector<long> t_values;
    bool sweep_is_t = true;
    long replicates = 0;
    std::uint64_t seed = 0;
    std::string output;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::filesystem::path& path);
};

struct ResultRow {
    double sweep = 0.0;
    std::string estimator;
    double mean = 0.0;
    double std_dev = 0.0;
    double std_err = 0.0;
    long replicates = 0;

    bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
    std::string sweep_name;  // "T" or "N"
    std::vector<ResultRow> rows;
    std::string config_hash;
    std::string version;
    double wall_seconds = 0.0;

    bool operator==(const ResultsTable&) const = default;
};

struct RunOptions {
    int threads = 1;
};

// M independent replicates per grid point, reduced in replicate-index order;
// deterministic given the config seed, whatever the thread count.
ResultsTable run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

enum class ScalingLaw { kInvSqrtT, kSqrtT };

struct ScalingReport {
    double ratio_max_min = 0.0;                    // of the law-scaled std deviations
    double loglog_slope = 0.0;                     // slope of log(std) vs log(sweep)
    std::vector<std::pair<double, double>> scaled;  // (sweep, scaled std)
};

// Checks a sigma_T ~ T^(-1/2) (or ~ T^(1/2)) law on a swept table.
ScalingReport compare_scaling(const ResultsTable& table, ScalingLaw law,
                              const std::string& estimator = "theta");

enum class OutputFormat { kCsv, kJson, kGnuplotDat };

std::string results_to_csv(const ResultsTable& table);
nlohmann::json results_to_json(const ResultsTable& table);
ResultsTable results_from_json(const nlohmann::json& j);
void emit_results(const ResultsTable& table, OutputFormat format,
                  const std::filesystem::path& path);

// Builds a Doob-audit setup from a finite-chain config (single N and T).
// The bundle owns the kernel the setup points at; keep it alive while
// auditing.
struct AuditBundle {
    FiniteKernel kernel;
    AuditSetup setup;
};

std::unique_ptr<AuditBundle> make_audit_bundle(const ExperimentConfig& cfg);
nlohmann::json audit_to_json(const DoobAudit& audit, SchemeKind scheme);

// Named experiment bundles reproducing the paper's figures at desk scale;
// --full restores paper-scale replicate counts.
struct PresetRun {
    std::string label;
    nlohmann::json config;
};

const std::vector<std::string>& preset_names();
std::string preset_description(const std::string& name);
std::vector<PresetRun> preset_configs(const std::string& name, bool full_scale);

}  // namespace wesample
