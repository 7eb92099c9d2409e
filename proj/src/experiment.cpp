#include "wesample/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "wesample/parallel.hpp"

namespace wesample {

using njson = nlohmann::json;

const char* estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::kTheta: return "theta";
        case EstimatorKind::kThetaBar: return "theta_bar";
        case EstimatorKind::kThetaTilde: return "theta_tilde";
    }
    return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
    if (name == "theta") return EstimatorKind::kTheta;
    if (name == "theta_bar") return EstimatorKind::kThetaBar;
    if (name == "theta_tilde") return EstimatorKind::kThetaTilde;
    throw ConfigError("unknown estimator: " + name);
}

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const njson& need(const njson& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(path + "." + key + ": required field is missing");
    return j.at(key);
}

double need_number(const njson& j, const char* key, const std::string& path) {
    const njson& v = need(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

long need_integer(const njson& j, const char* key, const std::string& path) {
    const njson& v = need(j, key, path);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
    return v.get<long>();
}

std::string need_string(const njson& j, const char* key, const std::string& path) {
    const njson& v = need(j, key, path);
    if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

std::vector<long> parse_grid(const njson& j, const char* key, const std::string& path) {
    const njson& v = need(j, key, path);
    std::vector<long> out;
    if (v.is_number_integer()) {
        out.push_back(v.get<long>());
    } else if (v.is_array() && !v.empty()) {
        for (const auto& e : v) {
            if (!e.is_number_integer())
                throw ConfigError(path + "." + key + ": grid entries must be integers");
            out.push_back(e.get<long>());
        }
    } else {
        throw ConfigError(path + "." + key + ": expected an integer or a non-empty array");
    }
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 1) throw ConfigError(path + "." + key + ": values must be >= 1");
        if (i > 0 && out[i] <= out[i - 1])
            throw ConfigError(path + "." + key + ": grid must be strictly increasing");
    }
    return out;
}

std::variant<FiniteKernel, TorusLangevinKernel> parse_kernel(const njson& spec,
                                                             const std::string& path) {
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "finite") {
        const njson& m = need(spec, "matrix", path);
        if (!m.is_array() || m.empty()) throw ConfigError(path + ".matrix: expected rows");
        const auto n = static_cast<Eigen::Index>(m.size());
        Eigen::MatrixXd p(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = m.at(i);
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigError(path + ".matrix: must be square");
            for (Eigen::Index j = 0; j < n; ++j) p(i, j) = row.at(j).get<double>();
        }
        try {
            return FiniteKernel(p);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path + ".matrix: " + e.what());
        }
    }
    if (kind == "three_state") {
        const double delta = need_number(spec, "delta", path);
        try {
            return three_state_chain(delta);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path + ".delta: " + e.what());
        }
    }
    if (kind == "periodic_three_state") return periodic_three_state_chain();
    if (kind == "torus_langevin") {
        const double beta = need_number(spec, "beta", path);
        const double dt = spec.contains("dt") ? need_number(spec, "dt", path) : 1e-3;
        const long skeleton =
            spec.contains("skeleton") ? need_integer(spec, "skeleton", path) : 10;
        try {
            return TorusLangevinKernel(beta, dt, static_cast<int>(skeleton));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }
    throw ConfigError(path + ".kind: unknown kernel kind '" + kind + "'");
}

BinningSpec parse_binning(const njson& spec, const std::string& path) {
    BinningSpec out;
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "per_state") {
        out.kind = BinningSpec::Kind::kPerState;
    } else if (kind == "uniform_torus") {
        out.kind = BinningSpec::Kind::kUniformTorus;
        out.count = static_cast<int>(need_integer(spec, "count", path));
        if (out.count < 1) throw ConfigError(path + ".count: must be >= 1");
    } else if (kind == "custom_table") {
        out.kind = BinningSpec::Kind::kCustomTable;
        const njson& tbl = need(spec, "table", path);
        if (!tbl.is_array() || tbl.empty()) throw ConfigError(path + ".table: expected an array");
        for (const auto& e : tbl) out.table.push_back(e.get<int>());
    } else {
        throw ConfigError(path + ".kind: unknown binning kind '" + kind + "'");
    }
    return out;
}

AllocationPolicy parse_allocation(const njson& spec, const std::string& path) {
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "uniform") return AllocationPolicy::uniform();
    if (kind == "proportional") return AllocationPolicy::proportional_floor();
    if (kind == "periodic_example") {
        const njson& n2 = need(spec, "n2", path);
        if (n2.is_string() && n2.get<std::string>() == "half")
            return AllocationPolicy::periodic_example_half();
        if (n2.is_number_integer() && n2.get<long>() >= 1)
            return AllocationPolicy::periodic_example(static_cast<int>(n2.get<long>()));
        throw ConfigError(path + ".n2: expected a positive integer or \"half\"");
    }
    if (kind == "custom") {
        const njson& counts = need(spec, "counts", path);
        if (!counts.is_array()) throw ConfigError(path + ".counts: expected an array");
        std::vector<int> c;
        for (const auto& e : counts) c.push_back(e.get<int>());
        return AllocationPolicy::custom_counts(std::move(c));
    }
    throw ConfigError(path + ".kind: unknown allocation kind '" + kind + "'");
}

ObservableSpec parse_observable(const njson& spec, const std::string& path) {
    ObservableSpec out;
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "indicator_state") {
        out.kind = ObservableSpec::Kind::kIndicatorState;
        out.state = static_cast<int>(need_integer(spec, "state", path));
    } else if (kind == "indicator_interval") {
        out.kind = ObservableSpec::Kind::kIndicatorInterval;
        out.lo = need_number(spec, "lo", path);
        out.hi = need_number(spec, "hi", path);
        if (!(0.0 <= out.lo && out.lo <= out.hi && out.hi <= 1.0))
            throw ConfigError(path + ": interval must satisfy 0 <= lo <= hi <= 1");
    } else if (kind == "constant") {
        out.kind = ObservableSpec::Kind::kConstant;
        out.value = need_number(spec, "value", path);
    } else if (kind == "table") {
        out.kind = ObservableSpec::Kind::kTable;
        const njson& vals = need(spec, "values", path);
        if (!vals.is_array() || vals.empty())
            throw ConfigError(path + ".values: expected a non-empty array");
        for (const auto& e : vals) out.values.push_back(e.get<double>());
    } else {
        throw ConfigError(path + ".kind: unknown observable kind '" + kind + "'");
    }
    return out;
}

InitialSpec parse_initial(const njson& spec, const std::string& path) {
    InitialSpec out;
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "point") {
        out.kind = InitialSpec::Kind::kPoint;
        if (spec.contains("state"))
            out.state = static_cast<int>(need_integer(spec, "state", path));
        else if (spec.contains("x"))
            out.x = need_number(spec, "x", path);
        else
            throw ConfigError(path + ": point initial needs 'state' (finite) or 'x' (torus)");
    } else if (kind == "uniform") {
        out.kind = InitialSpec::Kind::kUniform;
    } else if (kind == "gibbs_cos") {
        out.kind = InitialSpec::Kind::kGibbsCos;
        out.beta = need_number(spec, "beta", path);
        if (!(out.beta > 0.0)) throw ConfigError(path + ".beta: must be > 0");
    } else if (kind == "stationary") {
        out.kind = InitialSpec::Kind::kStationary;
    } else {
        throw ConfigError(path + ".kind: unknown initial kind '" + kind + "'");
    }
    return out;
}

PotentialSpec parse_potential(const njson& spec, const std::string& path) {
    PotentialSpec out;
    const std::string kind = need_string(spec, "kind", path);
    if (kind == "state_affine") {
        out.kind = PotentialSpec::Kind::kStateAffine;
        out.scale = spec.contains("scale") ? need_number(spec, "scale", path) : 1.0;
        out.offset = spec.contains("offset") ? need_number(spec, "offset", path) : 0.0;
    } else if (kind == "gauss_well") {
        out.kind = PotentialSpec::Kind::kGaussWell;
        out.center = need_number(spec, "center", path);
        out.stiffness = need_number(spec, "stiffness", path);
    } else if (kind == "constant") {
        out.kind = PotentialSpec::Kind::kConstant;
        out.value = need_number(spec, "value", path);
        if (!(out.value > 0.0)) throw ConfigError(path + ".value: must be > 0");
    } else {
        throw ConfigError(path + ".kind: unknown potential kind '" + kind + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// per-state-type factories

Observable<int> make_observable_finite(const ObservableSpec& spec, int n_states) {
    switch (spec.kind) {
        case ObservableSpec::Kind::kIndicatorState: {
            if (spec.state < 0 || spec.state >= n_states)
                throw ConfigError("observable.state: outside the chain's state space");
            const int target = spec.state;
            return {[target](const int& x) { return x == target ? 1.0 : 0.0; }, 1.0};
        }
        case ObservableSpec::Kind::kConstant: {
            const double c = spec.value;
            return {[c](const int&) { return c; }, std::abs(c)};
        }
        case ObservableSpec::Kind::kTable: {
            if (static_cast<int>(spec.values.size()) != n_states)
                throw ConfigError("observable.values: size must match the state count");
            auto values = spec.values;
            double bound = 0.0;
            for (double v : values) bound = std::max(bound, std::abs(v));
            return {[values = std::move(values)](const int& x) { return values.at(x); }, bound};
        }
        case ObservableSpec::Kind::kIndicatorInterval:
            throw ConfigError("observable: indicator_interval needs a torus kernel");
    }
    throw ConfigError("observable: unsupported kind");
}

Observable<double> make_observable_torus(const ObservableSpec& spec) {
    switch (spec.kind) {
        case ObservableSpec::Kind::kIndicatorInterval: {
            const double lo = spec.lo, hi = spec.hi;
            return {[lo, hi](const double& x) { return (lo <= x && x <= hi) ? 1.0 : 0.0; }, 1.0};
        }
        case ObservableSpec::Kind::kConstant: {
            const double c = spec.value;
            return {[c](const double&) { return c; }, std::abs(c)};
        }
        default:
            throw ConfigError("observable: this kind needs a finite kernel");
    }
}

std::function<int(RngStream&)> make_initial_finite(const InitialSpec& spec,
                                                   const FiniteKernel& kernel) {
    const int n = kernel.size();
    switch (spec.kind) {
        case InitialSpec::Kind::kPoint: {
            if (spec.state < 0 || spec.state >= n)
                throw ConfigError("initial.state: outside the chain's state space");
            const int s = spec.state;
            return [s](RngStream&) { return s; };
        }
        case InitialSpec::Kind::kUniform:
            return [n](RngStream& g) {
                int s = static_cast<int>(g.uniform() * n);
                return s >= n ? n - 1 : s;
            };
        case InitialSpec::Kind::kStationary: {
            const Eigen::VectorXd mu = stationary_distribution(kernel);
            std::vector<double> prefix(n);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += mu(i);
                prefix[i] = acc;
            }
            return [prefix = std::move(prefix)](RngStream& g) {
                return detail::cdf_invert(prefix, g.uniform() * prefix.back());
            };
        }
        case InitialSpec::Kind::kGibbsCos:
            throw ConfigError("initial: gibbs_cos needs a torus kernel");
    }
    throw ConfigError("initial: unsupported kind");
}

std::function<double(RngStream&)> make_initial_torus(const InitialSpec& spec) {
    switch (spec.kind) {
        case InitialSpec::Kind::kPoint: {
            const double x = spec.x;
            if (!(x >= 0.0 && x < 1.0)) throw ConfigError("initial.x: must lie in [0,1)");
            return [x](RngStream&) { return x; };
        }
        case InitialSpec::Kind::kUniform:
            return [](RngStream& g) { return g.uniform(); };
        case InitialSpec::Kind::kGibbsCos: {
            // rejection from the uniform envelope: accept u < exp(beta(cos(2 pi x) - 1))
            const double beta = spec.beta;
            return [beta](RngStream& g) {
                for (;;) {
                    const double x = g.uniform();
                    const double accept =
                        std::exp(beta * (std::cos(2.0 * std::numbers::pi * x) - 1.0));
                    if (g.uniform() < accept) return x;
                }
            };
        }
        default:
            throw ConfigError("initial: this kind needs a finite kernel");
    }
}

Binning<int> make_binning_finite(const BinningSpec& spec, int n_states) {
    switch (spec.kind) {
        case BinningSpec::Kind::kPerState:
            return per_state_binning(n_states);
        case BinningSpec::Kind::kCustomTable: {
            if (static_cast<int>(spec.table.size()) != n_states)
                throw ConfigError("binning.table: size must match the state count");
            return custom_table_binning(spec.table);
        }
        case BinningSpec::Kind::kUniformTorus:
            throw ConfigError("binning: uniform_torus needs a torus kernel");
    }
    throw ConfigError("binning: unsupported kind");
}

Binning<double> make_binning_torus(const BinningSpec& spec) {
    if (spec.kind != BinningSpec::Kind::kUniformTorus)
        throw ConfigError("binning: torus kernels support uniform_torus binning");
    return uniform_torus_binning(spec.count);
}

SmcPotential<int> make_potential_finite(const PotentialSpec& spec) {
    switch (spec.kind) {
        case PotentialSpec::Kind::kStateAffine: {
            const double a = spec.scale, b = spec.offset;
            return {[a, b](const int& x, int) { return a * x + b; }};
        }
        case PotentialSpec::Kind::kConstant: {
            const double c = spec.value;
            return {[c](const int&, int) { return c; }};
        }
        default:
            throw ConfigError("potential: this kind needs a torus kernel");
    }
}

SmcPotential<double> make_potential_torus(const PotentialSpec& spec) {
    switch (spec.kind) {
        case PotentialSpec::Kind::kGaussWell: {
            const double c = spec.center, k = spec.stiffness;
            return {[c, k](const double& x, int) { return std::exp(-k * (x - c) * (x - c)); }};
        }
        case PotentialSpec::Kind::kConstant: {
            const double v = spec.value;
            return {[v](const double&, int) { return v; }};
        }
        default:
            throw ConfigError("potential: this kind needs a finite kernel");
    }
}

// ---------------------------------------------------------------------------
// replicate runner

struct ReplicateValues {
    double theta = std::numeric_limits<double>::quiet_NaN();
    double theta_bar = std::numeric_limits<double>::quiet_NaN();
    double theta_tilde = std::numeric_limits<double>::quiet_NaN();

    double get(EstimatorKind kind) const {
        switch (kind) {
            case EstimatorKind::kTheta: return theta;
            case EstimatorKind::kThetaBar: return theta_bar;
            case EstimatorKind::kThetaTilde: return theta_tilde;
        }
        return theta;
    }
};

template <class Kernel>
struct PointPlan {
    using State = typename Kernel::State;
    int n = 0;
    int horizon = 0;
    Binning<State> binning;
    SmcPotential<State> potential;
    std::optional<HorizonFunctions> hf;
    Observable<State> f;
    std::function<State(RngStream&)> nu;
    bool lineage = false;
    SchemeSpec<State> scheme;  // wired to the members above; plan must stay put
};

template <class Kernel>
ReplicateValues run_replicate(const Kernel& kernel, const PointPlan<Kernel>& plan,
                              const ReplicateContext& ctx) {
    auto ens = init_ensemble<typename Kernel::State>(plan.nu, plan.n, ctx,
                                                     plan.lineage ? &plan.f : nullptr);
    TimeAverageAccumulator acc(plan.horizon);
    for (int t = 0; t < plan.horizon; ++t) {
        acc.accumulate(ens, plan.f);
        if (t + 1 < plan.horizon) ens = step(ens, plan.scheme, kernel, plan.f, ctx);
    }
    ReplicateValues out;
    out.theta = acc.value();
    out.theta_bar = marginal_average(ens, plan.f);
    if (plan.lineage) out.theta_tilde = ancestral_time_average(ens, plan.horizon);
    return out;
}

bool needs_lineage(const ExperimentConfig& cfg) {
    for (auto e : cfg.estimators)
        if (e == EstimatorKind::kThetaTilde) return true;
    return false;
}

template <class Kernel>
PointPlan<Kernel> build_plan(const Kernel& kernel, const ExperimentConfig& cfg, int n, int T) {
    PointPlan<Kernel> plan;
    plan.n = n;
    plan.horizon = T;
    plan.lineage = needs_lineage(cfg);
    plan.scheme.kind = cfg.scheme;
    plan.scheme.allocation = cfg.allocation;

    if constexpr (std::is_same_v<Kernel, FiniteKernel>) {
        plan.f = make_observable_finite(cfg.observable, kernel.size());
        plan.nu = make_initial_finite(cfg.initial, kernel);
        if (cfg.scheme == SchemeKind::kWeMultinomial || cfg.scheme == SchemeKind::kWeResidual) {
            plan.binning = make_binning_finite(cfg.binning, kernel.size());
            plan.scheme.binning = &plan.binning;
        }
        if (cfg.scheme == SchemeKind::kSmcGb) {
            plan.potential = make_potential_finite(cfg.potential);
            plan.scheme.potential = &plan.potential;
        }
        if (cfg.scheme == SchemeKind::kOptimal) {
            plan.hf = horizon_functions(kernel, plan.f, T);
            const HorizonFunctions* hf = &*plan.hf;
            plan.scheme.kh = [hf](const int& x, int t) { return hf->kh(t, x); };
        }
    } else {
        plan.f = make_observable_torus(cfg.observable);
        plan.nu = make_initial_torus(cfg.initial);
        if (cfg.scheme == SchemeKind::kWeMultinomial || cfg.scheme == SchemeKind::kWeResidual) {
            plan.binning = make_binning_torus(cfg.binning);
            plan.scheme.binning = &plan.binning;
        }
        if (cfg.scheme == SchemeKind::kSmcGb) {
            plan.potential = make_potential_torus(cfg.potential);
            plan.scheme.potential = &plan.potential;
        }
        if (cfg.scheme == SchemeKind::kOptimal)
            throw ConfigError("scheme: optimal selection requires a finite kernel");
    }
    return plan;
}

template <class Kernel>
void run_sweep(const Kernel& kernel, const ExperimentConfig& cfg, const RunOptions& options,
               ResultsTable& table) {
    const size_t points = cfg.sweep_is_t ? cfg.t_values.size() : cfg.n_values.size();
    for (size_t s = 0; s < points; ++s) {
        const int n = static_cast<int>(cfg.sweep_is_t ? cfg.n_values.front() : cfg.n_values[s]);
        const int T = static_cast<int>(cfg.sweep_is_t ? cfg.t_values[s] : cfg.t_values.front());
        const PointPlan<Kernel> plan = build_plan(kernel, cfg, n, T);

        const long m = cfg.replicates;
        std::vector<ReplicateValues> values(m);
        parallel_blocks(m, options.threads, [&](long lo, long hi) {
            for (long r = lo; r < hi; ++r) {
                const ReplicateContext ctx{
                    cfg.seed, static_cast<std::uint32_t>(s * static_cast<size_t>(m) + r)};
                values[r] = run_replicate(kernel, plan, ctx);
            }
        });

        std::vector<double> column(m);
        for (EstimatorKind est : cfg.estimators) {
            for (long r = 0; r < m; ++r) column[r] = values[r].get(est);
            const ReplicateStats stats = replicate_stats(column);
            table.rows.push_back({static_cast<double>(cfg.sweep_is_t ? T : n),
                                  estimator_name(est), stats.mean, std::sqrt(stats.variance),
                                  stats.stderr_mean, stats.n});
        }
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const njson& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;

    cfg.kernel = parse_kernel(need(j, "kernel", "config"), "config.kernel");
    cfg.scheme = [&] {
        try {
            return scheme_from_name(need_string(j, "scheme", "config"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config.scheme: ") + e.what());
        }
    }();

    const bool is_we =
        cfg.scheme == SchemeKind::kWeMultinomial || cfg.scheme == SchemeKind::kWeResidual;
    if (is_we) {
        cfg.binning = parse_binning(need(j, "binning", "config"), "config.binning");
        cfg.allocation = j.contains("allocation")
                             ? parse_allocation(j.at("allocation"), "config.allocation")
                             : AllocationPolicy::uniform();
    }
    if (cfg.scheme == SchemeKind::kSmcGb)
        cfg.potential = parse_potential(need(j, "potential", "config"), "config.potential");

    cfg.initial = parse_initial(need(j, "initial", "config"), "config.initial");
    cfg.observable = parse_observable(need(j, "observable", "config"), "config.observable");

    const njson& est = need(j, "estimators", "config");
    if (!est.is_array() || est.empty())
        throw ConfigError("config.estimators: expected a non-empty array");
    for (const auto& e : est) {
        if (!e.is_string()) throw ConfigError("config.estimators: entries must be strings");
        const EstimatorKind kind = estimator_from_name(e.get<std::string>());
        for (auto existing : cfg.estimators)
            if (existing == kind) throw ConfigError("config.estimators: duplicate entry");
        cfg.estimators.push_back(kind);
    }

    cfg.n_values = parse_grid(j, "N", "config");
    cfg.t_values = parse_grid(j, "T", "config");
    if (cfg.n_values.size() > 1 && cfg.t_values.size() > 1)
        throw ConfigError("config: only one of N and T may be a grid");
    cfg.sweep_is_t = cfg.n_values.size() <= 1;

    cfg.replicates = need_integer(j, "replicates", "config");
    if (cfg.replicates < 1) throw ConfigError("config.replicates: must be >= 1");
    const long seed = need_integer(j, "seed", "config");
    if (seed < 0) throw ConfigError("config.seed: must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    if (j.contains("output")) cfg.output = need_string(j, "output", "config");

    // cross-validation that does not need the state type
    if (cfg.scheme == SchemeKind::kOptimal &&
        !std::holds_alternative<FiniteKernel>(cfg.kernel))
        throw ConfigError("config.scheme: optimal selection requires a finite kernel");
    if (cfg.scheme == SchemeKind::kOptimal) {
        const auto& k = std::get<FiniteKernel>(cfg.kernel);
        const Observable<int> f = make_observable_finite(cfg.observable, k.size());
        for (int x = 0; x < k.size(); ++x)
            if (!(f(x) > 0.0))
                throw ConfigError("config.observable: optimal selection requires f > 0");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    njson j;
    try {
        in >> j;
    } catch (const njson::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

ResultsTable run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    ResultsTable table;
    table.sweep_name = cfg.sweep_is_t ? "T" : "N";
    table.config_hash = fnv1a_hex(cfg.raw.dump());
    table.version = kVersion;

    std::visit([&](const auto& kernel) { run_sweep(kernel, cfg, options, table); }, cfg.kernel);

    table.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return table;
}

ScalingReport compare_scaling(const ResultsTable& table, ScalingLaw law,
                              const std::string& estimator) {
    ScalingReport report;
    for (const auto& row : table.rows) {
        if (row.estimator != estimator) continue;
        const double scale = std::sqrt(row.sweep);
        report.scaled.emplace_back(row.sweep, law == ScalingLaw::kInvSqrtT
                                                  ? row.std_dev * scale
                                                  : row.std_dev / scale);
    }
    if (report.scaled.size() < 3)
        throw std::invalid_argument("compare_scaling needs at least 3 grid points");

    double lo = report.scaled.front().second, hi = lo;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (auto [sweep, scaled] : report.scaled) {
        lo = std::min(lo, scaled);
        hi = std::max(hi, scaled);
        const double std_dev =
            law == ScalingLaw::kInvSqrtT ? scaled / std::sqrt(sweep) : scaled * std::sqrt(sweep);
        if (!(std_dev > 0.0))
            throw std::invalid_argument("compare_scaling requires positive deviations");
        const double x = std::log(sweep), y = std::log(std_dev);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    report.ratio_max_min = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    report.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return report;
}

std::string results_to_csv(const ResultsTable& table) {
    std::string out = "sweep,estimator,mean,std,stderr,replicates\n";
    for (const auto& row : table.rows) {
        out += format_double(row.sweep);
        out += ',';
        out += row.estimator;
        out += ',';
        out += format_double(row.mean);
        out += ',';
        out += format_double(row.std_dev);
        out += ',';
        out += format_double(row.std_err);
        out += ',';
        out += std::to_string(row.replicates);
        out += '\n';
    }
    return out;
}

njson results_to_json(const ResultsTable& table) {
    njson rows = njson::array();
    for (const auto& row : table.rows)
        rows.push_back({{"sweep", row.sweep},
                        {"estimator", row.estimator},
                        {"mean", row.mean},
                        {"std", row.std_dev},
                        {"stderr", row.std_err},
                        {"replicates", row.replicates}});
    return {{"sweep", table.sweep_name},
            {"rows", rows},
            {"config_hash", table.config_hash},
            {"version", table.version},
            {"wall_seconds", table.wall_seconds}};
}

ResultsTable results_from_json(const njson& j) {
    ResultsTable table;
    table.sweep_name = j.at("sweep").get<std::string>();
    table.config_hash = j.at("config_hash").get<std::string>();
    table.version = j.at("version").get<std::string>();
    table.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& row : j.at("rows"))
        table.rows.push_back({row.at("sweep").get<double>(),
                              row.at("estimator").get<std::string>(),
                              row.at("mean").get<double>(), row.at("std").get<double>(),
                              row.at("stderr").get<double>(), row.at("replicates").get<long>()});
    return table;
}

void emit_results(const ResultsTable& table, OutputFormat format,
                  const std::filesystem::path& path) {
    std::string payload;
    switch (format) {
        case OutputFormat::kCsv:
            payload = results_to_csv(table);
            break;
        case OutputFormat::kJson:
            payload = results_to_json(table).dump(2);
            payload += '\n';
            break;
        case OutputFormat::kGnuplotDat: {
            payload = "# sweep estimator mean std stderr replicates\n";
            for (const auto& row : table.rows) {
                payload += format_double(row.sweep);
                payload += ' ';
                payload += row.estimator;
                payload += ' ';
                payload += format_double(row.mean);
                payload += ' ';
                payload += format_double(row.std_dev);
                payload += ' ';
                payload += format_double(row.std_err);
                payload += ' ';
                payload += std::to_string(row.replicates);
                payload += '\n';
            }
            break;
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << payload;
    if (!out) throw std::runtime_error("failed writing output file: " + path.string());
}

std::unique_ptr<AuditBundle> make_audit_bundle(const ExperimentConfig& cfg) {
    if (!std::holds_alternative<FiniteKernel>(cfg.kernel))
        throw ConfigError("audit: a finite kernel is required");
    if (cfg.n_values.size() != 1 || cfg.t_values.size() != 1)
        throw ConfigError("audit: N and T must be single values");

    auto bundle = std::make_unique<AuditBundle>(
        AuditBundle{std::get<FiniteKernel>(cfg.kernel), AuditSetup{}});
    AuditSetup& setup = bundle->setup;
    setup.kernel = &bundle->kernel;
    setup.f = make_observable_finite(cfg.observable, bundle->kernel.size());
    setup.nu = make_initial_finite(cfg.initial, bundle->kernel);
    setup.scheme = cfg.scheme;
    setup.allocation = cfg.allocation;
    if (cfg.scheme == SchemeKind::kWeMultinomial || cfg.scheme == SchemeKind::kWeResidual)
        setup.binning = make_binning_finite(cfg.binning, bundle->kernel.size());
    if (cfg.scheme == SchemeKind::kSmcGb)
        setup.potential = make_potential_finite(cfg.potential);
    setup.n_particles = static_cast<int>(cfg.n_values.front());
    setup.horizon = static_cast<int>(cfg.t_values.front());
    setup.seed = cfg.seed;
    return bundle;
}

njson audit_to_json(const DoobAudit& audit, SchemeKind scheme) {
    njson steps = njson::array();
    for (const auto& s : audit.mean_step_terms)
        steps.push_back(
            {{"t", s.t}, {"mutation", s.mutation_term}, {"selection", s.selection_term}});
    return {{"scheme", scheme_name(scheme)},
            {"replicates", audit.replicates},
            {"empirical_var", audit.empirical_var},
            {"empirical_var_se", audit.empirical_var_se},
            {"initial_term", audit.initial_term},
            {"initial_term_se", audit.initial_term_se},
            {"sum_mutation", audit.sum_mutation},
            {"sum_mutation_se", audit.sum_mutation_se},
            {"sum_selection", audit.sum_selection},
            {"sum_selection_se", audit.sum_selection_se},
            {"predicted_var", audit.predicted_var()},
            {"discrepancy", audit.discrepancy()},
            {"combined_se", audit.combined_se()},
            {"passes", audit.passes()},
            {"mean_step_terms", steps}};
}

}  // namespace wesample
