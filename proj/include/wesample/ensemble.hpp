#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wesample/errors.hpp"
#include "wesample/kahan.hpp"
#include "wesample/kernels.hpp"
#include "wesample/observable.hpp"
#include "wesample/rng.hpp"

namespace wesample {

enum class Phase { kBeforeSelection, kAfterSelection };

enum class SchemeKind { kDmc, kWeMultinomial, kWeResidual, kSmcGb, kOptimal };

const char* scheme_name(SchemeKind kind);
SchemeKind scheme_from_name(const std::string& name);

// A particle carries its state, a positive weight, and the running sum of f
// along its ancestral line (enough to evaluate lineage time averages without
// storing paths).
template <class State>
struct Particle {
    State state{};
    double weight = 0.0;
    double lineage_sum = 0.0;
};

template <class State>
struct EnsembleState {
    std::vector<Particle<State>> particles;
    int time = 0;
    Phase phase = Phase::kBeforeSelection;
    bool lineage_enabled = false;

    int size() const { return static_cast<int>(particles.size()); }

    double total_weight() const {
        KahanSum s;
        for (const auto& p : particles) s.add(p.weight);
        return s.value();
    }
};

// Assigns each particle to exactly one bin label in {0..bin_count-1}; the
// rule may depend on the time index.
template <class State>
struct Binning {
    std::function<int(const State&, int t)> bin_of;
    int bin_count = 0;
};

inline Binning<int> per_state_binning(int n_states) {
    return {[](const int& x, int) { return x; }, n_states};
}

inline Binning<double> uniform_torus_binning(int count) {
    if (count < 1) throw std::invalid_argument("uniform torus binning needs count >= 1");
    return {[count](const double& x, int) {
                int b = static_cast<int>(x * count);
                return b >= count ? count - 1 : b;
            },
            count};
}

inline Binning<int> custom_table_binning(std::vector<int> table) {
    if (table.empty()) throw std::invalid_argument("custom binning table is empty");
    int top = 0;
    for (int b : table) {
        if (b < 0) throw std::invalid_argument("custom binning table has negative bin id");
        top = std::max(top, b);
    }
    return {[table = std::move(table)](const int& x, int) {
                if (x < 0 || x >= static_cast<int>(table.size()))
                    throw std::domain_error("state outside custom binning table");
                return table[x];
            },
            top + 1};
}

// How many children each bin receives. Output always satisfies: counts sum
// to N, occupied bins get >= 1 child, empty bins get 0.
struct AllocationPolicy {
    enum class Kind { kUniform, kProportionalFloor, kPeriodicExample, kCustom };

    Kind kind = Kind::kUniform;
    int periodic_n2 = 1;
    bool periodic_half = false;
    std::vector<int> custom;

    static AllocationPolicy uniform() { return {}; }
    static AllocationPolicy proportional_floor() {
        AllocationPolicy p;
        p.kind = Kind::kProportionalFloor;
        return p;
    }
    static AllocationPolicy periodic_example(int n2) {
        AllocationPolicy p;
        p.kind = Kind::kPeriodicExample;
        p.periodic_n2 = n2;
        return p;
    }
    static AllocationPolicy periodic_example_half() {
        AllocationPolicy p;
        p.kind = Kind::kPeriodicExample;
        p.periodic_half = true;
        return p;
    }
    static AllocationPolicy custom_counts(std::vector<int> counts) {
        AllocationPolicy p;
        p.kind = Kind::kCustom;
        p.custom = std::move(counts);
        return p;
    }
};

// Child counts per bin under the policy. `bin_weights` must sum to 1 within
// 1e-9 and N must cover the occupied bins.
std::vector<int> allocate(const AllocationPolicy& policy, const std::vector<double>& bin_weights,
                          int n, int t = 0);

// Bin assignment of one pre-selection ensemble: per-particle bin ids, bin
// weights, child allocation, and a counting-sort index (members of bin u are
// sorted_by_bin[bin_begin[u] .. bin_begin[u+1])) in ascending particle order.
struct BinLayout {
    std::vector<int> bin_of_particle;
    std::vector<double> bin_weights;
    std::vector<int> allocation;
    std::vector<int> sorted_by_bin;
    std::vector<int> bin_begin;

    int bin_count() const { return static_cast<int>(bin_weights.size()); }
};

void validate_layout(const BinLayout& layout, int n);

template <class State>
BinLayout make_layout(const EnsembleState<State>& ens, const Binning<State>& binning,
                      const AllocationPolicy& policy) {
    const int n = ens.size();
    const int b = binning.bin_count;
    BinLayout layout;
    layout.bin_of_particle.resize(n);
    layout.bin_weights.assign(b, 0.0);

    std::vector<KahanSum> sums(b);
    for (int i = 0; i < n; ++i) {
        const int u = binning.bin_of(ens.particles[i].state, ens.time);
        if (u < 0 || u >= b) throw InvariantError("bin id out of range");
        layout.bin_of_particle[i] = u;
        sums[u].add(ens.particles[i].weight);
    }
    for (int u = 0; u < b; ++u) layout.bin_weights[u] = sums[u].value();

    layout.allocation = allocate(policy, layout.bin_weights, n, ens.time);

    layout.bin_begin.assign(b + 1, 0);
    for (int i = 0; i < n; ++i) ++layout.bin_begin[layout.bin_of_particle[i] + 1];
    for (int u = 0; u < b; ++u) layout.bin_begin[u + 1] += layout.bin_begin[u];
    layout.sorted_by_bin.resize(n);
    std::vector<int> cursor(layout.bin_begin.begin(), layout.bin_begin.end() - 1);
    for (int i = 0; i < n; ++i) layout.sorted_by_bin[cursor[layout.bin_of_particle[i]]++] = i;

    validate_layout(layout, n);
    return layout;
}

// Positive fitness V_t used by the Gibbs-Boltzmann selection step.
template <class State>
struct SmcPotential {
    std::function<double(const State&, int t)> v;
};

// Everything a selection step produces: per-parent child counts and means,
// the child->parent map, per-child weights, and (residual scheme only) the
// fractional parts and their per-bin totals.
struct SelectionOutcome {
    std::vector<int> child_counts;
    std::vector<int> parent_of;
    std::vector<double> child_weights;
    std::vector<double> expected_counts;
    std::vector<double> residuals;
    std::vector<double> bin_residuals;
};

namespace detail {

// First index of `prefix` whose cumulative value exceeds target (ties go to
// the first index); clamped to the last entry to absorb rounding at the top.
int cdf_invert(const std::vector<double>& prefix, double target);

SelectionOutcome select_bins_multinomial(const std::vector<double>& weights,
                                         const BinLayout& layout, RngStream& rng);
SelectionOutcome select_bins_residual(const std::vector<double>& weights, const BinLayout& layout,
                                      RngStream& rng);
SelectionOutcome select_fitness_multinomial(const std::vector<double>& weights,
                                            const std::vector<double>& fitness, RngStream& rng);

template <class State>
std::vector<double> weights_of(const EnsembleState<State>& ens) {
    std::vector<double> w(ens.particles.size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = ens.particles[i].weight;
    return w;
}

template <class State>
void require_phase(const EnsembleState<State>& ens, Phase expected, const char* what) {
    if (ens.phase != expected)
        throw std::logic_error(std::string(what) + ": ensemble is in the wrong phase");
}

}  // namespace detail

// Direct Monte Carlo "selection": every parent has exactly one child.
template <class State>
SelectionOutcome select_dmc(const EnsembleState<State>& ens) {
    detail::require_phase(ens, Phase::kBeforeSelection, "select_dmc");
    const int n = ens.size();
    SelectionOutcome out;
    out.child_counts.assign(n, 1);
    out.parent_of.resize(n);
    out.child_weights.resize(n);
    out.expected_counts.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
        out.parent_of[i] = i;
        out.child_weights[i] = ens.particles[i].weight;
    }
    return out;
}

// Within each bin u, child counts are multinomial with N_t(u) trials and
// event probabilities w_i / w(u); bins are independent. Children in bin u
// all weigh w(u) / N_t(u).
template <class State>
SelectionOutcome select_we_multinomial(const EnsembleState<State>& ens, const BinLayout& layout,
                                       RngStream& rng) {
    detail::require_phase(ens, Phase::kBeforeSelection, "select_we_multinomial");
    return detail::select_bins_multinomial(detail::weights_of(ens), layout, rng);
}

// Residual resampling: C_i = floor(beta_i) deterministic copies plus a
// multinomial over the fractional parts, with delta(u) trials per bin.
// Means match the multinomial scheme; covariances are smaller.
template <class State>
SelectionOutcome select_we_residual(const EnsembleState<State>& ens, const BinLayout& layout,
                                    RngStream& rng) {
    detail::require_phase(ens, Phase::kBeforeSelection, "select_we_residual");
    return detail::select_bins_residual(detail::weights_of(ens), layout, rng);
}

// Sequential Monte Carlo selection with Gibbs-Boltzmann potential in its
// telescoped form: N trials with probabilities w_i V(x_i) / sum_j w_j V(x_j);
// a child of parent j weighs (1/V(x_j)) * sum_i w_i V(x_i) / N. Total weight
// is not preserved; the drift is part of the method, not corrected.
template <class State>
SelectionOutcome select_smc_gb(const EnsembleState<State>& ens, const SmcPotential<State>& pot,
                               RngStream& rng) {
    detail::require_phase(ens, Phase::kBeforeSelection, "select_smc_gb");
    std::vector<double> v(ens.particles.size());
    for (size_t i = 0; i < v.size(); ++i) {
        v[i] = pot.v(ens.particles[i].state, ens.time);
        if (!(v[i] > 0.0)) throw std::domain_error("smc potential must be positive");
    }
    return detail::select_fitness_multinomial(detail::weights_of(ens), v, rng);
}

// Optimal-control selection: fitness proportional to Kh_{t+1}. Makes the
// selection variance exactly zero; needs Kh > 0 at every particle.
template <class State>
SelectionOutcome select_optimal(const EnsembleState<State>& ens, const std::vector<double>& kh,
                                RngStream& rng) {
    detail::require_phase(ens, Phase::kBeforeSelection, "select_optimal");
    if (static_cast<int>(kh.size()) != ens.size())
        throw std::invalid_argument("select_optimal: one Kh value per particle required");
    for (double k : kh)
        if (!(k > 0.0)) throw std::invalid_argument("select_optimal requires Kh > 0");
    return detail::select_fitness_multinomial(detail::weights_of(ens), kh, rng);
}

// Instantiates children from a selection outcome. States and lineage sums
// are copied from parents; weights come from the outcome.
template <class State>
EnsembleState<State> apply_selection(const EnsembleState<State>& ens,
                                     const SelectionOutcome& outcome) {
    detail::require_phase(ens, Phase::kBeforeSelection, "apply_selection");
    if (static_cast<int>(outcome.parent_of.size()) != ens.size())
        throw InvariantError("selection did not produce N children");
    EnsembleState<State> out;
    out.time = ens.time;
    out.phase = Phase::kAfterSelection;
    out.lineage_enabled = ens.lineage_enabled;
    out.particles.resize(ens.particles.size());
    for (size_t c = 0; c < outcome.parent_of.size(); ++c) {
        const auto& parent = ens.particles[outcome.parent_of[c]];
        out.particles[c] = {parent.state, outcome.child_weights[c], parent.lineage_sum};
    }
    return out;
}

// Initial ensemble: N iid states from nu, each with weight 1/N. When an
// observable is supplied, lineage tracking starts with f at the initial
// state (the t = 0 term of the ancestral sums).
template <class State>
EnsembleState<State> init_ensemble(const std::function<State(RngStream&)>& nu, int n,
                                   const ReplicateContext& ctx,
                                   const Observable<State>* lineage_f = nullptr) {
    if (n < 1) throw std::invalid_argument("init_ensemble requires N >= 1");
    EnsembleState<State> ens;
    ens.lineage_enabled = lineage_f != nullptr;
    ens.particles.resize(n);
    const double w = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        RngStream stream = ctx.init_stream(static_cast<std::uint32_t>(i));
        const State x = nu(stream);
        ens.particles[i] = {x, w, lineage_f ? (*lineage_f)(x) : 0.0};
    }
    return ens;
}

// Mutation: children evolve independently under the kernel, weights
// unchanged; each particle draws from its own (replicate, t, particle)
// substream so thread scheduling cannot alter results.
template <markov_kernel Kernel, class State = typename Kernel::State>
EnsembleState<State> mutate(EnsembleState<State> ens, const Kernel& kernel,
                            const Observable<State>& f, const ReplicateContext& ctx) {
    detail::require_phase(ens, Phase::kAfterSelection, "mutate");
    const auto t = static_cast<std::uint32_t>(ens.time);
    for (size_t i = 0; i < ens.particles.size(); ++i) {
        RngStream stream = ctx.mutation_stream(t, static_cast<std::uint32_t>(i));
        auto& p = ens.particles[i];
        p.state = kernel.step(p.state, stream);
        if (ens.lineage_enabled) p.lineage_sum += f(p.state);
    }
    ens.time += 1;
    ens.phase = Phase::kBeforeSelection;
    return ens;
}

// Scheme inputs for a full step. WE schemes need binning + allocation, SMC
// needs the potential, optimal needs Kh_{t+1} as a function of (state, t).
template <class State>
struct SchemeSpec {
    SchemeKind kind = SchemeKind::kDmc;
    const Binning<State>* binning = nullptr;
    AllocationPolicy allocation;
    const SmcPotential<State>* potential = nullptr;
    std::function<double(const State&, int t)> kh;
};

template <class State>
SelectionOutcome select(const EnsembleState<State>& ens, const SchemeSpec<State>& scheme,
                        RngStream& rng) {
    switch (scheme.kind) {
        case SchemeKind::kDmc:
            return select_dmc(ens);
        case SchemeKind::kWeMultinomial:
        case SchemeKind::kWeResidual: {
            if (!scheme.binning) throw std::invalid_argument("WE scheme requires binning");
            const BinLayout layout = make_layout(ens, *scheme.binning, scheme.allocation);
            return scheme.kind == SchemeKind::kWeMultinomial
                       ? select_we_multinomial(ens, layout, rng)
                       : select_we_residual(ens, layout, rng);
        }
        case SchemeKind::kSmcGb:
            if (!scheme.potential) throw std::invalid_argument("SMC scheme requires potential");
            return select_smc_gb(ens, *scheme.potential, rng);
        case SchemeKind::kOptimal: {
            if (!scheme.kh) throw std::invalid_argument("optimal scheme requires Kh values");
            std::vector<double> kh(ens.particles.size());
            for (size_t i = 0; i < kh.size(); ++i)
                kh[i] = scheme.kh(ens.particles[i].state, ens.time);
            return select_optimal(ens, kh, rng);
        }
    }
    throw std::logic_error("unreachable scheme kind");
}

// One full selection + mutation iteration.
template <markov_kernel Kernel, class State = typename Kernel::State>
EnsembleState<State> step(const EnsembleState<State>& ens, const SchemeSpec<State>& scheme,
                          const Kernel& kernel, const Observable<State>& f,
                          const ReplicateContext& ctx) {
    detail::require_phase(ens, Phase::kBeforeSelection, "step");
    const bool conserves = scheme.kind == SchemeKind::kDmc ||
                           scheme.kind == SchemeKind::kWeMultinomial ||
                           scheme.kind == SchemeKind::kWeResidual;
    if (conserves) {
        const double drift = std::abs(ens.total_weight() - 1.0);
        if (drift > 1e-12 * (1.0 + ens.time))
            throw InvariantError("total weight drifted beyond 1e-12*(1+t)");
    }
    RngStream sel = ctx.selection_stream(static_cast<std::uint32_t>(ens.time));
    EnsembleState<State> after = apply_selection(ens, select(ens, scheme, sel));
    return mutate(std::move(after), kernel, f, ctx);
}

}  // namespace wesample
