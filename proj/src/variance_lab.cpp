#include "wesample/variance_lab.hpp"

#include <algorithm>

#include "wesample/parallel.hpp"

namespace wesample {

namespace {

constexpr double kNegativeClip = -1e-12;

double clip_variance(double v, const char* where) {
    if (v >= 0.0) return v;
    if (v >= kNegativeClip) {
        ++negative_clip_count();
        return 0.0;
    }
    throw InvariantError(std::string(where) + ": variance evaluated below -1e-12");
}

void check_time(int t, int T, const HorizonFunctions& hf, const char* where) {
    if (T != hf.horizon)
        throw std::invalid_argument(std::string(where) + ": T does not match horizon functions");
    if (t < 0 || t >= T) throw std::invalid_argument(std::string(where) + ": t must be in [0, T)");
}

}  // namespace

std::atomic<long>& negative_clip_count() {
    static std::atomic<long> count{0};
    return count;
}

double mutation_variance(const EnsembleState<int>& post_selection, const FiniteKernel& k,
                         const HorizonFunctions& hf, int t, int T) {
    check_time(t, T, hf, "mutation_variance");
    if (post_selection.phase != Phase::kAfterSelection)
        throw std::logic_error("mutation_variance expects a post-selection ensemble");
    if (t == T - 1) return 0.0;  // h_T == 0

    // Var_{K(x,.)}(h_{t+1}) per state, centered for accuracy.
    const int n = k.size();
    const auto h_next = hf.h.row(t + 1);
    const auto kh = hf.kh.row(t);
    Eigen::VectorXd state_var(n);
    for (int x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int y = 0; y < n; ++y) {
            const double d = h_next(y) - kh(x);
            acc += k.matrix()(x, y) * d * d;
        }
        state_var(x) = acc;
    }

    KahanSum total;
    for (const auto& p : post_selection.particles)
        total.add(p.weight * p.weight * state_var(p.state));
    return clip_variance(total.value(), "mutation_variance") / (static_cast<double>(T) * T);
}

double selection_variance_we_multinomial(const EnsembleState<int>& pre, const BinLayout& layout,
                                         const HorizonFunctions& hf, int t, int T) {
    check_time(t, T, hf, "selection_variance");
    const auto kh = hf.kh.row(t);
    KahanSum total;
    for (int u = 0; u < layout.bin_count(); ++u) {
        const int lo = layout.bin_begin[u];
        const int hi = layout.bin_begin[u + 1];
        if (hi == lo) continue;
        const double wu = layout.bin_weights[u];
        double mean = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            const auto& p = pre.particles[layout.sorted_by_bin[idx]];
            mean += (p.weight / wu) * kh(p.state);
        }
        double var = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            const auto& p = pre.particles[layout.sorted_by_bin[idx]];
            const double d = kh(p.state) - mean;
            var += (p.weight / wu) * d * d;
        }
        total.add(wu * wu / layout.allocation[u] * var);
    }
    return clip_variance(total.value(), "selection_variance") / (static_cast<double>(T) * T);
}

double selection_variance_we_residual(const EnsembleState<int>& pre, const BinLayout& layout,
                                      const HorizonFunctions& hf, int t, int T) {
    check_time(t, T, hf, "selection_variance");
    const auto kh = hf.kh.row(t);
    KahanSum total;
    for (int u = 0; u < layout.bin_count(); ++u) {
        const int lo = layout.bin_begin[u];
        const int hi = layout.bin_begin[u + 1];
        if (hi == lo) continue;
        const double wu = layout.bin_weights[u];
        const int nu = layout.allocation[u];
        double delta_u = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            const auto& p = pre.particles[layout.sorted_by_bin[idx]];
            const double beta = nu * p.weight / wu;
            delta_u += beta - std::floor(beta);
        }
        if (delta_u <= 0.0) continue;
        double mean = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            const auto& p = pre.particles[layout.sorted_by_bin[idx]];
            const double beta = nu * p.weight / wu;
            mean += (beta - std::floor(beta)) / delta_u * kh(p.state);
        }
        double var = 0.0;
        for (int idx = lo; idx < hi; ++idx) {
            const auto& p = pre.particles[layout.sorted_by_bin[idx]];
            const double beta = nu * p.weight / wu;
            const double d = kh(p.state) - mean;
            var += (beta - std::floor(beta)) / delta_u * d * d;
        }
        total.add((wu / nu) * (wu / nu) * delta_u * var);
    }
    return clip_variance(total.value(), "selection_variance") / (static_cast<double>(T) * T);
}

double selection_variance_smc(const EnsembleState<int>& pre, const SmcPotential<int>& pot,
                              const HorizonFunctions& hf, int t, int T) {
    check_time(t, T, hf, "selection_variance");
    const auto kh = hf.kh.row(t);
    const int n = pre.size();
    KahanSum sum_wv;
    for (const auto& p : pre.particles) {
        const double v = pot.v(p.state, t);
        if (!(v > 0.0)) throw std::domain_error("smc potential must be positive");
        sum_wv.add(p.weight * v);
    }
    const double s = sum_wv.value();
    KahanSum first;   // sum_i (w_i^2 / beta_i) Kh_i^2 with beta_i = N w_i V_i / s
    KahanSum linear;  // sum_i w_i Kh_i
    for (const auto& p : pre.particles) {
        const double v = pot.v(p.state, t);
        const double khx = kh(p.state);
        first.add(p.weight * s / (n * v) * khx * khx);
        linear.add(p.weight * khx);
    }
    const double raw = first.value() - linear.value() * linear.value() / n;
    return clip_variance(raw, "selection_variance") / (static_cast<double>(T) * T);
}

double selection_variance(const EnsembleState<int>& pre, const SchemeSpec<int>& scheme,
                          const HorizonFunctions& hf, int t, int T) {
    switch (scheme.kind) {
        case SchemeKind::kDmc:
        case SchemeKind::kOptimal:
            check_time(t, T, hf, "selection_variance");
            return 0.0;
        case SchemeKind::kWeMultinomial:
        case SchemeKind::kWeResidual: {
            if (!scheme.binning) throw std::invalid_argument("selection_variance: WE needs binning");
            const BinLayout layout = make_layout(pre, *scheme.binning, scheme.allocation);
            return scheme.kind == SchemeKind::kWeMultinomial
                       ? selection_variance_we_multinomial(pre, layout, hf, t, T)
                       : selection_variance_we_residual(pre, layout, hf, t, T);
        }
        case SchemeKind::kSmcGb:
            if (!scheme.potential)
                throw std::invalid_argument("selection_variance: SMC needs potential");
            return selection_variance_smc(pre, *scheme.potential, hf, t, T);
    }
    throw std::logic_error("unreachable scheme kind");
}

DoobAudit doob_audit(const AuditSetup& setup, long replicates, int threads) {
    if (!setup.kernel) throw std::invalid_argument("doob_audit: kernel required");
    if (replicates < 2) throw std::invalid_argument("doob_audit: need at least 2 replicates");
    const int T = setup.horizon;
    const int n_particles = setup.n_particles;
    if (T < 1 || n_particles < 1) throw std::invalid_argument("doob_audit: bad N or T");

    const HorizonFunctions hf = horizon_functions(*setup.kernel, setup.f, T);

    SchemeSpec<int> scheme;
    scheme.kind = setup.scheme;
    scheme.binning = &setup.binning;
    scheme.allocation = setup.allocation;
    scheme.potential = &setup.potential;
    if (setup.scheme == SchemeKind::kOptimal)
        scheme.kh = [&hf](const int& x, int t) { return hf.kh(t, x); };

    std::vector<double> thetas(replicates), d0s(replicates);
    std::vector<double> sel_sums(replicates), mut_sums(replicates);
    const bool keep_steps = static_cast<long>(T) * replicates <= 50'000'000L;
    std::vector<double> step_sel, step_mut;  // [r * (T-1) + t], reduced in order later
    if (keep_steps && T > 1) {
        step_sel.assign(replicates * (T - 1), 0.0);
        step_mut.assign(replicates * (T - 1), 0.0);
    }

    parallel_blocks(replicates, threads, [&](long lo, long hi) {
        for (long r = lo; r < hi; ++r) {
            const ReplicateContext ctx{setup.seed, static_cast<std::uint32_t>(r)};
            auto ens = init_ensemble<int>(setup.nu, n_particles, ctx);
            KahanSum d0;
            for (const auto& p : ens.particles) d0.add(p.weight * hf.h(0, p.state));
            d0s[r] = d0.value() / T;

            TimeAverageAccumulator acc(T);
            KahanSum sel_total, mut_total;
            for (int t = 0; t < T; ++t) {
                acc.accumulate(ens, setup.f);
                if (t == T - 1) break;
                const double sv = selection_variance(ens, scheme, hf, t, T);
                RngStream sel_stream = ctx.selection_stream(static_cast<std::uint32_t>(t));
                auto after = apply_selection(ens, select(ens, scheme, sel_stream));
                const double mv = mutation_variance(after, *setup.kernel, hf, t, T);
                sel_total.add(sv);
                mut_total.add(mv);
                if (!step_sel.empty()) {
                    step_sel[r * (T - 1) + t] = sv;
                    step_mut[r * (T - 1) + t] = mv;
                }
                ens = mutate(std::move(after), *setup.kernel, setup.f, ctx);
            }
            thetas[r] = acc.value();
            sel_sums[r] = sel_total.value();
            mut_sums[r] = mut_total.value();
        }
    });

    DoobAudit audit;
    audit.replicates = replicates;
    const MomentStats theta_stats = moment_stats(thetas);
    audit.empirical_var = theta_stats.base.variance;
    audit.empirical_var_se = theta_stats.stderr_variance;
    const MomentStats d0_stats = moment_stats(d0s);
    audit.initial_term = d0_stats.base.variance;
    audit.initial_term_se = d0_stats.stderr_variance;
    const ReplicateStats mut_stats = replicate_stats(mut_sums);
    audit.sum_mutation = mut_stats.mean;
    audit.sum_mutation_se = mut_stats.stderr_mean;
    const ReplicateStats sel_stats = replicate_stats(sel_sums);
    audit.sum_selection = sel_stats.mean;
    audit.sum_selection_se = sel_stats.stderr_mean;

    if (!step_sel.empty()) {
        audit.mean_step_terms.resize(T - 1);
        for (int t = 0; t < T - 1; ++t) {
            KahanSum s, m;
            for (long r = 0; r < replicates; ++r) {
                s.add(step_sel[r * (T - 1) + t]);
                m.add(step_mut[r * (T - 1) + t]);
            }
            audit.mean_step_terms[t] = {t, m.value() / replicates, s.value() / replicates,
                                        setup.scheme};
        }
    }
    return audit;
}

ThreeStatePrediction predict_three_state(double delta, int n, int T) {
    if (n < 1 || T < 1) throw std::invalid_argument("predict_three_state: bad N or T");
    const double d2 = delta * delta;
    const double d3 = d2 * delta;
    const double nt = static_cast<double>(n) * T;
    ThreeStatePrediction out;
    out.we_lower = (2.0 * d3 + (d2 - 4.0 * d3) / n) / nt;
    out.we_upper = 3.0 * (2.0 * d3 + 3.0 * (d2 - 4.0 * d3) / n) / nt;
    out.dmc = (d2 - d3) / nt;
    return out;
}

double coupon_collector_steps(int n) {
    const double nn = n;
    return (nn * std::log(nn) + 0.58 * nn) / (0.4 * std::sqrt(nn));
}

double predict_periodic(int n, int T, PeriodicVariant variant) {
    if (n < 2 || T < 1) throw std::invalid_argument("predict_periodic: bad N or T");
    const double nt = static_cast<double>(n) * T;
    switch (variant) {
        case PeriodicVariant::kTheta:
            return 1.0 / (8.0 * nt);
        case PeriodicVariant::kTildeN2One:
            return 1.0 / (8.0 * T);
        case PeriodicVariant::kTildeHalf: {
            const double ell = coupon_collector_steps(n);
            return (T - ell) / (8.0 * static_cast<double>(T) * T);
        }
    }
    throw std::logic_error("unreachable periodic variant");
}

}  // namespace wesample
