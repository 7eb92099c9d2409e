#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "wesample/ensemble.hpp"
#include "wesample/estimators.hpp"
#include "wesample/kernels.hpp"

namespace wesample {

// Count of tiny negative variance evaluations clipped to zero (values in
// (-1e-12, 0) from cancellation); anything more negative throws.
std::atomic<long>& negative_clip_count();

// Conditional variance contributed by the mutation step at time t, given the
// post-selection ensemble:
//   (1/T^2) sum_i w_hat_i^2 [ K(h_{t+1}^2)(x_i) - (K h_{t+1}(x_i))^2 ].
double mutation_variance(const EnsembleState<int>& post_selection, const FiniteKernel& k,
                         const HorizonFunctions& hf, int t, int T);

// Conditional variance contributed by the selection step at time t, given
// the pre-selection ensemble. Per scheme:
//  - WE multinomial: per bin, (w(u)^2/N(u)) * within-bin variance of Kh_{t+1}
//    under probabilities w_i/w(u);
//  - WE residual: per bin, (w(u)/N(u))^2 * delta(u) * within-bin variance of
//    Kh_{t+1} under probabilities delta_i/delta(u);
//  - SMC: sum_i (w_i^2/beta_i) Kh_i^2 - (1/N)(sum_i w_i Kh_i)^2;
//  - DMC and optimal-control selection: zero.
double selection_variance_we_multinomial(const EnsembleState<int>& pre, const BinLayout& layout,
                                         const HorizonFunctions& hf, int t, int T);
double selection_variance_we_residual(const EnsembleState<int>& pre, const BinLayout& layout,
                                      const HorizonFunctions& hf, int t, int T);
double selection_variance_smc(const EnsembleState<int>& pre, const SmcPotential<int>& pot,
                              const HorizonFunctions& hf, int t, int T);

double selection_variance(const EnsembleState<int>& pre, const SchemeSpec<int>& scheme,
                          const HorizonFunctions& hf, int t, int T);

// One step's evaluated variance terms.
struct VarianceReport {
    int t = 0;
    double mutation_term = 0.0;
    double selection_term = 0.0;
    SchemeKind scheme = SchemeKind::kDmc;
};

// Inputs for the Doob-decomposition audit on a finite chain.
struct AuditSetup {
    const FiniteKernel* kernel = nullptr;
    std::function<int(RngStream&)> nu;
    Observable<int> f;
    SchemeKind scheme = SchemeKind::kWeMultinomial;
    Binning<int> binning;         // WE schemes
    AllocationPolicy allocation;  // WE schemes
    SmcPotential<int> potential;  // smc_gb
    int n_particles = 0;
    int horizon = 0;
    std::uint64_t seed = 0;
};

// Var(theta_T) split into the initial-condition term plus accumulated
// per-step mutation and selection variances. The decomposition is exact in
// expectation; the audit passes when the empirical variance matches the sum
// within n_se combined standard errors.
struct DoobAudit {
    long replicates = 0;
    double empirical_var = 0.0, empirical_var_se = 0.0;
    double initial_term = 0.0, initial_term_se = 0.0;
    double sum_mutation = 0.0, sum_mutation_se = 0.0;
    double sum_selection = 0.0, sum_selection_se = 0.0;
    std::vector<VarianceReport> mean_step_terms;  // per t, averaged over replicates

    double predicted_var() const { return initial_term + sum_mutation + sum_selection; }
    double discrepancy() const { return empirical_var - predicted_var(); }
    double combined_se() const {
        return std::sqrt(empirical_var_se * empirical_var_se + initial_term_se * initial_term_se +
                         sum_mutation_se * sum_mutation_se + sum_selection_se * sum_selection_se);
    }
    bool passes(double n_se = 4.0) const { return std::abs(discrepancy()) <= n_se * combined_se(); }
};

DoobAudit doob_audit(const AuditSetup& setup, long replicates, int threads = 1);

// Variance estimates for the three-state example: bracketing bounds for
// weighted ensemble with uniform allocation over occupied per-state bins,
// and the direct Monte Carlo approximation. Valid for small delta (the
// derivation drops O(delta^4)); N should be a multiple of 6.
struct ThreeStatePrediction {
    double we_lower = 0.0;
    double we_upper = 0.0;
    double dmc = 0.0;
};

ThreeStatePrediction predict_three_state(double delta, int n, int T);

// Variance estimates for the periodic three-state example: Var(theta_T)
// for any allocation, and Var(theta_tilde_T) for the N2 = 1 and N2 = N/2
// allocations (the latter via the coupon-collector root-coalescence time).
enum class PeriodicVariant { kTheta, kTildeN2One, kTildeHalf };

double coupon_collector_steps(int n);
double predict_periodic(int n, int T, PeriodicVariant variant);

}  // namespace wesample
