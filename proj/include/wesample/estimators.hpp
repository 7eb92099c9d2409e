#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "wesample/ensemble.hpp"
#include "wesample/kahan.hpp"
#include "wesample/observable.hpp"

namespace wesample {

// Running ensemble time average theta_T = (1/T) sum_{t<T} sum_i w_t^i f(x_t^i).
// Fed once per time index with the pre-selection ensemble, starting at t = 0.
class TimeAverageAccumulator {
   public:
    explicit TimeAverageAccumulator(int horizon) : horizon_(horizon) {
        if (horizon < 1) throw std::invalid_argument("time average requires T >= 1");
    }

    template <class State>
    void accumulate(const EnsembleState<State>& ens, const Observable<State>& f) {
        if (ens.phase != Phase::kBeforeSelection)
            throw std::logic_error("accumulate expects a pre-selection ensemble");
        if (seen_ >= horizon_)
            throw std::logic_error("accumulate called more than T times");
        KahanSum inner;
        for (const auto& p : ens.particles) inner.add(p.weight * f(p.state));
        running_.add(inner.value());
        ++seen_;
    }

    double value() const { return running_.value() / horizon_; }
    int steps_seen() const { return seen_; }
    int horizon() const { return horizon_; }

   private:
    KahanSum running_;
    int seen_ = 0;
    int horizon_;
};

// Time-marginal average theta_bar_T = sum_i w_{T-1}^i f(x_{T-1}^i).
template <class State>
double marginal_average(const EnsembleState<State>& ens, const Observable<State>& f) {
    KahanSum s;
    for (const auto& p : ens.particles) s.add(p.weight * f(p.state));
    return s.value();
}

// Ancestral-line time average theta_tilde_T = (1/T) sum_i w_{T-1}^i L_i,
// where L_i is the lineage sum of f carried on the particle.
template <class State>
double ancestral_time_average(const EnsembleState<State>& ens, int horizon) {
    if (!ens.lineage_enabled)
        throw std::logic_error("ancestral_time_average: lineage tracking is disabled");
    if (horizon < 1) throw std::invalid_argument("ancestral_time_average requires T >= 1");
    KahanSum s;
    for (const auto& p : ens.particles) s.add(p.weight * p.lineage_sum);
    return s.value() / horizon;
}

struct ReplicateStats {
    long n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance
    double stderr_mean = 0.0;
};

// Mean, unbiased sample variance and standard error of replicate values.
ReplicateStats replicate_stats(std::span<const double> values);

// As above plus the standard error of the sample variance itself, from the
// fourth central moment: Var(s^2) = (m4 - s^4 (n-3)/(n-1)) / n.
struct MomentStats {
    ReplicateStats base;
    double stderr_variance = 0.0;
};

MomentStats moment_stats(std::span<const double> values);

}  // namespace wesample
