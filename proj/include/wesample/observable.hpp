#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

namespace wesample {

// Bounded observable f with its sup bound M = sup|f|. Estimated time
// averages always lie in [-M, M] because ensemble weights sum to one.
template <class State>
struct Observable {
    std::function<double(const State&)> f;
    double bound = 1.0;

    Observable() = default;
    Observable(std::function<double(const State&)> fn, double sup_bound)
        : f(std::move(fn)), bound(sup_bound) {
        if (!(bound >= 0.0) || !std::isfinite(bound))
            throw std::invalid_argument("observable bound must be finite and >= 0");
    }

    double operator()(const State& x) const { return f(x); }
};

}  // namespace wesample
