#pragma once

#include <Eigen/Dense>
#include <concepts>
#include <optional>
#include <vector>

#include "wesample/observable.hpp"
#include "wesample/rng.hpp"

namespace wesample {

// A Markov kernel is anything that can advance a state given a stream.
// Sampling is a pure function of (state, stream position).
template <class K>
concept markov_kernel = requires(const K k, typename K::State x, RngStream& g) {
    { k.step(x, g) } -> std::same_as<typename K::State>;
};

// Explicit transition matrix on states {0..n-1}. Rows must sum to 1 within
// 1e-12 with nonnegative entries. Immutable after construction.
class FiniteKernel {
   public:
    using State = int;

    explicit FiniteKernel(Eigen::MatrixXd matrix);

    int size() const { return static_cast<int>(p_.rows()); }
    const Eigen::MatrixXd& matrix() const { return p_; }

    // One draw from K(x,.) by CDF inversion on the cached cumulative row;
    // ties resolve to the first index whose cumulative exceeds the uniform.
    State step(State x, RngStream& rng) const;

   private:
    Eigen::MatrixXd p_;
    Eigen::MatrixXd cum_;  // row-wise cumulative sums
};

// K(1,2) = K(2,3) = delta, K(1,1) = K(2,1) = 1-delta, K(3,1) = 1,
// relabeled to 0-based states.
FiniteKernel three_state_chain(double delta);

// K(1,2) = K(1,3) = 1/2, K(2,1) = K(3,1) = 1, 0-based. Period 2.
FiniteKernel periodic_three_state_chain();

// Overdamped Langevin on the unit torus in the potential cos(2*pi*x),
// discretized by Euler-Maruyama with inner step dt, observed on a skeleton
// of `skeleton` inner steps:
//   x <- wrap(x - 2*pi*sin(2*pi*x)*dt + sqrt(2*dt/beta)*alpha),  alpha ~ N(0,1).
class TorusLangevinKernel {
   public:
    using State = double;

    TorusLangevinKernel(double beta, double dt = 1e-3, int skeleton = 10);

    double inner_step(double x, RngStream& rng) const;
    State step(State x, RngStream& rng) const;  // composes `skeleton` inner steps

    double beta() const { return beta_; }
    double dt() const { return dt_; }
    int skeleton() const { return skeleton_; }

   private:
    double beta_;
    double dt_;
    int skeleton_;
};

// Stationary distribution of an irreducible kernel. Power iteration with the
// given tolerance and a 1e6 iteration cap; chains the iteration cannot settle
// (e.g. periodic ones) fall back to the dense linear solve of (K^T - I)pi = 0
// with sum(pi) = 1. `used_fallback`, when non-null, reports that path.
Eigen::VectorXd stationary_distribution(const FiniteKernel& k, double tol = 1e-13,
                                        bool* used_fallback = nullptr);

// Direct dense solve of (K^T - I)pi = 0 with the normalization row.
Eigen::VectorXd stationary_linear(const FiniteKernel& k);

// Finite-horizon accumulated observable h_t(x) = sum_{s=0}^{T-t-1} K^s f(x)
// and its one-step kernel image. Row t of `kh` holds (K h_{t+1})(x), with
// h_T == 0, so kh.row(T-1) is identically zero and h = kh + f row by row.
struct HorizonFunctions {
    Eigen::MatrixXd h;   // (T x n)
    Eigen::MatrixXd kh;  // (T x n)
    int horizon = 0;
};

HorizonFunctions horizon_functions(const FiniteKernel& k, const Observable<int>& f, int T);

// Total-variation decay of K^t toward the stationary distribution,
// tv_curve[t] = max_x (1/2) sum_y |K^t(x,y) - mu(y)|, plus a geometric rate
// fitted on the tail of the curve. The fit is refused (rate empty) when the
// tail does not decay, e.g. for periodic or identity chains.
struct MixingDiagnostics {
    std::vector<double> tv_curve;
    std::optional<double> rate;
};

MixingDiagnostics mixing_diagnostics(const FiniteKernel& k, int t_max);

}  // namespace wesample
