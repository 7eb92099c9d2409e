#pragma once

// Brute-force reference computations for the tests. Everything here is
// derived directly from the sampling definitions (trial counts, event
// probabilities, weight rules), independent of the library's code paths.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// All vectors (c_0..c_{m-1}) of nonnegative integers summing to n.
inline void compositions(int n, int m, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> c(m, 0);
    std::function<void(int, int)> rec = [&](int idx, int left) {
        if (idx == m - 1) {
            c[idx] = left;
            visit(c);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            c[idx] = v;
            rec(idx + 1, left - v);
        }
    };
    if (m == 0) return;
    rec(0, n);
}

inline double multinomial_pmf(const std::vector<int>& counts, const std::vector<double>& probs,
                              int trials) {
    double p = factorial(trials);
    for (size_t i = 0; i < counts.size(); ++i) {
        p /= factorial(counts[i]);
        p *= std::pow(probs[i], counts[i]);
    }
    return p;
}

// Enumerates the joint law of child counts for independent per-bin
// multinomials: bin b draws trials[b] children among its members with the
// given event probabilities. `base` holds deterministic counts added on top
// (used for residual resampling's floor copies).
inline void enumerate_joint(const std::vector<std::vector<int>>& members,
                            const std::vector<int>& trials,
                            const std::vector<std::vector<double>>& probs,
                            const std::vector<int>& base, int n_particles,
                            const std::function<void(double, const std::vector<int>&)>& visit) {
    const size_t bins = members.size();
    std::vector<std::vector<int>> chosen(bins);
    std::function<void(size_t, double)> rec = [&](size_t b, double prob) {
        if (b == bins) {
            std::vector<int> counts = base;
            counts.resize(n_particles, 0);
            for (size_t u = 0; u < bins; ++u)
                for (size_t i = 0; i < members[u].size(); ++i) counts[members[u][i]] += chosen[u][i];
            visit(prob, counts);
            return;
        }
        if (members[b].empty() || trials[b] == 0) {
            chosen[b].assign(members[b].size(), 0);
            rec(b + 1, prob);
            return;
        }
        compositions(trials[b], static_cast<int>(members[b].size()), [&](const std::vector<int>& c) {
            chosen[b] = c;
            rec(b + 1, prob * multinomial_pmf(c, probs[b], trials[b]));
        });
    };
    rec(0, 1.0);
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};

// Conditional mean/variance over selection outcomes of
//   X = sum_parents C_i * child_weight(i) * value_i,
// plus the joint second moments E[C_i C_j].
struct SelectionEnumeration {
    MeanVar stat;
    Eigen::MatrixXd joint;  // E[C_i C_j]
    Eigen::VectorXd mean_counts;
};

inline SelectionEnumeration enumerate_selection(
    const std::vector<std::vector<int>>& members, const std::vector<int>& trials,
    const std::vector<std::vector<double>>& probs, const std::vector<int>& base,
    const std::vector<double>& child_weight_of_parent, const std::vector<double>& values) {
    const int n = static_cast<int>(child_weight_of_parent.size());
    SelectionEnumeration out;
    out.joint = Eigen::MatrixXd::Zero(n, n);
    out.mean_counts = Eigen::VectorXd::Zero(n);
    double ex = 0.0, exx = 0.0;
    enumerate_joint(members, trials, probs, base, n, [&](double p, const std::vector<int>& c) {
        double x = 0.0;
        for (int i = 0; i < n; ++i) x += c[i] * child_weight_of_parent[i] * values[i];
        ex += p * x;
        exx += p * x * x;
        for (int i = 0; i < n; ++i) {
            out.mean_counts(i) += p * c[i];
            for (int j = 0; j < n; ++j) out.joint(i, j) += p * c[i] * c[j];
        }
    });
    out.stat = {ex, exx - ex * ex};
    return out;
}

// Conditional mean/variance over all joint next-state outcomes of
//   X = sum_i weights[i] * h_next[next_state_i],
// for particles at `states` moving independently by the row-stochastic P.
inline MeanVar enumerate_mutation(const std::vector<double>& weights,
                                  const std::vector<int>& states, const Eigen::MatrixXd& p,
                                  const Eigen::VectorXd& h_next) {
    const int n_particles = static_cast<int>(states.size());
    const int n_states = static_cast<int>(p.rows());
    std::vector<int> next(n_particles, 0);
    double ex = 0.0, exx = 0.0;
    std::function<void(int, double)> rec = [&](int idx, double prob) {
        if (prob == 0.0) return;
        if (idx == n_particles) {
            double x = 0.0;
            for (int i = 0; i < n_particles; ++i) x += weights[i] * h_next(next[i]);
            ex += prob * x;
            exx += prob * x * x;
            return;
        }
        for (int y = 0; y < n_states; ++y) {
            next[idx] = y;
            rec(idx + 1, prob * p(states[idx], y));
        }
    };
    rec(0, 1.0);
    return {ex, exx - ex * ex};
}

// Distribution of a chain after t steps: nu^T P^t.
inline Eigen::VectorXd distribution_after(const Eigen::MatrixXd& p, const Eigen::VectorXd& nu,
                                          int t) {
    Eigen::VectorXd d = nu;
    for (int s = 0; s < t; ++s) d = (d.transpose() * p).transpose();
    return d;
}

// Composite Simpson integral of g over [0,1].
inline double simpson01(const std::function<double(double)>& g, int intervals = 2000) {
    const double h = 1.0 / intervals;
    double acc = g(0.0) + g(1.0);
    for (int i = 1; i < intervals; ++i) acc += g(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace oracle
