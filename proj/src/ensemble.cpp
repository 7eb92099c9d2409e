#include "wesample/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wesample {

const char* scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::kDmc: return "dmc";
        case SchemeKind::kWeMultinomial: return "we_multinomial";
        case SchemeKind::kWeResidual: return "we_residual";
        case SchemeKind::kSmcGb: return "smc_gb";
        case SchemeKind::kOptimal: return "optimal";
    }
    return "?";
}

SchemeKind scheme_from_name(const std::string& name) {
    if (name == "dmc") return SchemeKind::kDmc;
    if (name == "we_multinomial") return SchemeKind::kWeMultinomial;
    if (name == "we_residual") return SchemeKind::kWeResidual;
    if (name == "smc_gb") return SchemeKind::kSmcGb;
    if (name == "optimal") return SchemeKind::kOptimal;
    throw std::invalid_argument("unknown scheme: " + name);
}

namespace {

std::vector<int> occupied_bins(const std::vector<double>& w) {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(w.size()); ++u)
        if (w[u] > 0.0) out.push_back(u);
    return out;
}

// Leftover children go to occupied bins in descending weight order, ties to
// the lowest bin id. The paper assumes divisibility; we must not.
std::vector<int> allocate_uniform(const std::vector<double>& w, int n) {
    const std::vector<int> occ = occupied_bins(w);
    const int m = static_cast<int>(occ.size());
    if (m == 0) throw InvariantError("allocation: no occupied bins");
    if (n < m) throw InvariantError("infeasible allocation: N < occupied bin count");
    std::vector<int> counts(w.size(), 0);
    for (int u : occ) counts[u] = n / m;
    int leftover = n - (n / m) * m;
    std::vector<int> order = occ;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return w[a] > w[b] || (w[a] == w[b] && a < b); });
    for (int i = 0; i < leftover; ++i) ++counts[order[i]];
    return counts;
}

// N(u) = max(1, round(N*w(u))) on occupied bins, then repair the total:
// decrement the largest counts above 1, increment the largest fractional
// parts. Realizes N(u) >= N0*w(u) with N0 close to N.
std::vector<int> allocate_proportional(const std::vector<double>& w, int n) {
    const std::vector<int> occ = occupied_bins(w);
    const int m = static_cast<int>(occ.size());
    if (m == 0) throw InvariantError("allocation: no occupied bins");
    if (n < m) throw InvariantError("infeasible allocation: N < occupied bin count");
    std::vector<int> counts(w.size(), 0);
    std::vector<double> frac(w.size(), 0.0);
    for (int u : occ) {
        const double target = n * w[u];
        counts[u] = std::max(1L, std::lround(target));
        frac[u] = target - std::floor(target);
    }
    long total = std::accumulate(counts.begin(), counts.end(), 0L);
    while (total > n) {
        int pick = -1;
        for (int u : occ)
            if (counts[u] > 1 && (pick < 0 || counts[u] > counts[pick])) pick = u;
        if (pick < 0) throw InvariantError("infeasible allocation: cannot shrink counts");
        --counts[pick];
        --total;
    }
    std::vector<int> order = occ;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return frac[a] > frac[b] || (frac[a] == frac[b] && a < b); });
    for (size_t i = 0; total < n; i = (i + 1) % order.size()) {
        ++counts[order[i]];
        ++total;
    }
    return counts;
}

// The allocation table of the periodic three-state example, applied verbatim:
// even steps put all N children on bin 0, odd steps split N2/N3 between bins
// 1 and 2 according to which are occupied.
std::vector<int> allocate_periodic(const AllocationPolicy& policy, const std::vector<double>& w,
                                   int n, int t) {
    if (w.size() != 3)
        throw InvariantError("periodic-example allocation expects exactly 3 bins");
    std::vector<int> counts(3, 0);
    if (t % 2 == 0) {
        if (w[1] > 0.0 || w[2] > 0.0)
            throw InvariantError("periodic-example allocation: bins 1/2 occupied at even t");
        counts[0] = n;
        return counts;
    }
    if (w[0] > 0.0)
        throw InvariantError("periodic-example allocation: bin 0 occupied at odd t");
    int n2 = policy.periodic_half ? n / 2 : policy.periodic_n2;
    if (policy.periodic_half && n % 2 != 0)
        throw InvariantError("periodic-example half allocation needs even N");
    if (n2 < 1 || n2 >= n) throw InvariantError("periodic-example allocation needs 1 <= N2 < N");
    const bool has2 = w[1] > 0.0;
    const bool has3 = w[2] > 0.0;
    if (has2 && has3) {
        counts[1] = n2;
        counts[2] = n - n2;
    } else if (has2) {
        counts[1] = n;
    } else if (has3) {
        counts[2] = n;
    } else {
        throw InvariantError("periodic-example allocation: no occupied bins at odd t");
    }
    return counts;
}

// A bin whose policy count came out 0 while it holds weight is bumped to 1,
// stealing from the largest allocation. Eq. (3)-style feasibility is a hard
// invariant.
void repair_empty_occupied(std::vector<int>& counts, const std::vector<double>& w) {
    for (int u = 0; u < static_cast<int>(w.size()); ++u) {
        if (w[u] > 0.0 && counts[u] == 0) {
            int donor = -1;
            for (int v = 0; v < static_cast<int>(counts.size()); ++v)
                if (counts[v] > 1 && (donor < 0 || counts[v] > counts[donor])) donor = v;
            if (donor < 0) throw InvariantError("infeasible allocation: cannot cover occupied bin");
            --counts[donor];
            counts[u] = 1;
        }
    }
}

}  // namespace

std::vector<int> allocate(const AllocationPolicy& policy, const std::vector<double>& bin_weights,
                          int n, int t) {
    KahanSum total;
    for (double w : bin_weights) {
        if (w < 0.0) throw std::invalid_argument("allocate: negative bin weight");
        total.add(w);
    }
    if (std::abs(total.value() - 1.0) > 1e-9)
        throw std::invalid_argument("allocate: bin weights must sum to 1 within 1e-9");

    std::vector<int> counts;
    switch (policy.kind) {
        case AllocationPolicy::Kind::kUniform:
            counts = allocate_uniform(bin_weights, n);
            break;
        case AllocationPolicy::Kind::kProportionalFloor:
            counts = allocate_proportional(bin_weights, n);
            break;
        case AllocationPolicy::Kind::kPeriodicExample:
            counts = allocate_periodic(policy, bin_weights, n, t);
            break;
        case AllocationPolicy::Kind::kCustom:
            if (policy.custom.size() != bin_weights.size())
                throw std::invalid_argument("allocate: custom counts size mismatch");
            counts = policy.custom;
            repair_empty_occupied(counts, bin_weights);
            break;
    }
    return counts;
}

void validate_layout(const BinLayout& layout, int n) {
    long total = 0;
    for (int u = 0; u < layout.bin_count(); ++u) {
        const bool occupied = layout.bin_weights[u] > 0.0;
        const int c = layout.allocation[u];
        if (c < 0) throw InvariantError("allocation count is negative");
        if (occupied && c < 1) throw InvariantError("occupied bin allocated no children");
        if (!occupied && c != 0) throw InvariantError("empty bin allocated children");
        total += c;
    }
    if (total != n) throw InvariantError("allocation counts do not sum to N");
}

namespace detail {

int cdf_invert(const std::vector<double>& prefix, double target) {
    const auto it = std::upper_bound(prefix.begin(), prefix.end(), target);
    if (it == prefix.end()) return static_cast<int>(prefix.size()) - 1;
    return static_cast<int>(it - prefix.begin());
}

SelectionOutcome select_bins_multinomial(const std::vector<double>& weights,
                                         const BinLayout& layout, RngStream& rng) {
    const int n = static_cast<int>(weights.size());
    SelectionOutcome out;
    out.child_counts.assign(n, 0);
    out.expected_counts.assign(n, 0.0);
    out.parent_of.reserve(n);
    out.child_weights.reserve(n);

    std::vector<double> prefix;
    for (int u = 0; u < layout.bin_count(); ++u) {
        const int lo = layout.bin_begin[u];
        const int hi = layout.bin_begin[u + 1];
        const int trials = layout.allocation[u];
        if (hi == lo) continue;
        const double wu = layout.bin_weights[u];
        if (trials == 0) throw InvariantError("occupied bin with zero allocation in selection");

        prefix.clear();
        double acc = 0.0;
        for (int k = lo; k < hi; ++k) {
            acc += weights[layout.sorted_by_bin[k]];
            prefix.push_back(acc);
        }
        for (int k = lo; k < hi; ++k) {
            const int i = layout.sorted_by_bin[k];
            out.expected_counts[i] = trials * weights[i] / wu;
        }
        const double child_weight = wu / trials;
        for (int d = 0; d < trials; ++d) {
            const int pick = cdf_invert(prefix, rng.uniform() * acc);
            const int parent = layout.sorted_by_bin[lo + pick];
            ++out.child_counts[parent];
            out.parent_of.push_back(parent);
            out.child_weights.push_back(child_weight);
        }
    }
    return out;
}

SelectionOutcome select_bins_residual(const std::vector<double>& weights, const BinLayout& layout,
                                      RngStream& rng) {
    const int n = static_cast<int>(weights.size());
    SelectionOutcome out;
    out.child_counts.assign(n, 0);
    out.expected_counts.assign(n, 0.0);
    out.residuals.assign(n, 0.0);
    out.bin_residuals.assign(layout.bin_count(), 0.0);
    out.parent_of.reserve(n);
    out.child_weights.reserve(n);

    std::vector<double> prefix;
    std::vector<int> members;
    for (int u = 0; u < layout.bin_count(); ++u) {
        const int lo = layout.bin_begin[u];
        const int hi = layout.bin_begin[u + 1];
        const int trials = layout.allocation[u];
        if (hi == lo) continue;
        const double wu = layout.bin_weights[u];
        if (trials == 0) throw InvariantError("occupied bin with zero allocation in selection");
        const double child_weight = wu / trials;

        members.assign(layout.sorted_by_bin.begin() + lo, layout.sorted_by_bin.begin() + hi);
        long floor_total = 0;
        KahanSum delta_sum;
        for (int i : members) {
            const double beta = trials * weights[i] / wu;
            const double fl = std::floor(beta);
            out.expected_counts[i] = beta;
            out.residuals[i] = beta - fl;
            delta_sum.add(beta - fl);
            floor_total += static_cast<long>(fl);
            out.child_counts[i] = static_cast<int>(fl);
        }
        const long delta_u = trials - floor_total;  // integer by construction
        if (std::abs(delta_sum.value() - static_cast<double>(delta_u)) > 1e-9)
            throw InvariantError("residual selection: delta(u) is not an integer within 1e-9");
        out.bin_residuals[u] = static_cast<double>(delta_u);

        // deterministic floor copies, parents in ascending index order
        for (int i : members)
            for (int c = 0; c < out.child_counts[i]; ++c) {
                out.parent_of.push_back(i);
                out.child_weights.push_back(child_weight);
            }

        if (delta_u > 0) {
            prefix.clear();
            double acc = 0.0;
            for (int i : members) {
                acc += out.residuals[i];
                prefix.push_back(acc);
            }
            for (long d = 0; d < delta_u; ++d) {
                const int pick = cdf_invert(prefix, rng.uniform() * acc);
                const int parent = members[pick];
                ++out.child_counts[parent];
                out.parent_of.push_back(parent);
                out.child_weights.push_back(child_weight);
            }
        }
    }
    return out;
}

SelectionOutcome select_fitness_multinomial(const std::vector<double>& weights,
                                            const std::vector<double>& fitness, RngStream& rng) {
    const int n = static_cast<int>(weights.size());
    SelectionOutcome out;
    out.child_counts.assign(n, 0);
    out.parent_of.reserve(n);
    out.child_weights.reserve(n);

    std::vector<double> prefix(n);
    KahanSum s;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double wv = weights[i] * fitness[i];
        s.add(wv);
        acc += wv;
        prefix[i] = acc;
    }
    const double total = s.value();
    if (!(total > 0.0)) throw std::domain_error("fitness selection: total w*V is not positive");

    out.expected_counts.resize(n);
    for (int i = 0; i < n; ++i) out.expected_counts[i] = n * weights[i] * fitness[i] / total;

    const double norm = total / n;  // common weight normalization
    for (int d = 0; d < n; ++d) {
        const int parent = cdf_invert(prefix, rng.uniform() * acc);
        ++out.child_counts[parent];
        out.parent_of.push_back(parent);
        out.child_weights.push_back(norm / fitness[parent]);
    }
    return out;
}

}  // namespace detail

}  // namespace wesample
