#include "wesample/estimators.hpp"

#include <cmath>

namespace wesample {

ReplicateStats replicate_stats(std::span<const double> values) {
    const long n = static_cast<long>(values.size());
    if (n < 2) throw std::invalid_argument("replicate_stats requires n >= 2");
    KahanSum sum;
    for (double v : values) sum.add(v);
    const double mean = sum.value() / n;
    KahanSum sq;
    for (double v : values) sq.add((v - mean) * (v - mean));
    const double variance = sq.value() / (n - 1);
    return {n, mean, variance, std::sqrt(variance / n)};
}

MomentStats moment_stats(std::span<const double> values) {
    MomentStats out;
    out.base = replicate_stats(values);
    const long n = out.base.n;
    KahanSum m4;
    for (double v : values) {
        const double d = v - out.base.mean;
        m4.add(d * d * d * d);
    }
    const double fourth = m4.value() / n;
    const double s2 = out.base.variance;
    double var_of_var = (fourth - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
    if (var_of_var < 0.0) var_of_var = 0.0;
    out.stderr_variance = std::sqrt(var_of_var);
    return out;
}

}  // namespace wesample
