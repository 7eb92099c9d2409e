#pragma once

namespace wesample {

// Kahan compensated accumulator. Summation order is fixed by the caller
// (particle index ascending) so results are reproducible across platforms.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

}  // namespace wesample
