#include "wesample/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "wesample/errors.hpp"

namespace wesample {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr long kPowerIterationCap = 1'000'000;

double wrap01(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y = 0.0;  // guard against rounding up from just below 1
    return y;
}

}  // namespace

FiniteKernel::FiniteKernel(Eigen::MatrixXd matrix) : p_(std::move(matrix)) {
    if (p_.rows() == 0 || p_.rows() != p_.cols())
        throw std::invalid_argument("finite kernel matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
        if ((p_.row(i).array() < 0.0).any())
            throw std::invalid_argument("finite kernel entries must be >= 0");
        if (std::abs(p_.row(i).sum() - 1.0) > kRowSumTol)
            throw std::invalid_argument("finite kernel row " + std::to_string(i) +
                                        " does not sum to 1 within 1e-12");
    }
    cum_.resize(p_.rows(), p_.cols());
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < p_.cols(); ++j) {
            acc += p_(i, j);
            cum_(i, j) = acc;
        }
        cum_(i, p_.cols() - 1) = 1.0;
    }
}

int FiniteKernel::step(State x, RngStream& rng) const {
    if (x < 0 || x >= size()) throw std::domain_error("finite kernel state out of range");
    const double u = rng.uniform();
    for (int j = 0; j < size() - 1; ++j) {
        if (u < cum_(x, j)) return j;
    }
    return size() - 1;
}

FiniteKernel three_state_chain(double delta) {
    if (!(delta >= 0.0 && delta <= 1.0))
        throw std::invalid_argument("three_state_chain requires delta in [0,1]");
    Eigen::MatrixXd p(3, 3);
    p << 1.0 - delta, delta, 0.0,
         1.0 - delta, 0.0, delta,
         1.0, 0.0, 0.0;
    return FiniteKernel(p);
}

FiniteKernel periodic_three_state_chain() {
    Eigen::MatrixXd p(3, 3);
    p << 0.0, 0.5, 0.5,
         1.0, 0.0, 0.0,
         1.0, 0.0, 0.0;
    return FiniteKernel(p);
}

TorusLangevinKernel::TorusLangevinKernel(double beta, double dt, int skeleton)
    : beta_(beta), dt_(dt), skeleton_(skeleton) {
    if (!(beta > 0.0)) throw std::invalid_argument("torus kernel requires beta > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("torus kernel requires dt > 0");
    if (skeleton < 1) throw std::invalid_argument("torus kernel requires skeleton >= 1");
}

double TorusLangevinKernel::inner_step(double x, RngStream& rng) const {
    if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("torus state outside [0,1)");
    const double two_pi = 2.0 * std::numbers::pi;
    const double drift = -two_pi * std::sin(two_pi * x) * dt_;
    const double noise = std::sqrt(2.0 * dt_ / beta_) * rng.gaussian();
    return wrap01(x + drift + noise);
}

double TorusLangevinKernel::step(State x, RngStream& rng) const {
    for (int s = 0; s < skeleton_; ++s) x = inner_step(x, rng);
    return x;
}

Eigen::VectorXd stationary_linear(const FiniteKernel& k) {
    const int n = k.size();
    Eigen::MatrixXd a = k.matrix().transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(0).setOnes();  // replace one redundant balance equation by the normalization
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(0) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(b);
    pi = pi.cwiseMax(0.0);
    const double total = pi.sum();
    if (!(total > 0.0)) throw MixingError("linear solve produced no stationary distribution");
    pi /= total;
    if ((k.matrix().transpose() * pi - pi).lpNorm<Eigen::Infinity>() > 1e-9)
        throw MixingError("linear solve result is not stationary");
    return pi;
}

Eigen::VectorXd stationary_distribution(const FiniteKernel& k, double tol, bool* used_fallback) {
    const int n = k.size();
    if (used_fallback) *used_fallback = false;
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
    Eigen::VectorXd prev2 = pi;
    for (long it = 0; it < kPowerIterationCap; ++it) {
        Eigen::VectorXd next = k.matrix().transpose() * pi;
        next /= next.sum();
        if ((next - pi).lpNorm<1>() <= tol) return next;
        // a 2-cycle means the chain is periodic; the cap would change nothing
        if (it > 0 && (next - prev2).lpNorm<1>() <= tol) break;
        prev2 = pi;
        pi = next;
    }
    if (used_fallback) *used_fallback = true;
    return stationary_linear(k);
}

HorizonFunctions horizon_functions(const FiniteKernel& k, const Observable<int>& f, int T) {
    if (T < 1) throw std::invalid_argument("horizon_functions requires T >= 1");
    const int n = k.size();
    Eigen::VectorXd fv(n);
    for (int x = 0; x < n; ++x) fv(x) = f(x);

    HorizonFunctions out;
    out.horizon = T;
    out.h.resize(T, n);
    out.kh.resize(T, n);
    out.h.row(T - 1) = fv.transpose();
    out.kh.row(T - 1).setZero();
    for (int t = T - 2; t >= 0; --t) {
        out.kh.row(t) = (k.matrix() * out.h.row(t + 1).transpose()).transpose();
        out.h.row(t) = out.kh.row(t) + fv.transpose();
    }
    return out;
}

MixingDiagnostics mixing_diagnostics(const FiniteKernel& k, int t_max) {
    if (t_max < 1) throw std::invalid_argument("mixing_diagnostics requires t_max >= 1");
    const Eigen::VectorXd mu = stationary_distribution(k);
    const int n = k.size();

    MixingDiagnostics diag;
    diag.tv_curve.reserve(t_max + 1);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    for (int t = 0; t <= t_max; ++t) {
        double worst = 0.0;
        for (int x = 0; x < n; ++x)
            worst = std::max(worst, 0.5 * (power.row(x).transpose() - mu).lpNorm<1>());
        diag.tv_curve.push_back(worst);
        if (t < t_max) power = power * k.matrix();
    }

    // Geometric fit over the tail half of the curve; refuse when it does not
    // decay there (identity and periodic chains).
    const int lo = t_max / 2;
    std::vector<std::pair<double, double>> pts;  // (t, log tv)
    bool all_zero = true;
    for (int t = lo; t <= t_max; ++t) {
        if (diag.tv_curve[t] > 1e-300) {
            pts.emplace_back(static_cast<double>(t), std::log(diag.tv_curve[t]));
            all_zero = false;
        }
    }
    if (all_zero) {
        diag.rate = 0.0;  // perfect mixing within the window
        return diag;
    }
    if (pts.size() < 2 || !(diag.tv_curve[t_max] < diag.tv_curve[lo] * (1.0 - 1e-12)))
        return diag;  // no decay, no fit

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(pts.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    if (!(slope < 0.0)) return diag;
    diag.rate = std::exp(slope);
    return diag;
}

}  // namespace wesample
