#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wesample/kernels.hpp"

using namespace wesample;

namespace {

Observable<int> indicator(int target) {
    return {[target](const int& x) { return x == target ? 1.0 : 0.0; }, 1.0};
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("finite kernel validates rows") {
    Eigen::MatrixXd bad(2, 2);
    bad << 0.5, 0.6, 1.0, 0.0;
    CHECK_THROWS_AS(FiniteKernel{bad}, std::invalid_argument);
    bad << -0.1, 1.1, 1.0, 0.0;
    CHECK_THROWS_AS(FiniteKernel{bad}, std::invalid_argument);
    Eigen::MatrixXd rect(2, 3);
    rect.setZero();
    CHECK_THROWS_AS(FiniteKernel{rect}, std::invalid_argument);
}

TEST_CASE("kernel_step: deterministic row always fires") {
    const FiniteKernel k = three_state_chain(0.25);
    RngStream g(1, 0, 0, 0);
    for (int i = 0; i < 200; ++i) CHECK(k.step(2, g) == 0);  // K(3,1) = 1, 0-based
    CHECK_THROWS_AS(k.step(3, g), std::domain_error);
    CHECK_THROWS_AS(k.step(-1, g), std::domain_error);
}

TEST_CASE("kernel_step: identity kernel is a fixed point") {
    const FiniteKernel k{Eigen::MatrixXd::Identity(4, 4)};
    RngStream g(2, 0, 0, 0);
    for (int x = 0; x < 4; ++x)
        for (int i = 0; i < 50; ++i) CHECK(k.step(x, g) == x);
}

TEST_CASE("kernel_step: empirical row frequencies within 4 sigma") {
    const FiniteKernel k = three_state_chain(0.25);
    const int m = 100000;
    int counts[3] = {0, 0, 0};
    RngStream g(3, 0, 0, 0);
    for (int i = 0; i < m; ++i) ++counts[k.step(0, g)];
    const double expected[3] = {0.75, 0.25, 0.0};
    for (int y = 0; y < 3; ++y) {
        const double band = 4.0 * std::sqrt(expected[y] * (1 - expected[y]) / m);
        CHECK(std::abs(counts[y] / static_cast<double>(m) - expected[y]) <= band);
    }
    CHECK(counts[2] == 0);
}

TEST_CASE("torus kernel: skeleton equals composed inner updates, bit for bit") {
    const TorusLangevinKernel k(6.0, 1e-3, 10);
    RngStream g1(5, 0, 7, 3);
    const double via_kernel = k.step(0.3, g1);

    // direct Euler-Maruyama replay on the same stream
    RngStream g2(5, 0, 7, 3);
    double x = 0.3;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int s = 0; s < 10; ++s) {
        x += -two_pi * std::sin(two_pi * x) * 1e-3 + std::sqrt(2.0 * 1e-3 / 6.0) * g2.gaussian();
        x -= std::floor(x);
        if (x >= 1.0) x = 0.0;
    }
    CHECK(via_kernel == x);
}

TEST_CASE("torus kernel: states stay in [0,1), parameters validated") {
    CHECK_THROWS_AS(TorusLangevinKernel(6.0, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(TorusLangevinKernel(6.0, 1e-3, 0), std::invalid_argument);
    const TorusLangevinKernel k(0.5, 0.01, 10);  // hot: large noise per step
    RngStream g(6, 0, 0, 0);
    double x = 0.0;
    for (int i = 0; i < 5000; ++i) {
        x = k.step(x, g);
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK_THROWS_AS(k.step(1.0, g), std::domain_error);
}

TEST_CASE("stationary: periodic chain falls back to the linear solve") {
    const FiniteKernel k = periodic_three_state_chain();
    bool fallback = false;
    const Eigen::VectorXd mu = stationary_distribution(k, 1e-13, &fallback);
    CHECK(fallback);
    CHECK(mu(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mu(1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(mu(2) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("stationary: three-state chain at delta = 0.25") {
    const FiniteKernel k = three_state_chain(0.25);
    bool fallback = true;
    const Eigen::VectorXd mu = stationary_distribution(k, 1e-13, &fallback);
    CHECK_FALSE(fallback);
    // exact vector is (16, 4, 1) / 21
    CHECK(mu(0) == doctest::Approx(16.0 / 21.0).epsilon(1e-10));
    CHECK(mu(1) == doctest::Approx(4.0 / 21.0).epsilon(1e-10));
    CHECK(mu(2) == doctest::Approx(1.0 / 21.0).epsilon(1e-10));
    CHECK((k.matrix().transpose() * mu - mu).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("stationary: rank-one kernel returns its common row") {
    Eigen::MatrixXd p(3, 3);
    p.row(0) << 0.2, 0.5, 0.3;
    p.row(1) = p.row(0);
    p.row(2) = p.row(0);
    const Eigen::VectorXd mu = stationary_distribution(FiniteKernel{p});
    CHECK(mu(0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(mu(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mu(2) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("horizon functions: boundary, constants, recursion") {
    const FiniteKernel k = three_state_chain(0.25);
    const int T = 6;
    const auto f = indicator(2);
    const HorizonFunctions hf = horizon_functions(k, f, T);
    REQUIRE(hf.horizon == T);

    for (int x = 0; x < 3; ++x) CHECK(hf.h(T - 1, x) == f(x));
    CHECK(hf.kh.row(T - 1).isZero(0.0));

    // h_t = K h_{t+1} + f entrywise
    for (int t = 0; t < T - 1; ++t) {
        const Eigen::VectorXd rec = k.matrix() * hf.h.row(t + 1).transpose();
        for (int x = 0; x < 3; ++x)
            CHECK(std::abs(hf.h(t, x) - (rec(x) + f(x))) < 1e-10);
    }

    Observable<int> ones{[](const int&) { return 1.0; }, 1.0};
    const HorizonFunctions hc = horizon_functions(k, ones, T);
    for (int t = 0; t < T; ++t)
        for (int x = 0; x < 3; ++x) CHECK(hc.h(t, x) == doctest::Approx(T - t).epsilon(1e-12));

    CHECK_THROWS_AS(horizon_functions(k, f, 0), std::invalid_argument);
}

TEST_CASE("horizon functions: h_0 against the matrix-power sum") {
    const FiniteKernel k = three_state_chain(0.25);
    const int T = 4;
    const HorizonFunctions hf = horizon_functions(k, indicator(2), T);
    // h_0(x) = sum_{s=0}^{T-1} (K^s f)(x), evaluated by explicit powers
    Eigen::VectorXd fv(3);
    fv << 0, 0, 1;
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(3);
    for (int s = 0; s < T; ++s) {
        expect += power * fv;
        power = power * k.matrix();
    }
    for (int x = 0; x < 3; ++x) CHECK(hf.h(0, x) == doctest::Approx(expect(x)).epsilon(1e-12));
}

TEST_CASE("matrix powers stay row-stochastic") {
    const FiniteKernel k = three_state_chain(1e-3);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(3, 3);
    for (int t = 0; t <= 30; ++t) {
        for (int x = 0; x < 3; ++x) {
            CHECK(std::abs(power.row(x).sum() - 1.0) < 1e-12);
            CHECK((power.row(x).array() >= -1e-15).all());
        }
        power = power * k.matrix();
    }
}

TEST_CASE("mixing: rank-one couples in one step") {
    Eigen::MatrixXd p(3, 3);
    p.row(0) << 0.1, 0.6, 0.3;
    p.row(1) = p.row(0);
    p.row(2) = p.row(0);
    const MixingDiagnostics diag = mixing_diagnostics(FiniteKernel{p}, 4);
    CHECK(diag.tv_curve[1] == doctest::Approx(0.0).epsilon(1e-14));
    REQUIRE(diag.rate.has_value());
    CHECK(*diag.rate == 0.0);
}

TEST_CASE("mixing: identity kernel never mixes, fit refused") {
    const FiniteKernel k{Eigen::MatrixXd::Identity(3, 3)};
    const MixingDiagnostics diag = mixing_diagnostics(k, 6);
    for (size_t t = 1; t < diag.tv_curve.size(); ++t)
        CHECK(diag.tv_curve[t] == doctest::Approx(diag.tv_curve[1]));
    CHECK(diag.tv_curve[1] > 0.0);
    CHECK_FALSE(diag.rate.has_value());
}

TEST_CASE("mixing: three-state chain decays geometrically") {
    const FiniteKernel k = three_state_chain(1e-3);
    const MixingDiagnostics diag = mixing_diagnostics(k, 4);
    for (size_t t = 1; t < diag.tv_curve.size(); ++t)
        CHECK(diag.tv_curve[t] < diag.tv_curve[t - 1]);
    REQUIRE(diag.rate.has_value());
    CHECK(*diag.rate > 0.0);
    CHECK(*diag.rate < 1.0);
}

TEST_CASE("mixing: periodic chain reports a non-decaying curve") {
    const MixingDiagnostics diag = mixing_diagnostics(periodic_three_state_chain(), 8);
    CHECK(diag.tv_curve.back() > 0.1);
    CHECK_FALSE(diag.rate.has_value());
}

}  // TEST_SUITE
