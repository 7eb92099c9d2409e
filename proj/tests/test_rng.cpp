#include <doctest.h>

#include <cmath>
#include <set>

#include "wesample/rng.hpp"

using namespace wesample;

TEST_SUITE("rng") {

// Known-answer vectors from the reference Philox4x32-10 test suite.
TEST_CASE("philox4x32-10 known answers") {
    auto out = philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);

    out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                     {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);

    out = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                     {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("streams are reproducible and address-separated") {
    RngStream a(42, 1, 2, 3);
    RngStream b(42, 1, 2, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(42, 1, 2, 4);
    RngStream d(42, 1, 2, 3);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += c.next_u64() == d.next_u64();
    CHECK(same == 0);

    RngStream e(43, 1, 2, 3);
    RngStream f(42, 1, 2, 3);
    same = 0;
    for (int i = 0; i < 64; ++i) same += e.next_u64() == f.next_u64();
    CHECK(same == 0);
}

TEST_CASE("uniform ranges") {
    RngStream g(7, 0, 0, 0);
    for (int i = 0; i < 20000; ++i) {
        const double u = g.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = g.uniform_pos();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("gaussian moments") {
    RngStream g(11, 0, 0, 0);
    const int m = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < m; ++i) {
        const double z = g.gaussian();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / m;
    const double var = sumsq / m - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(m)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / m));
}

TEST_CASE("replicate context carves disjoint streams") {
    const ReplicateContext ctx{9, 5};
    std::set<std::uint64_t> firsts;
    for (std::uint32_t i = 0; i < 50; ++i) {
        firsts.insert(ctx.init_stream(i).next_u64());
        firsts.insert(ctx.mutation_stream(3, i).next_u64());
    }
    firsts.insert(ctx.selection_stream(3).next_u64());
    CHECK(firsts.size() == 101);
}

}  // TEST_SUITE
