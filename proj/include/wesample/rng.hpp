#pragma once

#include <array>
#include <cstdint>

namespace wesample {

// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
// One 128-bit counter + 64-bit key -> 128 random bits; no carried state,
// which is what makes the streams below splittable and reproducible.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

inline constexpr std::uint32_t kInitStep = 0xffffffffu;       // step tag for initialization draws
inline constexpr std::uint32_t kSelectionLane = 0xffffffffu;  // lane tag for selection draws

// One logical random stream addressed by (seed, replicate, step, lane).
// Mutation uses lane = particle index, selection uses kSelectionLane,
// initialization uses step = kInitStep with lane = particle index. Streams
// with distinct addresses are independent, so replicates can run on any
// number of threads without changing a single draw.
class RngStream {
   public:
    RngStream(std::uint64_t seed, std::uint32_t replicate, std::uint32_t step,
              std::uint32_t lane) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          prefix_{replicate, step, lane} {}

    std::uint32_t next_u32() noexcept {
        if (avail_ == 0) {
            buf_ = philox4x32({prefix_[0], prefix_[1], prefix_[2], block_++}, key_);
            avail_ = 4;
        }
        return buf_[4 - avail_--];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // uniform on [0,1), 53-bit resolution
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1]; safe as a log() argument
    double uniform_pos() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. Always consumes exactly two uniforms
    // and returns one variate (no cached spare), so composing k single-step
    // draws is bit-identical to k calls on the same stream.
    double gaussian() noexcept;

   private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 3> prefix_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int avail_ = 0;
};

// Addresses the streams belonging to one replicate of one experiment.
struct ReplicateContext {
    std::uint64_t seed = 0;
    std::uint32_t replicate = 0;

    RngStream init_stream(std::uint32_t particle) const noexcept {
        return {seed, replicate, kInitStep, particle};
    }
    RngStream selection_stream(std::uint32_t step) const noexcept {
        return {seed, replicate, step, kSelectionLane};
    }
    RngStream mutation_stream(std::uint32_t step, std::uint32_t particle) const noexcept {
        return {seed, replicate, step, particle};
    }
};

}  // namespace wesample
