#pragma once

#include <cstddef>
#include <cstdint>

#include "seeds/tensor.hpp"

namespace seeds {

/// Counter-based random stream: output k is a pure function of (seed, k).
/// The full state is the pair (seed, position), which makes checkpointing
/// and bit-exact resume trivial.
class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t seed, std::uint64_t position = 0)
        : seed_(seed), position_(position) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return position_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1).
    double uniform() noexcept;
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) noexcept;
    /// Standard normal via Box–Muller (consumes two words, no cached spare).
    double gaussian() noexcept;

    /// Independent stream for a named sub-task.
    RngStream fork(std::uint64_t tag) const noexcept;

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t position_ = 0;
};

/// rows × cols matrix of i.i.d. N(0, 1) draws.
Matrix sample_gaussian(RngStream& rng, std::size_t rows, std::size_t cols);

}  // namespace seeds
