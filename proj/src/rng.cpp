#include "seeds/rng.hpp"

#include <cmath>
#include <numbers>

namespace seeds {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::next_u64() noexcept {
    const std::uint64_t key = splitmix64(seed_);
    return splitmix64(key ^ (position_++ * 0xD1B54A32D192ED03ULL));
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::index(std::size_t n) noexcept {
    // Lemire-free modulo; bias is below 2^-40 for the sizes used here.
    return static_cast<std::size_t>(next_u64() % n);
}

double RngStream::gaussian() noexcept {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::fork(std::uint64_t tag) const noexcept {
    return RngStream(splitmix64(seed_ ^ splitmix64(tag + 0x632BE59BD9B4E019ULL)), 0);
}

Matrix sample_gaussian(RngStream& rng, std::size_t rows, std::size_t cols) {
    Matrix out(rows, cols);
    for (double& x : out.data()) x = rng.gaussian();
    return out;
}

}  // namespace seeds
