#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ccdf {

/// Deterministic Gaussian source keyed by (seed, stream).
///
/// Two streams constructed with the same key produce the same sequence of
/// draws; distinct stream ids are decorrelated through a SplitMix64 mix of
/// the key before seeding the Mersenne twister. Coupled-trajectory
/// experiments rely on this: a trajectory pair shares data-consistency
/// anchors by holding two copies of the same stream.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t draws() const noexcept { return draws_; }

    double normal();
    double uniform();
    void fill_normal(std::span<double> out);
    std::vector<double> normal_vector(std::size_t n);

    /// A new stream whose key is derived from this stream's key and `id`.
    /// Does not advance this stream.
    RngStream derive(std::uint64_t id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t draws_ = 0;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

} // namespace ccdf
