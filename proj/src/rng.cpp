#include "ccdf/rng.hpp"

namespace ccdf {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream)
{
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream))
{
}

double RngStream::normal()
{
    ++draws_;
    return normal_(engine_);
}

double RngStream::uniform()
{
    ++draws_;
    return uniform_(engine_);
}

void RngStream::fill_normal(std::span<double> out)
{
    for (double& v : out)
        v = normal_(engine_);
    draws_ += out.size();
}

std::vector<double> RngStream::normal_vector(std::size_t n)
{
    std::vector<double> v(n);
    fill_normal(v);
    return v;
}

RngStream RngStream::derive(std::uint64_t id) const
{
    return RngStream(splitmix64(seed_ ^ 0xd1b54a32d192ed03ULL) ^ stream_, splitmix64(id) + stream_);
}

} // namespace ccdf
