#pragma once

#include "ccdf/rng.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace testing {

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline double norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

inline double dist(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0)
{
    ccdf::RngStream r(seed, stream);
    return r.normal_vector(n);
}

} // namespace testing
