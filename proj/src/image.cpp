#include "ccdf/image.hpp"

#include "ccdf/error.hpp"
#include "ccdf/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace ccdf {

namespace {

std::size_t parse_extent(std::string_view text)
{
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || value == 0)
        throw ValidationError("invalid image extent '" + std::string(text) + "'");
    return value;
}

} // namespace

ImageShape parse_shape(std::string_view text)
{
    const auto x = text.find_first_of("xX");
    if (x == std::string_view::npos)
        return {1, parse_extent(text)};
    return {parse_extent(text.substr(0, x)), parse_extent(text.substr(x + 1))};
}

std::string to_string(const ImageShape& shape)
{
    return std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

std::size_t SamplingMask::count() const noexcept
{
    return static_cast<std::size_t>(std::count_if(keep.begin(), keep.end(), [](auto v) { return v != 0; }));
}

bool SamplingMask::conjugate_symmetric() const
{
    const std::size_t h = shape.height;
    const std::size_t w = shape.width;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            if (kept(r, c) != kept((h - r) % h, (w - c) % w))
                return false;
    return true;
}

SamplingMask SamplingMask::full(ImageShape shape)
{
    detail::require(shape.size() > 0, "mask shape must be non-empty");
    return {shape, std::vector<std::uint8_t>(shape.size(), 1)};
}

SamplingMask box_hole_mask(ImageShape shape, std::size_t box_h, std::size_t box_w)
{
    detail::require(box_h <= shape.height && box_w <= shape.width, "inpainting box larger than image");
    SamplingMask m = SamplingMask::full(shape);
    const std::size_t r0 = (shape.height - box_h) / 2;
    const std::size_t c0 = (shape.width - box_w) / 2;
    for (std::size_t r = r0; r < r0 + box_h; ++r)
        for (std::size_t c = c0; c < c0 + box_w; ++c)
            m.keep[r * shape.width + c] = 0;
    return m;
}

SamplingMask random_pixel_mask(ImageShape shape, double keep_fraction, std::uint64_t seed)
{
    detail::require(keep_fraction > 0.0 && keep_fraction <= 1.0, "keep fraction must lie in (0, 1]");
    const std::size_t n = shape.size();
    detail::require(n > 0, "mask shape must be non-empty");
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(keep_fraction * n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(seed, 0x6d61736bULL);
    // Fisher-Yates driven by our own stream so masks do not depend on the
    // standard library's shuffle implementation.
    for (std::size_t k = n - 1; k > 0; --k) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k + 1));
        std::swap(order[k], order[std::min(j, k)]);
    }
    SamplingMask mask{shape, std::vector<std::uint8_t>(n, 0)};
    for (std::size_t k = 0; k < m; ++k)
        mask.keep[order[k]] = 1;
    return mask;
}

SamplingMask gaussian1d_mask(ImageShape shape, double accel, double acs_fraction, std::uint64_t seed)
{
    detail::require(shape.size() > 0, "mask shape must be non-empty");
    detail::require(accel >= 1.0, "acceleration factor must be >= 1");
    detail::require(acs_fraction >= 0.0 && acs_fraction <= 1.0, "ACS fraction must lie in [0, 1]");
    const auto w = static_cast<long>(shape.width);
    const long half = w / 2;

    auto column_of = [w](long k) { return static_cast<std::size_t>(((k % w) + w) % w); };
    std::vector<std::uint8_t> cols(static_cast<std::size_t>(w), 0);
    long kept = 0;
    auto take = [&](long k) {
        auto& slot = cols[column_of(k)];
        if (!slot) {
            slot = 1;
            ++kept;
        }
    };

    long target = std::max<long>(1, std::lround(static_cast<double>(w) / accel));
    long acs = std::max<long>(1, std::lround(acs_fraction * static_cast<double>(w)));
    if (acs % 2 == 0)
        ++acs;
    acs = std::min(acs, w);
    for (long k = -(acs / 2); k <= acs / 2; ++k)
        take(k);
    target = std::max(target, kept);

    // Candidate pairs +/-k outside the band, excluding the self-paired Nyquist bin.
    const bool has_nyquist = (w % 2 == 0);
    std::vector<long> candidates;
    for (long k = acs / 2 + 1; k < (has_nyquist ? half : half + 1); ++k)
        if (!cols[column_of(k)])
            candidates.push_back(k);

    RngStream rng(seed, 0x67617573ULL);
    const double spread = static_cast<double>(w) / 6.0;
    while (kept + 2 <= target && !candidates.empty()) {
        double total = 0.0;
        for (long k : candidates)
            total += std::exp(-0.5 * (k / spread) * (k / spread));
        double u = rng.uniform() * total;
        std::size_t pick = candidates.size() - 1;
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            u -= std::exp(-0.5 * (candidates[j] / spread) * (candidates[j] / spread));
            if (u <= 0.0) {
                pick = j;
                break;
            }
        }
        take(candidates[pick]);
        take(-candidates[pick]);
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    if (kept < target && has_nyquist)
        take(-half);

    SamplingMask mask{shape, std::vector<std::uint8_t>(shape.size(), 0)};
    for (std::size_t r = 0; r < shape.height; ++r)
        for (std::size_t c = 0; c < shape.width; ++c)
            mask.keep[r * shape.width + c] = cols[c];
    return mask;
}

} // namespace ccdf
