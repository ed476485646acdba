#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ccdf {

/// Row-major image geometry. Plain vectors are treated as 1 x n images.
struct ImageShape {
    std::size_t height = 1;
    std::size_t width = 0;

    std::size_t size() const noexcept { return height * width; }
    bool operator==(const ImageShape&) const = default;
};

/// Parses "HxW" (e.g. "64x64") or a bare length "n" (=> 1 x n).
ImageShape parse_shape(std::string_view text);
std::string to_string(const ImageShape& shape);

/// Boolean sampling pattern over pixels (inpainting) or DFT bins (MRI).
/// DFT masks use natural FFT order: bin (r, c) holds frequency
/// (r or r - H, c or c - W), i.e. no fftshift.
struct SamplingMask {
    ImageShape shape;
    std::vector<std::uint8_t> keep;

    std::size_t count() const noexcept;
    bool kept(std::size_t r, std::size_t c) const { return keep[r * shape.width + c] != 0; }
    /// Invariant under (r, c) -> (-r mod H, -c mod W).
    bool conjugate_symmetric() const;

    static SamplingMask full(ImageShape shape);
};

/// Keeps every pixel except a centered box_h x box_w hole.
SamplingMask box_hole_mask(ImageShape shape, std::size_t box_h, std::size_t box_w);
/// Keeps exactly round(keep_fraction * n) pixels chosen uniformly at random.
SamplingMask random_pixel_mask(ImageShape shape, double keep_fraction, std::uint64_t seed);
/// Column (phase-encode) undersampling with a fully sampled center band.
///
/// The band of acs_fraction * W center columns is always kept (rounded to an
/// odd width so it is symmetric); the remaining columns are drawn without
/// replacement in +/-k pairs with probability proportional to
/// exp(-k^2 / (2 (W/6)^2)) until W / accel columns are reached. The Nyquist
/// column is used to fix the parity when an even count is requested. The
/// result is always conjugate-symmetric.
SamplingMask gaussian1d_mask(ImageShape shape, double accel, double acs_fraction, std::uint64_t seed);

} // namespace ccdf
