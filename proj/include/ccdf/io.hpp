#pragma once

#include "ccdf/image.hpp"

#include <complex>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ccdf {

struct Image {
    ImageShape shape;
    std::vector<double> data;  ///< row-major
};

/// Binary PGM (P5), 8 or 16 bit. Values are scaled to [0, 1].
Image read_pgm(const std::filesystem::path& path);
/// Clamps to [0, 1] and writes P5 with maxval 255 (bits = 8) or 65535 (bits = 16).
void write_pgm(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data,
               int bits = 8);

// Raw arrays: "CCDF", then uint32 little-endian dtype (1 = float64,
// 2 = complex128), height, width; then the payload in little-endian order.

enum class RawType : std::uint32_t { Float64 = 1, Complex128 = 2 };

void write_raw(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data);
void write_raw(const std::filesystem::path& path, const ImageShape& shape,
               std::span<const std::complex<double>> data);
Image read_raw_real(const std::filesystem::path& path);
std::vector<std::complex<double>> read_raw_complex(const std::filesystem::path& path, ImageShape& shape);

/// .pgm through read_pgm, anything else as a raw float64 array.
Image load_image(const std::filesystem::path& path);
/// .pgm through write_pgm (8 bit), anything else as raw float64.
void save_image(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data);

/// Sampling masks as 8-bit PGM (nonzero = kept) or raw float64 (nonzero = kept).
SamplingMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const SamplingMask& mask);

/// key = value lines; '#' starts a comment. Later keys override earlier ones.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    /// Throws ValidationError naming the first key not in `known`.
    void require_known(std::initializer_list<const char*> known) const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

} // namespace ccdf
