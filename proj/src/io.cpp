#include "ccdf/io.hpp"

#include "ccdf/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ccdf {

namespace {

static_assert(std::endian::native == std::endian::little, "raw I/O assumes a little-endian host");

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    return out;
}

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in, const std::filesystem::path& path)
{
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty())
                return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty())
        throw ValidationError(path.string() + ": truncated PGM header");
    return tok;
}

std::size_t parse_size(const std::string& s, const std::string& what)
{
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ValidationError("bad " + what + ": '" + s + "'");
    return v;
}

struct RawHeader {
    RawType type;
    ImageShape shape;
};

void write_header(std::ostream& out, RawType type, const ImageShape& shape)
{
    const std::uint32_t h[3] = {static_cast<std::uint32_t>(type), static_cast<std::uint32_t>(shape.height),
                                static_cast<std::uint32_t>(shape.width)};
    out.write("CCDF", 4);
    out.write(reinterpret_cast<const char*>(h), sizeof h);
}

RawHeader read_header(std::istream& in, const std::filesystem::path& path)
{
    char magic[4];
    std::uint32_t h[3];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(h), sizeof h);
    if (!in || std::memcmp(magic, "CCDF", 4) != 0)
        throw ValidationError(path.string() + ": not a CCDF raw array");
    if (h[0] != 1 && h[0] != 2)
        throw ValidationError(path.string() + ": unknown dtype " + std::to_string(h[0]));
    if (h[1] == 0 || h[2] == 0)
        throw ValidationError(path.string() + ": empty array");
    return {static_cast<RawType>(h[0]), {h[1], h[2]}};
}

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool has_pgm_extension(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm";
}

} // namespace

Image read_pgm(const std::filesystem::path& path)
{
    auto in = open_in(path);
    if (pgm_token(in, path) != "P5")
        throw ValidationError(path.string() + ": only binary PGM (P5) is supported");
    Image img;
    img.shape.width = parse_size(pgm_token(in, path), "PGM width");
    img.shape.height = parse_size(pgm_token(in, path), "PGM height");
    const auto maxval = parse_size(pgm_token(in, path), "PGM maxval");
    if (img.shape.size() == 0)
        throw ValidationError(path.string() + ": empty image");
    if (maxval == 0 || maxval > 65535)
        throw ValidationError(path.string() + ": maxval must be in [1, 65535]");
    const std::size_t n = img.shape.size();
    img.data.resize(n);
    const double scale = 1.0 / static_cast<double>(maxval);
    if (maxval < 256) {
        std::vector<unsigned char> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!in)
            throw ValidationError(path.string() + ": truncated pixel data");
        for (std::size_t k = 0; k < n; ++k)
            img.data[k] = std::min(1.0, buf[k] * scale);
    } else {
        std::vector<unsigned char> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        if (!in)
            throw ValidationError(path.string() + ": truncated pixel data");
        for (std::size_t k = 0; k < n; ++k)
            img.data[k] = std::min(1.0, ((buf[2 * k] << 8) | buf[2 * k + 1]) * scale);
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data, int bits)
{
    detail::require(bits == 8 || bits == 16, "PGM depth must be 8 or 16 bits");
    detail::require(data.size() == shape.size() && shape.size() > 0, "image data does not match its shape");
    const int maxval = bits == 8 ? 255 : 65535;
    auto out = open_out(path);
    out << "P5\n" << shape.width << ' ' << shape.height << '\n' << maxval << '\n';
    std::vector<unsigned char> buf;
    buf.reserve(data.size() * (bits / 8));
    for (double v : data) {
        const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        const auto q = static_cast<unsigned>(std::lround(c * maxval));
        if (bits == 16)
            buf.push_back(static_cast<unsigned char>(q >> 8));
        buf.push_back(static_cast<unsigned char>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw ValidationError("failed writing " + path.string());
}

void write_raw(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data)
{
    detail::require(data.size() == shape.size() && shape.size() > 0, "array data does not match its shape");
    auto out = open_out(path);
    write_header(out, RawType::Float64, shape);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (!out)
        throw ValidationError("failed writing " + path.string());
}

void write_raw(const std::filesystem::path& path, const ImageShape& shape,
               std::span<const std::complex<double>> data)
{
    detail::require(data.size() == shape.size() && shape.size() > 0, "array data does not match its shape");
    auto out = open_out(path);
    write_header(out, RawType::Complex128, shape);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (!out)
        throw ValidationError("failed writing " + path.string());
}

Image read_raw_real(const std::filesystem::path& path)
{
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.type != RawType::Float64)
        throw ValidationError(path.string() + ": expected a float64 array");
    Image img{h.shape, std::vector<double>(h.shape.size())};
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size() * 8));
    if (!in)
        throw ValidationError(path.string() + ": truncated array");
    return img;
}

std::vector<std::complex<double>> read_raw_complex(const std::filesystem::path& path, ImageShape& shape)
{
    auto in = open_in(path);
    const auto h = read_header(in, path);
    if (h.type != RawType::Complex128)
        throw ValidationError(path.string() + ": expected a complex128 array");
    std::vector<std::complex<double>> v(h.shape.size());
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 16));
    if (!in)
        throw ValidationError(path.string() + ": truncated array");
    shape = h.shape;
    return v;
}

Image load_image(const std::filesystem::path& path)
{
    return has_pgm_extension(path) ? read_pgm(path) : read_raw_real(path);
}

void save_image(const std::filesystem::path& path, const ImageShape& shape, std::span<const double> data)
{
    if (has_pgm_extension(path))
        write_pgm(path, shape, data, 8);
    else
        write_raw(path, shape, data);
}

SamplingMask load_mask(const std::filesystem::path& path)
{
    const auto img = load_image(path);
    SamplingMask m{img.shape, std::vector<std::uint8_t>(img.data.size())};
    for (std::size_t k = 0; k < img.data.size(); ++k)
        m.keep[k] = img.data[k] != 0.0 ? 1 : 0;
    return m;
}

void save_mask(const std::filesystem::path& path, const SamplingMask& mask)
{
    std::vector<double> v(mask.keep.begin(), mask.keep.end());
    save_image(path, mask.shape, v);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin)
{
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        if (key.empty())
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string KeyValueConfig::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        throw ValidationError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const
{
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(origin_ + ": key '" + key + "' is not a number: '" + it->second + "'");
    }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ValidationError(origin_ + ": key '" + key + "' is not an integer: '" + s + "'");
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    const auto& s = it->second;
    if (s == "1" || s == "true" || s == "yes" || s == "on")
        return true;
    if (s == "0" || s == "false" || s == "no" || s == "off")
        return false;
    throw ValidationError(origin_ + ": key '" + key + "' is not a boolean: '" + s + "'");
}

void KeyValueConfig::require_known(std::initializer_list<const char*> known) const
{
    for (const auto& [k, v] : values_)
        if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
            throw ValidationError(origin_ + ": unknown key '" + k + "'");
}

} // namespace ccdf
