#include "ccdf/error.hpp"
#include "ccdf/io.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace ccdf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / "ccdf_unit_io";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("raw float64 round trip is exact")
{
    const ImageShape shape{3, 5};
    const auto data = testing::randn(shape.size(), 1);
    const auto path = scratch("a.raw");
    write_raw(path, shape, data);
    CHECK(fs::file_size(path) == 16 + 8 * shape.size());
    const auto img = read_raw_real(path);
    CHECK(img.shape == shape);
    CHECK(img.data == data);
    CHECK(load_image(path).data == data);
}

TEST_CASE("raw complex round trip")
{
    const ImageShape shape{2, 2};
    const std::vector<std::complex<double>> v{{1, 2}, {-3, 0.5}, {0, 0}, {1e-300, -7}};
    const auto path = scratch("k.raw");
    write_raw(path, shape, v);
    ImageShape got{};
    CHECK(read_raw_complex(path, got) == v);
    CHECK(got == shape);
    CHECK_THROWS_AS(read_raw_real(path), ValidationError);
}

TEST_CASE("pgm round trip quantizes")
{
    const ImageShape shape{4, 6};
    std::vector<double> data(shape.size());
    for (std::size_t k = 0; k < data.size(); ++k)
        data[k] = static_cast<double>(k) / 23.0;
    data[0] = -0.5;
    data[1] = 1.5;
    for (int bits : {8, 16}) {
        const auto path = scratch("i" + std::to_string(bits) + ".pgm");
        write_pgm(path, shape, data, bits);
        const auto img = read_pgm(path);
        CHECK(img.shape == shape);
        const double step = bits == 8 ? 1.0 / 255 : 1.0 / 65535;
        CHECK(img.data[0] == 0.0);
        CHECK(img.data[1] == 1.0);
        for (std::size_t k = 2; k < data.size(); ++k)
            CHECK(std::abs(img.data[k] - data[k]) <= step / 2 + 1e-15);
    }
}

TEST_CASE("malformed files are rejected")
{
    const auto path = scratch("bad.pgm");
    {
        std::ofstream f(path, std::ios::binary);
        f << "P2\n2 2\n255\n0 0 0 0\n";
    }
    CHECK_THROWS_AS(read_pgm(path), ValidationError);
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n4 4\n255\n";
        f.put('\0');
    }
    CHECK_THROWS_AS(read_pgm(path), ValidationError);
    const auto raw = scratch("bad.raw");
    {
        std::ofstream f(raw, std::ios::binary);
        f << "NOPE1234abcdefgh";
    }
    CHECK_THROWS_AS(read_raw_real(raw), ValidationError);
    CHECK_THROWS_AS(read_pgm(scratch("missing.pgm")), ValidationError);
}

TEST_CASE("masks round trip through pgm")
{
    const auto mask = random_pixel_mask({5, 7}, 0.4, 2);
    const auto path = scratch("m.pgm");
    save_mask(path, mask);
    const auto back = load_mask(path);
    CHECK(back.shape == mask.shape);
    CHECK(back.keep == mask.keep);
}

TEST_CASE("key value config")
{
    const auto kv = KeyValueConfig::parse("# comment\nkind = sr\nfactor=4  # trailing\n\nflag = yes\nfactor = 2\n");
    CHECK(kv.get("kind") == "sr");
    CHECK(kv.get_int("factor", 0) == 2);
    CHECK(kv.get_bool("flag", false));
    CHECK(kv.get_double("missing", 1.5) == 1.5);
    CHECK(kv.get("missing", "x") == "x");
    CHECK_THROWS_AS(kv.get("missing"), ValidationError);
    CHECK_THROWS_AS(kv.get_int("kind", 0), ValidationError);
    CHECK_NOTHROW(kv.require_known({"kind", "factor", "flag"}));
    CHECK_THROWS_AS(kv.require_known({"kind"}), ValidationError);
    CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ValidationError);
    CHECK_THROWS_AS(KeyValueConfig::load(scratch("missing.cfg")), ValidationError);
}
