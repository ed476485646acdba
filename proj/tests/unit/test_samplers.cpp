#include "ccdf/analysis.hpp"
#include "ccdf/error.hpp"
#include "ccdf/samplers.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace ccdf;
using testing::dist;
using testing::norm;
using testing::randn;
using testing::rel_err;

namespace {

constexpr std::uint64_t kCorrectorGolden = 1420178771599607333ULL;

const Schedule& vp()
{
    static const auto s = make_vp_schedule(1e-4, 0.02, 1000);
    return s;
}

const Schedule& ve()
{
    static const auto s = make_ve_schedule(0.01, 378, 1000);
    return s;
}

std::uint64_t fnv1a(std::span<const double> v)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

} // namespace

TEST_CASE("forward diffusion uses one draw and no score")
{
    const auto x0 = randn(32, 1);
    const auto z = randn(32, 2);
    std::vector<double> out(32);
    forward_diffuse(x0, 1000, vp(), z, out);
    const auto [a, b] = vp().forward_coeffs(1000);
    CHECK(rel_err(a, 0.0063528180875700214) < 1e-10);
    for (std::size_t k = 0; k < 32; ++k)
        CHECK(out[k] == a * x0[k] + b * z[k]);
    forward_diffuse(x0, 1000, vp(), {}, out);
    for (std::size_t k = 0; k < 32; ++k)
        CHECK(out[k] == a * x0[k]);
    RngStream r1(5, 0), r2(5, 0);
    const auto via_rng = forward_diffuse(x0, 300, vp(), r1);
    const auto z2 = r2.normal_vector(32);
    forward_diffuse(x0, 300, vp(), z2, out);
    CHECK(via_rng == out);
    CHECK(r1.draws() == 32);
    CHECK_THROWS_AS(forward_diffuse(x0, 0, vp(), r1), ValidationError);
    CHECK_THROWS_AS(forward_diffuse(x0, 1001, vp(), r1), ValidationError);
}

TEST_CASE("forward diffusion second moment")
{
    const std::size_t n = 16;
    const auto x0 = randn(n, 3);
    const int np = 100;
    const auto [a, b] = vp().forward_coeffs(np);
    RngStream rng(11, 0);
    double mean = 0.0, m2 = 0.0;
    const int trials = 10000;
    for (int t = 1; t <= trials; ++t) {
        const auto x = forward_diffuse(x0, np, vp(), rng);
        double e = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            e += (x[k] - a * x0[k]) * (x[k] - a * x0[k]);
        e /= n;
        const double d = e - mean;
        mean += d / t;
        m2 += d * (e - mean);
    }
    const double se = std::sqrt(m2 / (trials - 1) / trials);
    CHECK(std::abs(mean - b * b) < 4 * se);
}

TEST_CASE("ddpm step degenerate cases")
{
    ZeroScoreOracle zero;
    const auto x = randn(10, 4);
    std::vector<double> out(10);
    reverse_step_ddpm(x, 500, vp(), zero, {}, out);
    for (std::size_t k = 0; k < 10; ++k)
        CHECK(rel_err(out[k], x[k] / std::sqrt(vp().alpha(500))) < 1e-15);

    const auto ref = randn(10, 5);
    ConditionalScoreOracle cond(ref);
    for (int i : {2, 100, 1000}) {
        std::vector<double> xi(10);
        for (std::size_t k = 0; k < 10; ++k)
            xi[k] = vp().forward_coeffs(i).a * ref[k];
        reverse_step_ddpm(xi, i, vp(), cond, {}, out);
        const double a_prev = vp().forward_coeffs(i - 1).a;
        for (std::size_t k = 0; k < 10; ++k)
            CHECK(std::abs(out[k] - a_prev * ref[k]) < 1e-13 * (1 + std::abs(ref[k])));
    }
}

TEST_CASE("reverse steps contract coupled pairs by lambda")
{
    const auto ref = randn(20, 6);
    ConditionalScoreOracle cond(ref);
    const auto x = randn(20, 7), y = randn(20, 8), z = randn(20, 9);
    std::vector<double> ox(20), oy(20);
    const auto ddim = vp().with_kind(SamplerKind::DDIM);
    for (int i : {1, 2, 37, 200, 999, 1000}) {
        reverse_step_ddpm(x, i, vp(), cond, z, ox);
        reverse_step_ddpm(y, i, vp(), cond, z, oy);
        const double lam = step_contraction(vp(), SamplerKind::DDPM, i);
        if (i == 1)
            CHECK(dist(ox, oy) < 1e-12 * dist(x, y));
        else
            CHECK(rel_err(dist(ox, oy) / dist(x, y), lam) < 1e-9);

        reverse_step_smld(x, i, ve(), cond, z, ox);
        reverse_step_smld(y, i, ve(), cond, z, oy);
        const double ls = step_contraction(ve(), SamplerKind::SMLD, i);
        if (i == 1)
            CHECK(dist(ox, oy) < 1e-12 * dist(x, y));
        else
            CHECK(rel_err(dist(ox, oy) / dist(x, y), ls) < 1e-9);

        const auto dx = reverse_step_ddim(x, i, ddim, cond);
        const auto dy = reverse_step_ddim(y, i, ddim, cond);
        const double ratio = (dist(dx, dy) / std::sqrt(ddim.alpha_bar(i - 1))) /
                             (dist(x, y) / std::sqrt(ddim.alpha_bar(i)));
        const double ld = step_contraction(ddim, SamplerKind::DDIM, i);
        if (i == 1)
            CHECK(ratio < 1e-10);
        else
            CHECK(rel_err(ratio, ld) < 1e-9);
    }
}

TEST_CASE("ddpm jacobian by finite differences equals lambda")
{
    ConditionalScoreOracle cond(randn(6, 1));
    const auto x = randn(6, 2);
    const int i = 321;
    const double lam = step_contraction(vp(), SamplerKind::DDPM, i);
    std::vector<double> op(6), om(6);
    for (std::size_t k = 0; k < 6; ++k) {
        auto xp = x, xm = x;
        xp[k] += 1e-5;
        xm[k] -= 1e-5;
        reverse_step_ddpm(xp, i, vp(), cond, {}, op);
        reverse_step_ddpm(xm, i, vp(), cond, {}, om);
        for (std::size_t j = 0; j < 6; ++j) {
            const double fd = (op[j] - om[j]) / 2e-5;
            if (j == k)
                CHECK(rel_err(fd, lam) < 1e-6);
            else
                CHECK(std::abs(fd) < 1e-8);
        }
    }
}

TEST_CASE("smld step degenerate case is the identity")
{
    ZeroScoreOracle zero;
    const auto x = randn(10, 4);
    std::vector<double> out(10);
    reverse_step_smld(x, 700, ve(), zero, {}, out);
    CHECK(out == x);
    CHECK_THROWS_AS(reverse_step_smld(x, 700, vp(), zero, {}, out), ValidationError);
    CHECK_THROWS_AS(reverse_step_ddpm(x, 700, ve(), zero, {}, out), ValidationError);
}

TEST_CASE("ddim forms agree and zero score rescales")
{
    const auto ddim = vp().with_kind(SamplerKind::DDIM);
    GaussianScoreOracle g(randn(30, 1), 0.3);
    RngStream rng(3, 3);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int i = 1 + static_cast<int>(rng.uniform() * 1000) % 1000;
        const auto x = rng.normal_vector(30);
        const auto a = reverse_step_ddim(x, i, ddim, g);
        const auto b = reverse_step_ddim_reparameterized(x, i, ddim, g);
        worst = std::max(worst, dist(a, b) / norm(a));
    }
    CHECK(worst < 1e-12);
    ZeroScoreOracle zero;
    const auto x = randn(5, 2);
    const auto o = reverse_step_ddim(x, 400, ddim, zero);
    for (std::size_t k = 0; k < 5; ++k)
        CHECK(rel_err(o[k], x[k] * std::sqrt(ddim.alpha_bar(399) / ddim.alpha_bar(400))) < 1e-13);
    CHECK_THROWS_AS(reverse_step_ddim(x, 0, ddim, zero), ValidationError);
    CHECK_THROWS_AS(reverse_step_ddim(x, 3, ve(), zero), ValidationError);
}

TEST_CASE("reverse steps reject bad indices and sizes")
{
    ZeroScoreOracle zero;
    const auto x = randn(4, 1);
    std::vector<double> out(4), short_out(3);
    CHECK_THROWS_AS(reverse_step_ddpm(x, 0, vp(), zero, {}, out), ValidationError);
    CHECK_THROWS_AS(reverse_step_ddpm(x, 1001, vp(), zero, {}, out), ValidationError);
    CHECK_THROWS_AS(reverse_step_ddpm(x, 5, vp(), zero, {}, short_out), ValidationError);
    CHECK_THROWS_AS(reverse_step_ddpm(x, 5, vp(), zero, std::vector<double>(3), out), ValidationError);
    ConditionalScoreOracle cond(randn(5, 1));
    CHECK_THROWS_AS(reverse_step_ddpm(x, 5, vp(), cond, {}, out), ValidationError);
}

TEST_CASE("langevin corrector")
{
    const auto x = randn(64, 12);
    SUBCASE("r = 0 returns x")
    {
        ConditionalScoreOracle cond(randn(64, 13));
        RngStream rng(1, 1);
        const auto r = langevin_corrector(x, 10, ve(), cond, 0.0, rng);
        CHECK(r.x == x);
        CHECK(r.step_size == 0.0);
        CHECK_FALSE(r.skipped);
    }
    SUBCASE("huge score norm drives the step size to zero")
    {
        GaussianScoreOracle tight(std::vector<double>(64, 1e6), 0.0);
        RngStream r1(1, 2), r2(1, 2);
        const auto lin = langevin_corrector(x, 1, ve(), tight, 0.16, r1);
        CHECK(lin.step_size < 1e-9);
        const auto s = eval_score(tight, x, 1, ve());
        std::vector<double> drift(64);
        for (std::size_t k = 0; k < 64; ++k)
            drift[k] = lin.x[k] - x[k] - lin.step_size * s[k];
        CHECK(norm(drift) < 1e-3 * norm(x));
        const auto sq = langevin_corrector(x, 1, ve(), tight, 0.16, r2, CorrectorRule::Squared);
        CHECK(dist(sq.x, x) < 1e-6 * norm(x));
    }
    SUBCASE("zero score skips")
    {
        ZeroScoreOracle zero;
        RngStream rng(1, 3);
        const auto r = langevin_corrector(x, 10, ve(), zero, 0.16, rng);
        CHECK(r.skipped);
        CHECK(r.x == x);
        CHECK(rng.draws() == 64);
    }
    SUBCASE("step size rules")
    {
        ConditionalScoreOracle cond(randn(64, 14));
        RngStream r1(4, 4), r2(4, 4), r3(4, 4);
        const auto lin = langevin_corrector(x, 500, ve(), cond, 0.16, r1);
        const auto sq = langevin_corrector(x, 500, ve(), cond, 0.16, r2, CorrectorRule::Squared);
        const auto z = r3.normal_vector(64);
        const auto s = eval_score(cond, x, 500, ve());
        const double ratio = 0.16 * norm(z) / norm(s);
        CHECK(rel_err(lin.step_size, 2 * ratio) < 1e-14);
        CHECK(rel_err(sq.step_size, 2 * ratio * ratio) < 1e-14);
        for (std::size_t k = 0; k < 64; ++k)
            CHECK(std::abs(lin.x[k] - (x[k] + lin.step_size * s[k] + std::sqrt(2 * lin.step_size) * z[k])) < 1e-12);
    }
    SUBCASE("regression-locked output")
    {
        ConditionalScoreOracle cond(randn(64, 15));
        RngStream rng(2024, 7);
        const auto r = langevin_corrector(x, 200, ve(), cond, 0.16, rng);
        CHECK(fnv1a(r.x) == kCorrectorGolden);
    }
    SUBCASE("variance-exploding only")
    {
        ZeroScoreOracle zero;
        RngStream rng(1, 1);
        CHECK_THROWS_AS(langevin_corrector(x, 10, vp(), zero, 0.16, rng), ValidationError);
        CHECK_THROWS_AS(langevin_corrector(x, 10, ve(), zero, -1.0, rng), ValidationError);
    }
}

TEST_CASE("ccdf with identity consistency and DDIM lands on the anchor")
{
    const auto ref = randn(32, 20);
    ConditionalScoreOracle cond(ref);
    IdentityConsistency id(32);
    const auto ddim = vp().with_kind(SamplerKind::DDIM);
    const auto init = randn(32, 21);
    for (double t0 : {0.01, 0.1, 0.5, 1.0}) {
        CcdfConfig cfg;
        cfg.t0 = t0;
        RngStream rng(1, 0);
        const auto r = ccdf_sample(init, id, cfg, ddim, cond, rng);
        CHECK(dist(r.x, ref) < 1e-10 * norm(ref));
    }
}

TEST_CASE("ccdf step counts")
{
    const auto ref = randn(64, 1);
    ConditionalScoreOracle cond(ref);
    IdentityConsistency id(64);
    CcdfConfig cfg;
    cfg.t0 = 0.02;
    RngStream rng(1, 0);
    auto r = ccdf_sample(ref, id, cfg, vp(), cond, rng);
    CHECK(r.n_prime == 20);
    CHECK(r.reverse_steps == 20);
    CHECK(r.corrector_steps == 0);
    CHECK(r.consistency_applications == 20);
    r = ccdf_sample(ref, id, cfg, ve(), cond, rng);
    CHECK(r.reverse_steps == 20);
    CHECK(r.corrector_steps + r.corrector_skips == 20);
    CHECK(r.consistency_applications == 40);
    cfg.consistency_every_step = false;
    cfg.use_corrector = false;
    r = ccdf_sample(ref, id, cfg, ve(), cond, rng);
    CHECK(r.consistency_applications == 1);
}

TEST_CASE("ccdf mri output is consistent on sampled frequencies")
{
    const ImageShape shape{16, 16};
    const auto truth = randn(shape.size(), 30);
    const auto mask = gaussian1d_mask(shape, 4.0, 0.08, 3);
    const auto op = MriProjection::from_image(mask, truth);
    GaussianScoreOracle g(std::vector<double>(shape.size(), 0.0), 1.0);
    CcdfConfig cfg;
    cfg.t0 = 0.02;
    cfg.corrector_rule = CorrectorRule::Squared;
    RngStream rng(9, 9);
    const auto r = ccdf_sample(op.zero_filled(), op, cfg, ve(), g, rng);
    CHECK(op.consistency_residual(r.x) < 1e-10);
    CHECK(r.reverse_steps == 20);
}

TEST_CASE("ccdf is deterministic per seed and DDIM per forward draw")
{
    const auto ref = randn(24, 1);
    GaussianScoreOracle g(ref, 0.5);
    const auto mask = random_pixel_mask({4, 6}, 0.5, 2);
    InpaintProjection inp(mask, ref, vp());
    CcdfConfig cfg;
    cfg.t0 = 0.3;
    RngStream a(77, 1), b(77, 1), c(78, 1);
    const auto ra = ccdf_sample(randn(24, 2), inp, cfg, vp(), g, a);
    const auto rb = ccdf_sample(randn(24, 2), inp, cfg, vp(), g, b);
    const auto rc = ccdf_sample(randn(24, 2), inp, cfg, vp(), g, c);
    CHECK(ra.x == rb.x);
    CHECK(ra.x != rc.x);

    const auto ddim = vp().with_kind(SamplerKind::DDIM);
    IdentityConsistency id(24);
    SamplerStreams s1 = SamplerStreams::from(RngStream(5, 5));
    SamplerStreams s2{RngStream(5, 5).derive(1), RngStream(999, 0), RngStream(123, 4)};
    const auto d1 = ccdf_sample(randn(24, 2), id, cfg, ddim, g, s1);
    const auto d2 = ccdf_sample(randn(24, 2), id, cfg, ddim, g, s2);
    CHECK(d1.x == d2.x);
}

TEST_CASE("coupled trajectories with shared noise contract at least as fast as lambda")
{
    const ImageShape shape{8, 8};
    const auto truth = randn(64, 40);
    ConditionalScoreOracle cond(truth);
    const auto mask = random_pixel_mask(shape, 0.5, 1);
    InpaintProjection inp(mask, truth, vp());
    SuperResolutionProjection sr(shape, 2, truth, vp());
    const auto mri = MriProjection::from_image(gaussian1d_mask(shape, 2.0, 0.2, 1), truth);
    CcdfConfig cfg;
    cfg.t0 = 0.05;
    for (const ConsistencyOp* op : {static_cast<const ConsistencyOp*>(&inp), static_cast<const ConsistencyOp*>(&sr),
                                    static_cast<const ConsistencyOp*>(&mri)}) {
        CcdfTrajectory t1(vp(), cond, *op, cfg), t2(vp(), cond, *op, cfg);
        t1.start_at(randn(64, 41));
        t2.start_at(randn(64, 42));
        RngStream r1(1, 1), r2(1, 1), a1(2, 2), a2(2, 2);
        while (!t1.finished()) {
            const int i = t1.index();
            const double before = dist(t1.state(), t2.state());
            t1.step(r1, a1);
            t2.step(r2, a2);
            const double after = dist(t1.state(), t2.state());
            CHECK(after <= step_contraction(vp(), SamplerKind::DDPM, i) * before * (1 + 1e-9) + 1e-12);
        }
    }
}

TEST_CASE("ccdf rejects mismatched or uncertified inputs")
{
    ConditionalScoreOracle cond(randn(8, 1));
    IdentityConsistency id8(8), id9(9);
    CcdfConfig cfg;
    cfg.t0 = 0.1;
    RngStream rng(1, 1);
    CHECK_THROWS_AS(ccdf_sample(randn(8, 2), id9, cfg, vp(), cond, rng), ValidationError);
    CHECK_THROWS_AS(ccdf_sample(randn(7, 2), id8, cfg, vp(), cond, rng), ValidationError);
    LinearMapConsistency black(
        8, [](std::span<const double> x, std::span<double> o) { std::copy(x.begin(), x.end(), o.begin()); },
        nullptr, std::vector<double>(8, 0.0));
    CHECK_THROWS_AS(ccdf_sample(randn(8, 2), black, cfg, vp(), cond, rng), ValidationError);
    black.set_certificate(1.0);
    CHECK_NOTHROW(ccdf_sample(randn(8, 2), black, cfg, vp(), cond, rng));
    black.set_certificate(1.5);
    CHECK_THROWS_AS(ccdf_sample(randn(8, 2), black, cfg, vp(), cond, rng), ValidationError);
    const auto ve_ddim = ve().with_kind(SamplerKind::DDIM);
    CHECK_THROWS_AS(ccdf_sample(randn(8, 2), id8, cfg, ve_ddim, cond, rng), ValidationError);
    CcdfTrajectory t(vp(), cond, id8, cfg);
    RngStream a(1, 1);
    CHECK_THROWS_AS(t.step(rng, a), ValidationError);
}
