#include "ccdf/analysis.hpp"
#include "ccdf/error.hpp"
#include "ccdf/samplers.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ccdf;
using testing::randn;
using testing::rel_err;

namespace {

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

const Schedule& ddim()
{
    static const auto s = vp().with_kind(SamplerKind::DDIM);
    return s;
}

} // namespace

TEST_CASE("last step contraction is zero")
{
    CHECK(step_contraction(vp(), SamplerKind::DDPM, 1) == 0.0);
    CHECK(step_contraction(ve(), SamplerKind::SMLD, 1) == 0.0);
    CHECK(step_contraction(ddim(), SamplerKind::DDIM, 1) == 0.0);
}

TEST_CASE("contraction rates stay below one")
{
    for (const auto& [sch, kind] : {std::pair{vp(), SamplerKind::DDPM}, std::pair{ve(), SamplerKind::SMLD},
                                    std::pair{ddim(), SamplerKind::DDIM}}) {
        const auto r = contraction_rate(sch, kind, 1000);
        CHECK(r.per_step.size() == 1000);
        double mx = 0.0;
        for (double l : r.per_step) {
            CHECK(l >= 0.0);
            CHECK(l < 1.0);
            mx = std::max(mx, l);
        }
        CHECK(r.lambda == mx);
    }
    const auto coarse = make_vp_schedule(0.1, 0.9, 5);
    CHECK(contraction_rate(coarse, SamplerKind::DDPM, 5).lambda < 1.0);
    CHECK_THROWS_AS(contraction_rate(vp(), SamplerKind::DDPM, 0), ValidationError);
    CHECK_THROWS_AS(contraction_rate(vp(), SamplerKind::DDPM, 1001), ValidationError);
    CHECK_THROWS_AS(contraction_rate(vp(), SamplerKind::SMLD, 10), ValidationError);
}

TEST_CASE("ddpm contraction at n_prime 200 matches the oracle and the coupled pair")
{
    const auto r = contraction_rate(vp(), SamplerKind::DDPM, 200);
    CHECK(rel_err(r.lambda, 0.99009452962654642) < 1e-12);
    ConditionalScoreOracle cond(randn(16, 1));
    const auto x = randn(16, 2), y = randn(16, 3), z = randn(16, 4);
    std::vector<double> ox(16), oy(16);
    reverse_step_ddpm(x, 200, vp(), cond, z, ox);
    reverse_step_ddpm(y, 200, vp(), cond, z, oy);
    CHECK(rel_err(testing::dist(ox, oy) / testing::dist(x, y), r.per_step[199]) < 1e-9);
}

TEST_CASE("noise constants")
{
    CHECK(noise_constant(ddim(), SamplerKind::DDIM, 500, 64) == 0.0);
    for (int np : {1, 17, 200, 1000})
        CHECK(rel_err(noise_constant(vp(), SamplerKind::DDPM, np, 64), 64 * vp().beta(np)) < 1e-15);
    const double c = noise_constant(ve(), SamplerKind::SMLD, 200, 64);
    CHECK(rel_err(c, 0.0089038765546670372) < 1e-12);
    const double s = ve().sigma(200);
    const double closed = 64 * s * s * (1 - std::pow(0.01 / 378.0, 2.0 / 999.0));
    CHECK(rel_err(c, closed) < 1e-10);
}

TEST_CASE("forward error")
{
    CHECK(rel_err(forward_error(10, vp(), SamplerKind::DDPM, 100, 64), 22.151858810354677) < 1e-13);
    const auto [a, b] = vp().forward_coeffs(300);
    CHECK(rel_err(forward_error(0, vp(), SamplerKind::DDPM, 300, 8), 2 * b * b * 8) < 1e-15);
    const double full = forward_error(5, vp(), SamplerKind::DDPM, 1000, 64);
    CHECK(full <= 2 * 64 + 5 * 1e-4);
    CHECK(full > 127.9);
    const double s = ddim().ddim_sigma(50);
    CHECK(rel_err(forward_error(3, ddim(), SamplerKind::DDIM, 50, 10), 3 + 2 * s * s * 10) < 1e-14);
    CHECK_THROWS_AS(forward_error(-1, vp(), SamplerKind::DDPM, 10, 4), ValidationError);
}

TEST_CASE("forward error against Monte Carlo")
{
    const std::size_t n = 64;
    const auto x = randn(n, 5);
    auto y = x;
    const double shift = std::sqrt(10.0 / n);
    for (auto& v : y)
        v += shift;
    const int trials = 10000;
    RngStream rx(8, 1), ry(8, 2);
    double mean = 0.0, m2 = 0.0;
    for (int t = 1; t <= trials; ++t) {
        const auto fx = forward_diffuse(x, 100, vp(), rx);
        const auto fy = forward_diffuse(y, 100, vp(), ry);
        const double e = testing::dist(fx, fy) * testing::dist(fx, fy);
        const double d = e - mean;
        mean += d / t;
        m2 += d * (e - mean);
    }
    const double se = std::sqrt(m2 / (trials - 1) / trials);
    CHECK(std::abs(mean - forward_error(10, vp(), SamplerKind::DDPM, 100, n)) < 4 * se);
}

TEST_CASE("error bound arithmetic")
{
    const auto b = error_bound(0.5, {0.5, 0.5}, 0.0, {0.0, 0.0}, 1.0, 8.0);
    CHECK(b.simple == 0.5);
    CHECK(b.recursive == 0.5);
    REQUIRE(b.trace.size() == 3);
    CHECK(b.trace[0] == 8.0);
    CHECK(b.trace[1] == 2.0);
    CHECK(b.trace[2] == 0.5);
    CHECK_THROWS_AS(error_bound(1.0, {1.0}, 0.0, {0.0}, 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(error_bound(0.5, {0.5}, 0.0, {0.0, 0.0}, 1.0, 1.0), ValidationError);
}

TEST_CASE("ddim simple bound is the pure contraction term")
{
    const auto r = contraction_report(ddim(), SamplerKind::DDIM, 120, 64, 4.0, 0.5);
    CHECK(r.C == 0.0);
    CHECK(r.bound_simple == std::pow(r.lambda, 240) * r.forward_error);
    CHECK(r.bound_recursive <= r.bound_simple);
}

TEST_CASE("recursive bound never exceeds the simple bound")
{
    RngStream rng(99, 0);
    int checked = 0;
    for (int t = 0; t < 1000; ++t) {
        const int kind = t % 3;
        const int N = 2 + static_cast<int>(rng.uniform() * 400);
        const int np = 1 + static_cast<int>(rng.uniform() * N) % N;
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 1024);
        const double eps0 = rng.uniform() * 200;
        const double tau = 0.01 + 0.99 * rng.uniform();
        Schedule s = [&] {
            if (kind == 1) {
                const double smin = 0.001 + rng.uniform() * 0.1;
                return make_ve_schedule(smin, smin * (2 + rng.uniform() * 5000), N);
            }
            const double bmin = 1e-5 + rng.uniform() * 1e-3;
            auto v = make_vp_schedule(bmin, bmin + rng.uniform() * 0.05, N);
            return kind == 2 ? v.with_kind(SamplerKind::DDIM) : v;
        }();
        const auto k = kind == 0 ? SamplerKind::DDPM : kind == 1 ? SamplerKind::SMLD : SamplerKind::DDIM;
        const auto r = contraction_report(s, k, np, n, eps0, tau);
        CHECK(r.lambda < 1.0);
        CHECK(r.bound_recursive <= r.bound_simple + 1e-12 * (1 + r.bound_simple));
        CHECK(r.bound_trace.size() == static_cast<std::size_t>(np) + 1);
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("report lists the alternative C readings")
{
    const auto r = contraction_report(vp(), SamplerKind::DDPM, 200, 64, 10, 1.0);
    REQUIRE(r.C_candidates.size() == 3);
    CHECK(r.C == r.C_candidates[0].value);
    CHECK(rel_err(r.C_candidates[1].value, 64 * vp().beta(1000)) < 1e-14);
    CHECK(rel_err(r.C_candidates[2].value, 64 * (1 - vp().alpha_bar(1000))) < 1e-14);
    std::ostringstream out;
    write_report(out, r);
    CHECK(out.str().find("monte_carlo_tolerance") != std::string::npos);
    std::ostringstream csv;
    write_report_csv(csv, r);
    CHECK(csv.str().rfind("i,lambda_i,C_i,bound_recursive\n", 0) == 0);
}

TEST_CASE("ddim shortcut on the variance-exploding grid")
{
    const auto sched = ve().with_kind(SamplerKind::DDIM);
    const auto r = minimal_shortcut(12.8, 1.0, sched, SamplerKind::DDIM, 1.0, 64);
    REQUIRE(r.feasible);
    CHECK(r.n_prime == 329);
    const double closed = 1 + 999 * std::log(std::sqrt(12.8 / 128) / 0.01) / std::log(37800.0);
    CHECK(r.n_prime == static_cast<int>(std::ceil(closed)));
    for (const auto& c : r.conditions)
        CHECK(c.satisfied);
    const auto prev = shortcut_conditions(12.8, 1.0, sched, SamplerKind::DDIM, 1.0, 64, 328);
    CHECK_FALSE(prev.back().satisfied);
}

TEST_CASE("shortcut results satisfy their conditions and are minimal")
{
    const auto mask_tau = 1.0 / 64.0;
    struct Case {
        const Schedule* s;
        SamplerKind k;
        double eps0, mu, tau;
    };
    const Case cases[] = {{&vp(), SamplerKind::DDPM, 100, 1.0, mask_tau},
                          {&vp(), SamplerKind::DDPM, 64, 0.5, mask_tau},
                          {&ve(), SamplerKind::SMLD, 12.8, 1.0, 1.0},
                          {&ve(), SamplerKind::SMLD, 12.8, 0.5, 1.0},
                          {&ddim(), SamplerKind::DDIM, 12.8, 0.5, 1.0}};
    for (const auto& c : cases) {
        const auto r = minimal_shortcut(c.eps0, c.mu, *c.s, c.k, c.tau, 64);
        REQUIRE(r.feasible);
        for (const auto& cond : r.conditions)
            CHECK(cond.satisfied);
        if (r.n_prime > 1) {
            const auto before = shortcut_conditions(c.eps0, c.mu, *c.s, c.k, c.tau, 64, r.n_prime - 1);
            CHECK_FALSE(std::all_of(before.begin(), before.end(), [](const auto& x) { return x.satisfied; }));
        }
    }
}

TEST_CASE("infeasible shortcuts name the blocking condition")
{
    auto r = minimal_shortcut(1e-3, 1.0, vp(), SamplerKind::DDPM, 1.0, 64);
    CHECK_FALSE(r.feasible);
    CHECK(r.n_prime == 0);
    CHECK(r.violated == "ddpm-lower");
    r = minimal_shortcut(100, 1.0, vp(), SamplerKind::DDPM, 1.0, 64);
    CHECK_FALSE(r.feasible);
    CHECK(r.violated == "ddpm-upper");
    r = minimal_shortcut(1000, 1.0, vp(), SamplerKind::DDPM, 1.0, 64);
    CHECK(r.violated == "ddpm-normalization");
    r = minimal_shortcut(1e-6, 1.0, ve(), SamplerKind::SMLD, 1.0, 64);
    CHECK(r.violated == "sigmin");
    r = minimal_shortcut(1e-6, 1.0, ve().with_kind(SamplerKind::DDIM), SamplerKind::DDIM, 1.0, 64);
    CHECK_FALSE(r.feasible);
    CHECK(r.violated == "sigma0");
    std::ostringstream out;
    write_shortcut(out, r);
    CHECK(out.str().rfind("infeasible ", 0) == 0);
    CHECK_THROWS_AS(minimal_shortcut(0.0, 1.0, vp(), SamplerKind::DDPM, 1.0, 64), ValidationError);
    CHECK_THROWS_AS(minimal_shortcut(1.0, 1.5, vp(), SamplerKind::DDPM, 1.0, 64), ValidationError);
}

TEST_CASE("tau of shipped and black-box operators")
{
    const ImageShape shape{8, 8};
    const auto truth = randn(64, 1);
    CHECK(tau_of(IdentityConsistency(64)).value == 1.0);
    const auto mask = random_pixel_mask(shape, 0.25, 3);
    const auto t_inp = tau_of(InpaintProjection(mask, truth, vp()));
    CHECK(t_inp.exact);
    CHECK(t_inp.value == 48.0 / 64.0);
    CHECK(tau_of(SuperResolutionProjection(shape, 4, truth, vp())).value == 15.0 / 16.0);

    SuperResolutionProjection sr(shape, 4, truth, vp());
    LinearMapConsistency box(
        64, [&](std::span<const double> x, std::span<double> o) { sr.apply_linear(x, o); }, nullptr, {});
    const auto est = tau_of(box, 4000, 7);
    CHECK_FALSE(est.exact);
    CHECK(est.probes == 4000);
    CHECK(est.std_error > 0.0);
    CHECK(rel_err(est.value, 15.0 / 16.0) < 0.01);
}
