#include "ccdf/error.hpp"
#include "ccdf/score.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace ccdf;
using testing::randn;
using testing::rel_err;

TEST_CASE("conditional score vanishes at the kernel mean")
{
    const auto s = make_vp_schedule(1e-4, 0.02, 1000);
    const auto ref = randn(16, 1);
    ConditionalScoreOracle o(ref);
    for (int i : {1, 300, 1000}) {
        std::vector<double> x(ref.size());
        const double a = s.forward_coeffs(i).a;
        for (std::size_t k = 0; k < x.size(); ++k)
            x[k] = a * ref[k];
        for (double v : eval_score(o, x, i, s))
            CHECK(std::abs(v) < 1e-12);
    }
}

TEST_CASE("conditional score one noise unit away")
{
    const auto s = make_vp_schedule(1e-4, 0.02, 1000);
    const auto ref = randn(8, 2);
    ConditionalScoreOracle o(ref);
    const auto [a, b] = s.forward_coeffs(1000);
    std::vector<double> x(8);
    for (std::size_t k = 0; k < 8; ++k)
        x[k] = a * ref[k] + b;
    for (double v : eval_score(o, x, 1000, s))
        CHECK(rel_err(v, -1.0 / 0.99997982064756999) < 1e-10);
}

TEST_CASE("gaussian oracle with zero variance equals the conditional oracle")
{
    const auto s = make_ve_schedule(0.01, 378, 100);
    const auto mu = randn(12, 3);
    ConditionalScoreOracle c(mu);
    GaussianScoreOracle g(mu, 0.0);
    const auto x = randn(12, 4);
    for (int i : {1, 50, 100}) {
        const auto sc = eval_score(c, x, i, s);
        const auto sg = eval_score(g, x, i, s);
        for (std::size_t k = 0; k < x.size(); ++k)
            CHECK(rel_err(sg[k], sc[k]) < 1e-14);
        for (double d : score_jacobian_diag(g, x, i, s)) {
            const double b = s.forward_coeffs(i).b;
            CHECK(rel_err(d, -1.0 / (b * b)) < 1e-14);
        }
    }
}

TEST_CASE("gaussian jacobian with unit variance on a VP schedule is -1")
{
    const auto s = Schedule::variance_preserving(0.75, 0.9, 2);  // alpha_bar_1 = 0.25
    GaussianScoreOracle g(std::vector<double>(5, 0.3), 1.0);
    for (double d : score_jacobian_diag(g, randn(5, 9), 1, s))
        CHECK(std::abs(d + 1.0) < 1e-15);
}

TEST_CASE("conditional jacobian is -1/b^2")
{
    const auto s = make_vp_schedule(1e-4, 0.02, 1000);
    ConditionalScoreOracle o(randn(6, 5));
    for (int i : {1, 17, 999}) {
        const double b = s.forward_coeffs(i).b;
        for (double d : score_jacobian_diag(o, randn(6, 6), i, s))
            CHECK(rel_err(d, -1.0 / (b * b)) < 1e-14);
    }
}

TEST_CASE("finite differences match the closed-form jacobian")
{
    const auto vp = make_vp_schedule(1e-4, 0.02, 1000);
    const auto ve = make_ve_schedule(0.01, 378, 1000);
    const auto ref = randn(10, 7);
    std::vector<double> var(10);
    for (std::size_t k = 0; k < var.size(); ++k)
        var[k] = 0.1 + 0.05 * k;
    ConditionalScoreOracle c(ref);
    GaussianScoreOracle g(ref, var);
    RngStream rng(8, 0);
    for (const Schedule* s : {&vp, &ve})
        for (const ScoreOracle* o : {static_cast<const ScoreOracle*>(&c), static_cast<const ScoreOracle*>(&g)})
            for (int trial = 0; trial < 10; ++trial) {
                const int i = 50 + static_cast<int>(rng.uniform() * 900);
                auto x = rng.normal_vector(10);
                const auto jd = score_jacobian_diag(*o, x, i, *s);
                const double h = 1e-5 * std::max(1.0, s->forward_coeffs(i).b);
                for (std::size_t k = 0; k < x.size(); ++k) {
                    auto xp = x, xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    const double fd = (eval_score(*o, xp, i, *s)[k] - eval_score(*o, xm, i, *s)[k]) / (2 * h);
                    CHECK(rel_err(fd, jd[k]) < 1e-6);
                }
            }
}

TEST_CASE("oracles are affine in x")
{
    const auto s = make_vp_schedule(1e-4, 0.02, 200);
    GaussianScoreOracle g(randn(9, 1), 0.4);
    const auto x = randn(9, 2), y = randn(9, 3);
    const double w = 0.3;
    std::vector<double> mix(9);
    for (std::size_t k = 0; k < 9; ++k)
        mix[k] = w * x[k] + (1 - w) * y[k];
    const auto sx = eval_score(g, x, 100, s), sy = eval_score(g, y, 100, s), sm = eval_score(g, mix, 100, s);
    for (std::size_t k = 0; k < 9; ++k)
        CHECK(std::abs(sm[k] - (w * sx[k] + (1 - w) * sy[k])) < 1e-12);
}

TEST_CASE("score evaluation validates its inputs")
{
    const auto s = make_vp_schedule(1e-4, 0.02, 10);
    ConditionalScoreOracle o(std::vector<double>(4, 0.0));
    std::vector<double> x(4, 0.1);
    CHECK_THROWS_AS(eval_score(o, x, 0, s), ValidationError);
    CHECK_THROWS_AS(eval_score(o, x, 11, s), ValidationError);
    CHECK_THROWS_AS(eval_score(o, std::vector<double>(3, 0.0), 1, s), ValidationError);
    x[2] = std::nan("");
    CHECK_THROWS_AS(eval_score(o, x, 1, s), ValidationError);
    x[2] = INFINITY;
    CHECK_THROWS_AS(eval_score(o, x, 1, s), ValidationError);
    CHECK_THROWS_AS(GaussianScoreOracle(std::vector<double>(3, 0.0), -1.0), ValidationError);
    CHECK_THROWS_AS(ConditionalScoreOracle(std::vector<double>{}), ValidationError);
    ZeroScoreOracle z;
    for (double v : eval_score(z, std::vector<double>(7, 3.0), 5, s))
        CHECK(v == 0.0);
}
