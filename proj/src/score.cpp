#include "ccdf/score.hpp"

#include "ccdf/error.hpp"

#include <algorithm>
#include <cmath>

namespace ccdf {

ConditionalScoreOracle::ConditionalScoreOracle(std::vector<double> x_ref) : x_ref_(std::move(x_ref))
{
    detail::require(!x_ref_.empty(), "conditional oracle needs a non-empty anchor");
    detail::require(std::all_of(x_ref_.begin(), x_ref_.end(), [](double v) { return std::isfinite(v); }),
                    "conditional oracle anchor must be finite");
}

void ConditionalScoreOracle::evaluate(std::span<const double> x, int i, const Schedule& schedule,
                                      std::span<double> out) const
{
    const auto [a, b] = schedule.forward_coeffs(i);
    const double inv_b2 = 1.0 / (b * b);
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = -(x[k] - a * x_ref_[k]) * inv_b2;
}

void ConditionalScoreOracle::jacobian_diagonal(std::span<const double>, int i, const Schedule& schedule,
                                               std::span<double> out) const
{
    const double b = schedule.forward_coeffs(i).b;
    std::fill(out.begin(), out.end(), -1.0 / (b * b));
}

GaussianScoreOracle::GaussianScoreOracle(std::vector<double> mu, std::vector<double> var)
    : mu_(std::move(mu)), var_(std::move(var))
{
    detail::require(!mu_.empty(), "gaussian oracle needs a non-empty mean");
    detail::require(mu_.size() == var_.size(), "gaussian oracle mean/variance size mismatch");
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        detail::require(std::isfinite(mu_[k]), "gaussian oracle mean must be finite");
        detail::require(std::isfinite(var_[k]) && var_[k] >= 0.0,
                        "gaussian oracle variance must be finite and non-negative");
    }
}

GaussianScoreOracle::GaussianScoreOracle(std::vector<double> mu, double var)
    : GaussianScoreOracle(mu, std::vector<double>(mu.size(), var))
{
}

void GaussianScoreOracle::evaluate(std::span<const double> x, int i, const Schedule& schedule,
                                   std::span<double> out) const
{
    const auto [a, b] = schedule.forward_coeffs(i);
    const double a2 = a * a;
    const double b2 = b * b;
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = -(x[k] - a * mu_[k]) / (a2 * var_[k] + b2);
}

void GaussianScoreOracle::jacobian_diagonal(std::span<const double>, int i, const Schedule& schedule,
                                            std::span<double> out) const
{
    const auto [a, b] = schedule.forward_coeffs(i);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = -1.0 / (a * a * var_[k] + b * b);
}

void ZeroScoreOracle::evaluate(std::span<const double>, int, const Schedule&, std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
}

void ZeroScoreOracle::jacobian_diagonal(std::span<const double>, int, const Schedule&,
                                        std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
}

namespace {

void check_call(const ScoreOracle& oracle, std::span<const double> x, int i, const Schedule& schedule,
                std::size_t out_size)
{
    if (i < 1 || i > schedule.size())
        throw ValidationError("score step index " + std::to_string(i) + " outside [1, " +
                              std::to_string(schedule.size()) + "]");
    if (oracle.dim() != 0 && oracle.dim() != x.size())
        throw ValidationError("score oracle dimension " + std::to_string(oracle.dim()) +
                              " does not match input of size " + std::to_string(x.size()));
    if (out_size != x.size())
        throw ValidationError("score output buffer has the wrong size");
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
        throw ValidationError("score input contains non-finite values");
}

} // namespace

void eval_score_into(const ScoreOracle& oracle, std::span<const double> x, int i, const Schedule& schedule,
                     std::span<double> out)
{
    check_call(oracle, x, i, schedule, out.size());
    oracle.evaluate(x, i, schedule, out);
}

std::vector<double> eval_score(const ScoreOracle& oracle, std::span<const double> x, int i,
                               const Schedule& schedule)
{
    std::vector<double> out(x.size());
    eval_score_into(oracle, x, i, schedule, out);
    return out;
}

std::vector<double> score_jacobian_diag(const ScoreOracle& oracle, std::span<const double> x, int i,
                                        const Schedule& schedule)
{
    std::vector<double> out(x.size());
    check_call(oracle, x, i, schedule, out.size());
    oracle.jacobian_diagonal(x, i, schedule, out);
    return out;
}

} // namespace ccdf
