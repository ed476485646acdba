#pragma once

#include "ccdf/schedule.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccdf {

/// Score evaluator s(x, i) ~ grad log p_i(x). Implementations are immutable
/// and reentrant.
class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;

    /// Dimension the oracle is bound to, or 0 when it accepts any size.
    virtual std::size_t dim() const noexcept = 0;
    virtual std::string describe() const = 0;

    /// Unchecked evaluation; callers go through eval_score().
    virtual void evaluate(std::span<const double> x, int i, const Schedule& schedule,
                          std::span<double> out) const = 0;
    /// Exact diagonal of ds/dx at (x, i).
    virtual void jacobian_diagonal(std::span<const double> x, int i, const Schedule& schedule,
                                   std::span<double> out) const = 0;
};

/// Score of the forward perturbation kernel anchored at x_ref:
/// s(x, i) = -(x - a_i x_ref) / b_i^2, Jacobian -I / b_i^2.
class ConditionalScoreOracle final : public ScoreOracle {
public:
    explicit ConditionalScoreOracle(std::vector<double> x_ref);

    std::size_t dim() const noexcept override { return x_ref_.size(); }
    std::string describe() const override { return "conditional"; }
    const std::vector<double>& anchor() const noexcept { return x_ref_; }

    void evaluate(std::span<const double> x, int i, const Schedule& schedule,
                  std::span<double> out) const override;
    void jacobian_diagonal(std::span<const double> x, int i, const Schedule& schedule,
                           std::span<double> out) const override;

private:
    std::vector<double> x_ref_;
};

/// Exact marginal score when p_0 = N(mu, diag(var)):
/// s(x, i) = -(x - a_i mu) / (a_i^2 var + b_i^2).
class GaussianScoreOracle final : public ScoreOracle {
public:
    GaussianScoreOracle(std::vector<double> mu, std::vector<double> var);
    GaussianScoreOracle(std::vector<double> mu, double var);

    std::size_t dim() const noexcept override { return mu_.size(); }
    std::string describe() const override { return "gaussian"; }
    const std::vector<double>& mean() const noexcept { return mu_; }
    const std::vector<double>& variance() const noexcept { return var_; }

    void evaluate(std::span<const double> x, int i, const Schedule& schedule,
                  std::span<double> out) const override;
    void jacobian_diagonal(std::span<const double> x, int i, const Schedule& schedule,
                           std::span<double> out) const override;

private:
    std::vector<double> mu_;
    std::vector<double> var_;
};

/// s = 0 everywhere. Degenerate case used to isolate the deterministic
/// rescaling part of the reverse steps.
class ZeroScoreOracle final : public ScoreOracle {
public:
    std::size_t dim() const noexcept override { return 0; }
    std::string describe() const override { return "zero"; }
    void evaluate(std::span<const double>, int, const Schedule&, std::span<double> out) const override;
    void jacobian_diagonal(std::span<const double>, int, const Schedule&,
                           std::span<double> out) const override;
};

/// Validated evaluation: finite input, 1 <= i <= N, matching dimension.
std::vector<double> eval_score(const ScoreOracle& oracle, std::span<const double> x, int i,
                               const Schedule& schedule);
void eval_score_into(const ScoreOracle& oracle, std::span<const double> x, int i,
                     const Schedule& schedule, std::span<double> out);
std::vector<double> score_jacobian_diag(const ScoreOracle& oracle, std::span<const double> x, int i,
                                        const Schedule& schedule);

} // namespace ccdf
