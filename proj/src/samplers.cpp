#include "ccdf/samplers.hpp"

#include "ccdf/error.hpp"

#include <algorithm>
#include <cmath>

namespace ccdf {

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

void check_step(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                std::span<const double> noise, std::size_t out_size)
{
    if (i < 1 || i > schedule.size())
        throw ValidationError("reverse step index " + std::to_string(i) + " outside [1, " +
                              std::to_string(schedule.size()) + "]");
    if (oracle.dim() != 0 && oracle.dim() != x.size())
        throw ValidationError("score oracle dimension does not match the state");
    if (!noise.empty() && noise.size() != x.size())
        throw ValidationError("noise vector has the wrong size");
    if (out_size != x.size())
        throw ValidationError("output buffer has the wrong size");
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
        throw ValidationError("reverse step input contains non-finite values");
}

void require_kind(const Schedule& schedule, bool vp, const char* what)
{
    if (schedule.is_variance_preserving() != vp)
        throw ValidationError(std::string(what) + (vp ? " needs a variance-preserving schedule"
                                                      : " needs a variance-exploding schedule"));
}

// Unchecked kernels. `score` is scratch of the state's size.

void ddpm_kernel(std::span<const double> x, int i, const Schedule& s, const ScoreOracle& oracle,
                 std::span<const double> noise, std::span<double> score, std::span<double> out)
{
    oracle.evaluate(x, i, s, score);
    const double beta = s.beta(i);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(i));
    const double std_dev = s.sigma(i);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = (x[k] + beta * score[k]) * inv_sqrt_alpha;
        if (!noise.empty())
            out[k] += std_dev * noise[k];
    }
}

void smld_kernel(std::span<const double> x, int i, const Schedule& s, const ScoreOracle& oracle,
                 std::span<const double> noise, std::span<double> score, std::span<double> out)
{
    oracle.evaluate(x, i, s, score);
    const double si = s.sigma(i);
    const double sp = s.sigma(i - 1);
    const double d = (si - sp) * (si + sp);
    const double std_dev = std::sqrt(d);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = x[k] + d * score[k];
        if (!noise.empty())
            out[k] += std_dev * noise[k];
    }
}

void ddim_kernel(std::span<const double> x, int i, const Schedule& s, const ScoreOracle& oracle,
                 std::span<double> score, std::span<double> out)
{
    oracle.evaluate(x, i, s, score);
    const double sqrt_ab = std::sqrt(s.alpha_bar(i));
    const double sqrt_ab_prev = std::sqrt(s.alpha_bar(i - 1));
    const double sqrt_1mab = std::sqrt(s.one_minus_alpha_bar(i));
    const double sqrt_1mab_prev = std::sqrt(s.one_minus_alpha_bar(i - 1));
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double z_theta = -score[k] * sqrt_1mab;
        out[k] = sqrt_ab_prev * ((x[k] - sqrt_1mab * z_theta) / sqrt_ab) + sqrt_1mab_prev * z_theta;
    }
}

void kernel(std::span<const double> x, int i, const Schedule& s, const ScoreOracle& oracle,
            std::span<const double> noise, std::span<double> score, std::span<double> out)
{
    switch (s.kind()) {
    case SamplerKind::DDPM: ddpm_kernel(x, i, s, oracle, noise, score, out); return;
    case SamplerKind::SMLD: smld_kernel(x, i, s, oracle, noise, score, out); return;
    case SamplerKind::DDIM: ddim_kernel(x, i, s, oracle, score, out); return;
    }
}

void require_certified(const ConsistencyOp& op)
{
    const auto cert = op.sigma_max_certificate();
    if (!cert)
        throw ValidationError("consistency operator " + op.describe() +
                              " has no non-expansiveness certificate; run certify_nonexpansive first");
    if (*cert > 1.0 + NonexpansiveCertificate::tolerance)
        throw ValidationError("consistency operator " + op.describe() + " is expansive");
}

} // namespace

std::vector<double> forward_diffuse(std::span<const double> x0, int n_prime, const Schedule& schedule,
                                    RngStream& rng)
{
    std::vector<double> z(x0.size()), out(x0.size());
    rng.fill_normal(z);
    forward_diffuse(x0, n_prime, schedule, z, out);
    return out;
}

void forward_diffuse(std::span<const double> x0, int n_prime, const Schedule& schedule,
                     std::span<const double> noise, std::span<double> out)
{
    const auto [a, b] = schedule.forward_coeffs(n_prime);
    if (!noise.empty() && noise.size() != x0.size())
        throw ValidationError("noise vector has the wrong size");
    if (out.size() != x0.size())
        throw ValidationError("output buffer has the wrong size");
    for (std::size_t k = 0; k < x0.size(); ++k)
        out[k] = a * x0[k] + (noise.empty() ? 0.0 : b * noise[k]);
}

std::vector<double> reverse_step_ddpm(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle, RngStream& rng)
{
    std::vector<double> z(x.size()), out(x.size());
    rng.fill_normal(z);
    reverse_step_ddpm(x, i, schedule, oracle, z, out);
    return out;
}

void reverse_step_ddpm(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                       std::span<const double> noise, std::span<double> out)
{
    require_kind(schedule, true, "DDPM step");
    check_step(x, i, schedule, oracle, noise, out.size());
    std::vector<double> score(x.size());
    ddpm_kernel(x, i, schedule, oracle, noise, score, out);
}

std::vector<double> reverse_step_smld(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle, RngStream& rng)
{
    std::vector<double> z(x.size()), out(x.size());
    rng.fill_normal(z);
    reverse_step_smld(x, i, schedule, oracle, z, out);
    return out;
}

void reverse_step_smld(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                       std::span<const double> noise, std::span<double> out)
{
    require_kind(schedule, false, "SMLD step");
    check_step(x, i, schedule, oracle, noise, out.size());
    std::vector<double> score(x.size());
    smld_kernel(x, i, schedule, oracle, noise, score, out);
}

std::vector<double> reverse_step_ddim(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle)
{
    require_kind(schedule, true, "DDIM step");
    std::vector<double> out(x.size()), score(x.size());
    check_step(x, i, schedule, oracle, {}, out.size());
    ddim_kernel(x, i, schedule, oracle, score, out);
    return out;
}

std::vector<double> reverse_step_ddim_reparameterized(std::span<const double> x, int i, const Schedule& schedule,
                                                      const ScoreOracle& oracle)
{
    require_kind(schedule, true, "DDIM step");
    std::vector<double> out(x.size()), score(x.size());
    check_step(x, i, schedule, oracle, {}, out.size());
    oracle.evaluate(x, i, schedule, score);
    const double sqrt_ab = std::sqrt(schedule.alpha_bar(i));
    const double sqrt_ab_prev = std::sqrt(schedule.alpha_bar(i - 1));
    const double sqrt_1mab = std::sqrt(schedule.one_minus_alpha_bar(i));
    const double dsigma = schedule.ddim_sigma(i - 1) - schedule.ddim_sigma(i);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double z_theta = -score[k] * sqrt_1mab;
        const double xbar = x[k] / sqrt_ab;
        out[k] = sqrt_ab_prev * (xbar + dsigma * z_theta);
    }
    return out;
}

void reverse_step(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                  std::span<const double> noise, std::span<double> out)
{
    switch (schedule.kind()) {
    case SamplerKind::DDPM: reverse_step_ddpm(x, i, schedule, oracle, noise, out); return;
    case SamplerKind::SMLD: reverse_step_smld(x, i, schedule, oracle, noise, out); return;
    case SamplerKind::DDIM: {
        auto r = reverse_step_ddim(x, i, schedule, oracle);
        std::copy(r.begin(), r.end(), out.begin());
        return;
    }
    }
}

namespace {

// z must already hold the fresh draw.
bool corrector_kernel(std::span<double> x, int i, const Schedule& s, const ScoreOracle& oracle, double r,
                      CorrectorRule rule, std::span<const double> z, std::span<double> score, double& step_size)
{
    oracle.evaluate(x, i, s, score);
    const double score_norm = norm2(score);
    if (score_norm == 0.0 || !std::isfinite(score_norm)) {
        step_size = 0.0;
        return false;
    }
    const double ratio = r * norm2(z) / score_norm;
    step_size = rule == CorrectorRule::Squared ? 2.0 * ratio * ratio : 2.0 * ratio;
    const double noise_scale = std::sqrt(2.0 * step_size);
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] += step_size * score[k] + noise_scale * z[k];
    return true;
}

} // namespace

CorrectorResult langevin_corrector(std::span<const double> x, int i, const Schedule& schedule,
                                   const ScoreOracle& oracle, double r, RngStream& rng, CorrectorRule rule)
{
    require_kind(schedule, false, "Langevin corrector");
    detail::require(std::isfinite(r) && r >= 0.0, "corrector ratio r must be finite and non-negative");
    check_step(x, i, schedule, oracle, {}, x.size());
    CorrectorResult result;
    result.x.assign(x.begin(), x.end());
    std::vector<double> z(x.size()), score(x.size());
    rng.fill_normal(z);
    result.skipped = !corrector_kernel(result.x, i, schedule, oracle, r, rule, z, score, result.step_size);
    return result;
}

SamplerStreams SamplerStreams::from(const RngStream& base)
{
    return {base.derive(1), base.derive(2), base.derive(3)};
}

CcdfTrajectory::CcdfTrajectory(const Schedule& schedule, const ScoreOracle& oracle, const ConsistencyOp& op,
                               const CcdfConfig& config)
    : schedule_(schedule), oracle_(oracle), op_(op), config_(config), n_prime_(config.n_prime(schedule))
{
    const std::size_t n = op.dim();
    if (oracle.dim() != 0 && oracle.dim() != n)
        throw ValidationError("score oracle dimension " + std::to_string(oracle.dim()) +
                              " does not match consistency operator dimension " + std::to_string(n));
    if (schedule.kind() == SamplerKind::DDIM && !schedule.is_variance_preserving())
        throw ValidationError("DDIM sampling needs a variance-preserving schedule");
    detail::require(std::isfinite(config.corrector_r) && config.corrector_r >= 0.0,
                    "corrector ratio r must be finite and non-negative");
    require_certified(op);
    x_.resize(n);
    work_.resize(n);
    noise_.resize(n);
    score_.resize(n);
    anchor_.resize(n);
}

void CcdfTrajectory::start(std::span<const double> x0, RngStream& forward)
{
    if (x0.size() != x_.size())
        throw ValidationError("initial estimate has " + std::to_string(x0.size()) + " values, operator expects " +
                              std::to_string(x_.size()));
    forward.fill_normal(noise_);
    forward_diffuse(x0, n_prime_, schedule_, noise_, x_);
    index_ = n_prime_;
}

void CcdfTrajectory::start_at(std::span<const double> x_start)
{
    if (x_start.size() != x_.size())
        throw ValidationError("start state has the wrong size");
    std::copy(x_start.begin(), x_start.end(), x_.begin());
    index_ = n_prime_;
}

void CcdfTrajectory::apply_consistency(int i, RngStream& anchors)
{
    op_.anchor(i, anchors, anchor_);
    op_.apply_linear(x_, work_);
    for (std::size_t k = 0; k < x_.size(); ++k)
        x_[k] = work_[k] + anchor_[k];
    ++consistency_applications_;
}

void CcdfTrajectory::step(RngStream& reverse, RngStream& anchors)
{
    if (index_ < 0)
        throw ValidationError("trajectory has not been started");
    if (index_ == 0)
        throw ValidationError("trajectory already reached i = 0");
    if (!std::all_of(x_.begin(), x_.end(), [](double v) { return std::isfinite(v); }))
        throw NumericError("trajectory state became non-finite at step " + std::to_string(index_));

    const int i = index_;
    const bool consistency = config_.consistency_every_step || i == 1;
    if (schedule_.kind() != SamplerKind::DDIM)
        reverse.fill_normal(noise_);
    kernel(x_, i, schedule_, oracle_, noise_, score_, work_);
    std::swap(x_, work_);
    ++reverse_steps_;
    if (consistency)
        apply_consistency(i, anchors);

    if (schedule_.kind() == SamplerKind::SMLD && config_.use_corrector) {
        reverse.fill_normal(noise_);
        double step_size = 0.0;
        if (corrector_kernel(x_, i, schedule_, oracle_, config_.corrector_r, config_.corrector_rule, noise_, score_, step_size))
            ++corrector_steps_;
        else
            ++corrector_skips_;
        if (consistency)
            apply_consistency(i, anchors);
    }
    index_ = i - 1;
}

void CcdfTrajectory::run(RngStream& reverse, RngStream& anchors)
{
    while (!finished())
        step(reverse, anchors);
}

CcdfResult ccdf_sample(std::span<const double> x0_init, const ConsistencyOp& op, const CcdfConfig& config,
                       const Schedule& schedule, const ScoreOracle& oracle, SamplerStreams& streams)
{
    CcdfTrajectory trajectory(schedule, oracle, op, config);
    trajectory.start(x0_init, streams.forward);
    trajectory.run(streams.reverse, streams.anchors);
    CcdfResult result;
    result.x.assign(trajectory.state().begin(), trajectory.state().end());
    result.n_prime = trajectory.n_prime();
    result.reverse_steps = trajectory.reverse_steps();
    result.corrector_steps = trajectory.corrector_steps();
    result.corrector_skips = trajectory.corrector_skips();
    result.consistency_applications = trajectory.consistency_applications();
    return result;
}

CcdfResult ccdf_sample(std::span<const double> x0_init, const ConsistencyOp& op, const CcdfConfig& config,
                       const Schedule& schedule, const ScoreOracle& oracle, RngStream& rng)
{
    auto streams = SamplerStreams::from(rng);
    return ccdf_sample(x0_init, op, config, schedule, oracle, streams);
}

} // namespace ccdf
