#include "ccdf/schedule.hpp"

#include "ccdf/error.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace ccdf {

std::string_view to_string(SamplerKind kind)
{
    switch (kind) {
    case SamplerKind::DDPM: return "ddpm";
    case SamplerKind::SMLD: return "smld";
    case SamplerKind::DDIM: return "ddim";
    }
    return "?";
}

SamplerKind parse_sampler_kind(std::string_view text)
{
    if (text == "ddpm" || text == "DDPM" || text == "vp")
        return SamplerKind::DDPM;
    if (text == "smld" || text == "SMLD" || text == "ve")
        return SamplerKind::SMLD;
    if (text == "ddim" || text == "DDIM")
        return SamplerKind::DDIM;
    throw ValidationError("unknown sampler kind '" + std::string(text) + "' (expected ddpm|smld|ddim)");
}

Schedule Schedule::variance_preserving(double beta_min, double beta_max, int n_steps,
                                       ReverseVariance variance)
{
    detail::require(std::isfinite(beta_min) && std::isfinite(beta_max), "beta bounds must be finite");
    detail::require(beta_min > 0.0, "beta_min must be positive");
    detail::require(beta_max < 1.0, "beta_max must be below 1");
    detail::require(beta_min < beta_max, "beta_min must be below beta_max");
    detail::require(n_steps >= 2, "a schedule needs at least 2 steps");

    Schedule s;
    s.kind_ = SamplerKind::DDPM;
    s.vp_ = true;
    s.n_ = n_steps;
    s.variance_ = variance;
    const auto size = static_cast<std::size_t>(n_steps) + 1;
    s.beta_.assign(size, 0.0);
    s.alpha_.assign(size, 1.0);
    s.alpha_bar_.assign(size, 1.0);
    s.one_minus_ab_.assign(size, 0.0);
    s.sigma_.assign(size, 0.0);
    s.ddim_sigma_.assign(size, 0.0);

    double log_ab = 0.0;
    for (int i = 1; i <= n_steps; ++i) {
        const double t = static_cast<double>(i - 1) / static_cast<double>(n_steps - 1);
        const double b = (1.0 - t) * beta_min + t * beta_max;
        s.beta_[i] = b;
        s.alpha_[i] = 1.0 - b;
        log_ab += std::log1p(-b);
        s.alpha_bar_[i] = std::exp(log_ab);
        s.one_minus_ab_[i] = -std::expm1(log_ab);
        s.ddim_sigma_[i] = std::sqrt(s.one_minus_ab_[i]) / std::sqrt(s.alpha_bar_[i]);
    }
    for (int i = 1; i <= n_steps; ++i) {
        double var = s.beta_[i];
        if (variance == ReverseVariance::BetaTilde)
            var = s.one_minus_ab_[i - 1] / s.one_minus_ab_[i] * s.beta_[i];
        s.sigma_[i] = std::sqrt(var);
    }
    for (int i = 1; i <= n_steps; ++i) {
        if (i > 1 && !(s.beta_[i] > s.beta_[i - 1]))
            throw ValidationError("beta grid is not strictly increasing");
        if (!(s.alpha_bar_[i] < s.alpha_bar_[i - 1]) || !(s.ddim_sigma_[i] > s.ddim_sigma_[i - 1]))
            throw ValidationError("alpha_bar grid is not strictly decreasing");
    }
    return s;
}

Schedule Schedule::variance_exploding(double sigma_min, double sigma_max, int n_steps)
{
    detail::require(std::isfinite(sigma_min) && std::isfinite(sigma_max), "sigma bounds must be finite");
    detail::require(sigma_min > 0.0, "sigma_min must be positive");
    detail::require(sigma_min < sigma_max, "sigma_min must be below sigma_max");
    detail::require(n_steps >= 2, "a schedule needs at least 2 steps");

    Schedule s;
    s.kind_ = SamplerKind::SMLD;
    s.vp_ = false;
    s.n_ = n_steps;
    const auto size = static_cast<std::size_t>(n_steps) + 1;
    s.sigma_.assign(size, 0.0);
    const double log_ratio = std::log(sigma_max / sigma_min);
    for (int i = 0; i <= n_steps; ++i) {
        const double t = static_cast<double>(i - 1) / static_cast<double>(n_steps - 1);
        s.sigma_[i] = sigma_min * std::exp(t * log_ratio);
    }
    s.sigma_[1] = sigma_min;
    s.sigma_[n_steps] = sigma_max;
    for (int i = 1; i <= n_steps; ++i)
        if (!(s.sigma_[i] > s.sigma_[i - 1]))
            throw ValidationError("sigma grid is not strictly increasing (bounds too close for N)");
    s.ddim_sigma_ = s.sigma_;
    return s;
}

Schedule Schedule::with_kind(SamplerKind kind) const
{
    if (kind == SamplerKind::SMLD && vp_)
        throw ValidationError("SMLD sampling needs a variance-exploding schedule");
    if (kind == SamplerKind::DDPM && !vp_)
        throw ValidationError("DDPM sampling needs a variance-preserving schedule");
    Schedule copy = *this;
    copy.kind_ = kind;
    return copy;
}

void Schedule::check_index(int i, int lo, const char* what) const
{
    if (i < lo || i > n_) {
        std::ostringstream msg;
        msg << what << ": step index " << i << " outside [" << lo << ", " << n_ << "]";
        throw ValidationError(msg.str());
    }
}

void Schedule::require_vp(const char* what) const
{
    if (!vp_)
        throw ValidationError(std::string(what) + " is only defined for variance-preserving schedules");
}

double Schedule::beta(int i) const
{
    require_vp("beta");
    check_index(i, 1, "beta");
    return beta_[i];
}

double Schedule::alpha(int i) const
{
    require_vp("alpha");
    check_index(i, 1, "alpha");
    return alpha_[i];
}

double Schedule::alpha_bar(int i) const
{
    require_vp("alpha_bar");
    check_index(i, 0, "alpha_bar");
    return alpha_bar_[i];
}

double Schedule::one_minus_alpha_bar(int i) const
{
    require_vp("alpha_bar");
    check_index(i, 0, "alpha_bar");
    return one_minus_ab_[i];
}

double Schedule::sigma(int i) const
{
    check_index(i, 0, "sigma");
    return sigma_[i];
}

double Schedule::ddim_sigma(int i) const
{
    check_index(i, 0, "ddim_sigma");
    return ddim_sigma_[i];
}

double Schedule::reverse_noise_variance(int i) const
{
    check_index(i, 1, "reverse_noise_variance");
    switch (kind_) {
    case SamplerKind::DDPM: return sigma_[i] * sigma_[i];
    case SamplerKind::SMLD: return sigma_[i] * sigma_[i] - sigma_[i - 1] * sigma_[i - 1];
    case SamplerKind::DDIM: return 0.0;
    }
    return 0.0;
}

ForwardCoeffs Schedule::forward_coeffs(int i) const
{
    check_index(i, 1, "forward_coeffs");
    return forward_coeffs_or_identity(i);
}

ForwardCoeffs Schedule::forward_coeffs_or_identity(int i) const
{
    check_index(i, 0, "forward_coeffs");
    if (i == 0)
        return {1.0, 0.0};
    if (vp_)
        return {std::sqrt(alpha_bar_[i]), std::sqrt(one_minus_ab_[i])};
    const double s0 = sigma_[0];
    const double si = sigma_[i];
    return {1.0, std::sqrt((si - s0) * (si + s0))};
}

int Schedule::index_for_time(double t0) const
{
    if (!(t0 > 0.0) || !(t0 <= 1.0))
        throw ValidationError("t0 must lie in (0, 1]");
    const auto idx = static_cast<long>(std::lround(t0 * n_));
    if (idx < 1)
        return 1;
    if (idx > n_)
        return n_;
    return static_cast<int>(idx);
}

void Schedule::write_csv(std::ostream& out) const
{
    const auto old_precision = out.precision(17);
    out << "i,beta,alpha,alpha_bar,sigma,ddim_sigma\n";
    for (int i = 0; i <= n_; ++i) {
        out << i << ',';
        if (vp_ && i > 0)
            out << beta_[i] << ',' << alpha_[i];
        else
            out << ',';
        out << ',';
        if (vp_)
            out << alpha_bar_[i];
        out << ',' << sigma_[i] << ',';
        if (vp_)
            out << ddim_sigma_[i];
        out << '\n';
    }
    out.precision(old_precision);
}

Schedule make_vp_schedule(double beta_min, double beta_max, int n_steps)
{
    return Schedule::variance_preserving(beta_min, beta_max, n_steps);
}

Schedule make_ve_schedule(double sigma_min, double sigma_max, int n_steps)
{
    return Schedule::variance_exploding(sigma_min, sigma_max, n_steps);
}

ForwardCoeffs forward_coeffs(const Schedule& schedule, int i)
{
    return schedule.forward_coeffs(i);
}

} // namespace ccdf
