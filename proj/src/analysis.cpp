#include "ccdf/analysis.hpp"

#include "ccdf/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace ccdf {

namespace {

void check_kind(const Schedule& schedule, SamplerKind kind)
{
    if (kind == SamplerKind::DDPM && !schedule.is_variance_preserving())
        throw ValidationError("DDPM analysis needs a variance-preserving schedule");
    if (kind == SamplerKind::SMLD && schedule.is_variance_preserving())
        throw ValidationError("SMLD analysis needs a variance-exploding schedule");
}

void check_n_prime(const Schedule& schedule, int n_prime)
{
    if (n_prime < 1 || n_prime > schedule.size())
        throw ValidationError("n_prime " + std::to_string(n_prime) + " outside [1, " +
                              std::to_string(schedule.size()) + "]");
}

double ve_shifted(const Schedule& s, int i)
{
    const double s0 = s.sigma(0);
    const double si = s.sigma(i);
    return (si - s0) * (si + s0);
}

} // namespace

double step_contraction(const Schedule& schedule, SamplerKind kind, int i)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, i);
    switch (kind) {
    case SamplerKind::DDPM:
        return std::sqrt(schedule.alpha(i)) * schedule.one_minus_alpha_bar(i - 1) /
               schedule.one_minus_alpha_bar(i);
    case SamplerKind::SMLD:
        return ve_shifted(schedule, i - 1) / ve_shifted(schedule, i);
    case SamplerKind::DDIM:
        return schedule.ddim_sigma(i - 1) / schedule.ddim_sigma(i);
    }
    return 0.0;
}

double step_noise_variance(const Schedule& schedule, SamplerKind kind, int i)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, i);
    switch (kind) {
    case SamplerKind::DDPM: {
        const double sd = schedule.sigma(i);
        return sd * sd;
    }
    case SamplerKind::SMLD: {
        const double a = schedule.sigma(i), b = schedule.sigma(i - 1);
        return (a - b) * (a + b);
    }
    case SamplerKind::DDIM:
        return 0.0;
    }
    return 0.0;
}

ContractionRates contraction_rate(const Schedule& schedule, SamplerKind kind, int n_prime)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, n_prime);
    ContractionRates r;
    r.per_step.reserve(static_cast<std::size_t>(n_prime));
    for (int i = 1; i <= n_prime; ++i) {
        const double l = step_contraction(schedule, kind, i);
        r.per_step.push_back(l);
        r.lambda = std::max(r.lambda, l);
    }
    return r;
}

double noise_constant(const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, n_prime);
    double g2 = 0.0;
    for (int i = 1; i <= n_prime; ++i)
        g2 = std::max(g2, step_noise_variance(schedule, kind, i));
    return static_cast<double>(n) * g2;
}

double forward_error(double eps0, const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, n_prime);
    detail::require(std::isfinite(eps0) && eps0 >= 0.0, "eps0 must be finite and non-negative");
    const double nn = static_cast<double>(n);
    if (kind == SamplerKind::DDIM) {
        const double s = schedule.ddim_sigma(n_prime);
        return eps0 + 2.0 * s * s * nn;
    }
    const auto [a, b] = schedule.forward_coeffs(n_prime);
    return a * a * eps0 + 2.0 * b * b * nn;
}

ErrorBound error_bound(double lambda, const std::vector<double>& lambda_per_step, double c,
                       const std::vector<double>& c_per_step, double tau, double eps_bar)
{
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and non-negative");
    if (lambda >= 1.0)
        throw ValidationError("contraction bound needs lambda < 1, got " + std::to_string(lambda));
    detail::require(lambda_per_step.size() == c_per_step.size() && !lambda_per_step.empty(),
                    "per-step lambda and C must be non-empty and of equal length");
    detail::require(tau >= 0.0 && std::isfinite(tau), "tau must be finite and non-negative");
    detail::require(c >= 0.0 && eps_bar >= 0.0, "C and eps_bar must be non-negative");
    for (double l : lambda_per_step)
        if (!(l >= 0.0 && l <= lambda))
            throw ValidationError("per-step lambda outside [0, lambda]");

    const auto np = static_cast<int>(lambda_per_step.size());
    ErrorBound out;
    out.simple = 2.0 * c * tau / (1.0 - lambda * lambda) + std::pow(lambda, 2.0 * np) * eps_bar;
    out.trace.reserve(lambda_per_step.size() + 1);
    double e = eps_bar;
    out.trace.push_back(e);
    for (int i = np; i >= 1; --i) {
        const double l = lambda_per_step[static_cast<std::size_t>(i - 1)];
        e = l * l * e + 2.0 * c_per_step[static_cast<std::size_t>(i - 1)] * tau;
        out.trace.push_back(e);
    }
    out.recursive = e;
    return out;
}

ContractionReport contraction_report(const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n,
                                     double eps0, double tau)
{
    ContractionReport r;
    r.kind = kind;
    r.n_prime = n_prime;
    r.n = n;
    r.eps0 = eps0;
    r.tau = tau;
    auto rates = contraction_rate(schedule, kind, n_prime);
    r.lambda = rates.lambda;
    r.lambda_per_step = std::move(rates.per_step);
    const double nn = static_cast<double>(n);
    for (int i = 1; i <= n_prime; ++i)
        r.C_per_step.push_back(nn * step_noise_variance(schedule, kind, i));
    r.C = noise_constant(schedule, kind, n_prime, n);
    r.forward_error = forward_error(eps0, schedule, kind, n_prime, n);
    auto b = error_bound(r.lambda, r.lambda_per_step, r.C, r.C_per_step, tau, r.forward_error);
    r.bound_simple = b.simple;
    r.bound_recursive = b.recursive;
    r.bound_trace = std::move(b.trace);

    const int N = schedule.size();
    if (kind == SamplerKind::DDPM) {
        r.C_candidates.push_back({"n*max_{i<=N'} var_i", r.C});
        r.C_candidates.push_back({"n*(1-alpha_N)", nn * schedule.beta(N)});
        r.C_candidates.push_back({"n*(1-alpha_bar_N)", nn * schedule.one_minus_alpha_bar(N)});
    } else if (kind == SamplerKind::SMLD) {
        r.C_candidates.push_back({"n*max_{i<=N'}(sigma_i^2-sigma_{i-1}^2)", r.C});
        const double smin = schedule.sigma(1), smax = schedule.sigma(N);
        const double q = N > 1 ? std::pow(smin * smin / (smax * smax), 1.0 / (N - 1)) : 0.0;
        const double sn = schedule.sigma(n_prime);
        r.C_candidates.push_back({"n*sigma_{N'}^2*(1-q), q=(smin/smax)^(2/(N-1))", nn * sn * sn * (1.0 - q)});
    }
    return r;
}

void write_report(std::ostream& out, const ContractionReport& r)
{
    const auto old = out.precision(17);
    out << "kind " << to_string(r.kind) << "\n"
        << "n_prime " << r.n_prime << "\n"
        << "n " << r.n << "\n"
        << "eps0 " << r.eps0 << "\n"
        << "lambda " << r.lambda << "\n"
        << "C " << r.C << "\n";
    for (const auto& c : r.C_candidates)
        out << "C_candidate " << c.name << " = " << c.value << "\n";
    out << "tau " << r.tau << "\n"
        << "forward_error " << r.forward_error << "\n"
        << "bound_simple " << r.bound_simple << "\n"
        << "bound_recursive " << r.bound_recursive << "\n";
    if (r.kind == SamplerKind::DDIM)
        out << "coordinates xbar = x / sqrt(alpha_bar)\n";
    out << "monte_carlo_tolerance 4 standard errors, 10000 trials by default\n\n";
    out.precision(old);
    write_report_csv(out, r);
}

void write_report_csv(std::ostream& out, const ContractionReport& r)
{
    const auto old = out.precision(17);
    out << "i,lambda_i,C_i,bound_recursive\n";
    for (int i = r.n_prime; i >= 0; --i) {
        const auto k = static_cast<std::size_t>(r.n_prime - i);
        out << i << ',';
        if (i >= 1)
            out << r.lambda_per_step[static_cast<std::size_t>(i - 1)] << ','
                << r.C_per_step[static_cast<std::size_t>(i - 1)];
        else
            out << ',';
        out << ',' << r.bound_trace[k] << '\n';
    }
    out.precision(old);
}

std::vector<ShortcutCondition> shortcut_conditions(double eps0, double mu, const Schedule& schedule,
                                                   SamplerKind kind, double tau, std::size_t n, int n_prime)
{
    check_kind(schedule, kind);
    check_n_prime(schedule, n_prime);
    const double nn = static_cast<double>(n);
    const int N = schedule.size();
    std::vector<ShortcutCondition> c;
    switch (kind) {
    case SamplerKind::DDPM: {
        const double nb = n_prime * schedule.beta(n_prime);
        const double lo = 2.0 * std::log(4.0 * nn / (mu * eps0));
        const double hi = mu * eps0 / (4.0 * nn * tau);
        c.push_back({"ddpm-normalization", "eps0 <= 2n", eps0, 2.0 * nn, eps0 <= 2.0 * nn});
        c.push_back({"ddpm-lower", "N'*beta_N' >= 2 log(4n/(mu eps0))", nb, lo, nb >= lo});
        c.push_back({"ddpm-upper", "N'*beta_N' <= mu eps0/(4 n tau)", nb, hi, nb <= hi});
        break;
    }
    case SamplerKind::SMLD: {
        const double s2min = schedule.sigma(1) * schedule.sigma(1);
        const double s2max = schedule.sigma(N) * schedule.sigma(N);
        const double span = std::log(s2max / s2min);
        const double frac = N > 1 ? static_cast<double>(n_prime - 1) / (N - 1) : 0.0;
        const double lo = std::log(2.0 / std::sqrt(mu)) / span;
        const double hi = std::log(mu * eps0 / (4.0 * nn * s2min)) / span;
        const double smin_rhs = std::pow(mu, 1.5) * eps0 / (8.0 * nn);
        const double smax_rhs = mu * eps0 / (4.0 * nn);
        c.push_back({"sigmin", "sigma_min^2 < mu^(3/2) eps0/(8n)", s2min, smin_rhs, s2min < smin_rhs});
        c.push_back({"sigmax", "sigma_max^2 > mu eps0/(4n)", s2max, smax_rhs, s2max > smax_rhs});
        c.push_back({"smld-window-lower", "(N'-1)/(N-1) >= log(2/sqrt(mu))/log(smax^2/smin^2)", frac, lo,
                     frac >= lo});
        c.push_back({"smld-window-upper", "(N'-1)/(N-1) <= log(mu eps0/(4n smin^2))/log(smax^2/smin^2)", frac,
                     hi, frac <= hi});
        break;
    }
    case SamplerKind::DDIM: {
        const double s0 = schedule.ddim_sigma(0);
        const double sn = schedule.ddim_sigma(n_prime);
        const double s0_rhs = mu * eps0 / (4.0 * nn);
        const double sn_rhs = eps0 / (2.0 * nn);
        c.push_back({"sigma0", "sigma_0^2 <= mu eps0/(4n)", s0 * s0, s0_rhs, s0 * s0 <= s0_rhs});
        c.push_back({"NDDIM", "sigma_N'^2 >= eps0/(2n)", sn * sn, sn_rhs, sn * sn >= sn_rhs});
        break;
    }
    }
    return c;
}

ShortcutResult minimal_shortcut(double eps0, double mu, const Schedule& schedule, SamplerKind kind, double tau,
                                std::size_t n)
{
    check_kind(schedule, kind);
    detail::require(std::isfinite(eps0) && eps0 > 0.0, "eps0 must be positive");
    detail::require(mu > 0.0 && mu <= 1.0, "mu must lie in (0, 1]");
    detail::require(tau > 0.0 && tau <= 1.0 + 1e-12, "tau must lie in (0, 1]");
    detail::require(n > 0, "dimension must be positive");

    ShortcutResult res;
    const int N = schedule.size();
    // Conditions that do not depend on N' come first in each list; `fixed`
    // counts them.
    const std::size_t fixed = kind == SamplerKind::DDIM ? 1 : kind == SamplerKind::DDPM ? 1 : 2;
    auto first = shortcut_conditions(eps0, mu, schedule, kind, tau, n, 1);
    for (std::size_t k = 0; k < fixed; ++k)
        if (!first[k].satisfied) {
            res.conditions = std::move(first);
            res.violated = res.conditions[k].name;
            return res;
        }

    // The lower-type condition of the window is index `fixed`, the upper-type
    // (if any) follows.
    int first_lower = 0;
    for (int np = 1; np <= N; ++np) {
        auto c = shortcut_conditions(eps0, mu, schedule, kind, tau, n, np);
        if (first_lower == 0 && c[fixed].satisfied)
            first_lower = np;
        const bool ok = std::all_of(c.begin(), c.end(), [](const ShortcutCondition& x) { return x.satisfied; });
        if (ok) {
            res.feasible = true;
            res.n_prime = np;
            res.conditions = std::move(c);
            return res;
        }
    }
    if (first_lower == 0) {
        res.conditions = shortcut_conditions(eps0, mu, schedule, kind, tau, n, N);
        res.violated = res.conditions[fixed].name;
    } else {
        res.conditions = shortcut_conditions(eps0, mu, schedule, kind, tau, n, first_lower);
        res.violated = res.conditions.back().name;
    }
    return res;
}

void write_shortcut(std::ostream& out, const ShortcutResult& r)
{
    const auto old = out.precision(17);
    if (r.feasible)
        out << "n_prime " << r.n_prime << "\n";
    else
        out << "infeasible " << r.violated << "\n";
    out << "condition,expression,lhs,rhs,satisfied\n";
    for (const auto& c : r.conditions)
        out << c.name << ",\"" << c.expression << "\"," << c.lhs << ',' << c.rhs << ','
            << (c.satisfied ? "yes" : "no") << '\n';
    out.precision(old);
}

TauValue tau_of(const ConsistencyOp& op, int probes, std::uint64_t seed)
{
    TauValue t;
    if (auto exact = op.exact_tau()) {
        t.value = *exact;
        t.exact = true;
        return t;
    }
    RngStream rng(seed, 0x7a75);
    const auto est = estimate_tau_hutchinson(op, probes, rng);
    t.value = est.value;
    t.std_error = est.std_error;
    t.probes = est.probes;
    return t;
}

} // namespace ccdf
