#pragma once

#include "ccdf/consistency.hpp"
#include "ccdf/rng.hpp"
#include "ccdf/schedule.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccdf {

// Quantities here refer to the coordinates in which each reverse map is
// affine with the exact conditional score: x for DDPM and SMLD, the
// rescaled xbar = x / sqrt(abar) for DDIM (identical to x at i = 0).

/// Per-step contraction factor lambda_i of `kind` on `schedule`, 1 <= i <= N.
double step_contraction(const Schedule& schedule, SamplerKind kind, int i);

/// g(., i)^2: DDPM var_i, SMLD sigma_i^2 - sigma_{i-1}^2, DDIM 0.
double step_noise_variance(const Schedule& schedule, SamplerKind kind, int i);

struct ContractionRates {
    double lambda = 0.0;               ///< max over i in [1, n_prime]
    std::vector<double> per_step;      ///< per_step[i - 1] = lambda_i
};

ContractionRates contraction_rate(const Schedule& schedule, SamplerKind kind, int n_prime);

/// C = n max_{i <= n_prime} g(., i)^2.
double noise_constant(const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n);

/// Expected squared distance of two forward-diffused states at n_prime with
/// independent noise: a^2 eps0 + 2 b^2 n (DDIM: eps0 + 2 sigma^2 n).
double forward_error(double eps0, const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n);

struct ErrorBound {
    double simple = 0.0;
    double recursive = 0.0;
    /// trace[k] bounds the error at step i = n_prime - k (so trace.front()
    /// is the forward error and trace.back() equals `recursive`).
    std::vector<double> trace;
};

/// Both bounds from explicit inputs. lambda_per_step and c_per_step are
/// indexed by i - 1 and must have the same length n_prime.
ErrorBound error_bound(double lambda, const std::vector<double>& lambda_per_step, double c,
                       const std::vector<double>& c_per_step, double tau, double eps_bar);

struct ContractionReport {
    SamplerKind kind = SamplerKind::DDPM;
    int n_prime = 0;
    std::size_t n = 0;
    double eps0 = 0.0;
    double lambda = 0.0;
    std::vector<double> lambda_per_step;
    double C = 0.0;
    std::vector<double> C_per_step;
    double tau = 1.0;
    double forward_error = 0.0;
    double bound_simple = 0.0;
    double bound_recursive = 0.0;
    std::vector<double> bound_trace;

    /// Alternative readings of C printed elsewhere for the same sampler.
    struct Candidate {
        std::string name;
        double value;
    };
    std::vector<Candidate> C_candidates;
};

ContractionReport contraction_report(const Schedule& schedule, SamplerKind kind, int n_prime, std::size_t n,
                                     double eps0, double tau);

/// Plain-text summary followed by a per-step CSV block.
void write_report(std::ostream& out, const ContractionReport& report);
/// CSV with one row per step i = n_prime..0.
void write_report_csv(std::ostream& out, const ContractionReport& report);

struct ShortcutCondition {
    std::string name;
    std::string expression;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
};

struct ShortcutResult {
    bool feasible = false;
    int n_prime = 0;                          ///< 0 when infeasible
    std::vector<ShortcutCondition> conditions;  ///< evaluated at n_prime (or the last scanned index)
    std::string violated;                     ///< name of the blocking condition when infeasible
};

/// Smallest N' meeting the sufficient conditions for eps_{0,r} <= mu eps0,
/// found by scanning N' = 1..N.
ShortcutResult minimal_shortcut(double eps0, double mu, const Schedule& schedule, SamplerKind kind, double tau,
                                std::size_t n);

/// Re-evaluates the per-N' conditions of minimal_shortcut at a given N'.
std::vector<ShortcutCondition> shortcut_conditions(double eps0, double mu, const Schedule& schedule,
                                                   SamplerKind kind, double tau, std::size_t n, int n_prime);

void write_shortcut(std::ostream& out, const ShortcutResult& result);

struct TauValue {
    double value = 0.0;
    double std_error = 0.0;  ///< 0 for closed forms
    bool exact = false;
    int probes = 0;
};

/// Closed form when the operator has one, otherwise a Hutchinson estimate.
TauValue tau_of(const ConsistencyOp& op, int probes = 256, std::uint64_t seed = 0);

} // namespace ccdf
