#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ccdf {

enum class SamplerKind { DDPM, SMLD, DDIM };

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view text);

/// Reverse-step noise variance for variance-preserving schedules.
enum class ReverseVariance {
    Beta,       ///< var_i = beta_i (fixed endpoint used at inference)
    BetaTilde,  ///< var_i = (1 - abar_{i-1}) / (1 - abar_i) * beta_i
};

/// x_i = a * x_0 + b * z
struct ForwardCoeffs {
    double a;
    double b;
};

/// Discrete noise schedule with every derived coefficient precomputed.
///
/// Arrays are indexed by step i. Index 0 is the clean end of the chain:
/// alpha_bar(0) = 1, and for VE schedules sigma(0) is the geometric series
/// evaluated at i = 0. Schedules are immutable values.
class Schedule {
public:
    /// Linear beta grid over i = 1..N, tagged DDPM.
    static Schedule variance_preserving(double beta_min, double beta_max, int n_steps,
                                        ReverseVariance variance = ReverseVariance::Beta);
    /// Geometric sigma grid sigma_min * (sigma_max / sigma_min)^((i-1)/(N-1)), tagged SMLD.
    static Schedule variance_exploding(double sigma_min, double sigma_max, int n_steps);

    /// Same arrays, different sampler tag. DDPM <-> DDIM on VP schedules only;
    /// DDIM is also allowed on VE schedules for analysis (sigma plays the DDIM sigma).
    Schedule with_kind(SamplerKind kind) const;

    SamplerKind kind() const noexcept { return kind_; }
    bool is_variance_preserving() const noexcept { return vp_; }
    int size() const noexcept { return n_; }
    ReverseVariance reverse_variance() const noexcept { return variance_; }

    double beta(int i) const;                 // 1..N, VP only
    double alpha(int i) const;                // 1..N, VP only
    double alpha_bar(int i) const;            // 0..N, VP only
    double one_minus_alpha_bar(int i) const;  // 0..N, VP only; computed without cancellation
    /// VE: noise std-dev; VP: reverse-step noise std-dev sqrt(var_i) with sigma(0) = 0.
    double sigma(int i) const;                // 0..N
    /// sqrt(1 - abar_i) / sqrt(abar_i) on VP; the VE sigma on VE schedules.
    double ddim_sigma(int i) const;           // 0..N

    /// Noise variance g(., i)^2 injected by one reverse step of `kind()`.
    double reverse_noise_variance(int i) const;  // 1..N

    /// (a_i, b_i) of the single-step forward kernel; requires 1 <= i <= N.
    ForwardCoeffs forward_coeffs(int i) const;
    /// Same as forward_coeffs but also accepts i = 0, which is (1, 0).
    ForwardCoeffs forward_coeffs_or_identity(int i) const;

    /// N' = round(t0 * N) clamped to [1, N].
    int index_for_time(double t0) const;

    /// CSV with header `i,beta,alpha,alpha_bar,sigma,ddim_sigma`; rows i = 0..N.
    /// Columns that do not apply to the schedule family are left empty.
    void write_csv(std::ostream& out) const;

    bool operator==(const Schedule& other) const = default;

private:
    Schedule() = default;
    void check_index(int i, int lo, const char* what) const;
    void require_vp(const char* what) const;

    SamplerKind kind_ = SamplerKind::DDPM;
    bool vp_ = true;
    int n_ = 0;
    ReverseVariance variance_ = ReverseVariance::Beta;
    std::vector<double> beta_;          // [0..N], beta_[0] = 0
    std::vector<double> alpha_;         // [0..N], alpha_[0] = 1
    std::vector<double> alpha_bar_;     // [0..N]
    std::vector<double> one_minus_ab_;  // [0..N]
    std::vector<double> sigma_;         // [0..N]
    std::vector<double> ddim_sigma_;    // [0..N]
};

Schedule make_vp_schedule(double beta_min, double beta_max, int n_steps);
Schedule make_ve_schedule(double sigma_min, double sigma_max, int n_steps);
ForwardCoeffs forward_coeffs(const Schedule& schedule, int i);

} // namespace ccdf
