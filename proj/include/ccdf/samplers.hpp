#pragma once

#include "ccdf/consistency.hpp"
#include "ccdf/rng.hpp"
#include "ccdf/schedule.hpp"
#include "ccdf/score.hpp"

#include <span>
#include <vector>

namespace ccdf {

// Single steps. Overloads taking `noise` use that vector as the Gaussian
// draw (an empty span means z = 0), which is how coupled experiments share
// or zero the reverse noise. All of them validate their inputs.

std::vector<double> forward_diffuse(std::span<const double> x0, int n_prime, const Schedule& schedule,
                                    RngStream& rng);
void forward_diffuse(std::span<const double> x0, int n_prime, const Schedule& schedule,
                     std::span<const double> noise, std::span<double> out);

/// x_{i-1} = (x + (1 - alpha_i) s(x, i)) / sqrt(alpha_i) + sqrt(var_i) z
std::vector<double> reverse_step_ddpm(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle, RngStream& rng);
void reverse_step_ddpm(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                       std::span<const double> noise, std::span<double> out);

/// x_{i-1} = x + (sigma_i^2 - sigma_{i-1}^2) s(x, i) + sqrt(sigma_i^2 - sigma_{i-1}^2) z
std::vector<double> reverse_step_smld(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle, RngStream& rng);
void reverse_step_smld(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                       std::span<const double> noise, std::span<double> out);

/// Deterministic DDIM update written in the original x coordinates.
std::vector<double> reverse_step_ddim(std::span<const double> x, int i, const Schedule& schedule,
                                      const ScoreOracle& oracle);
/// The same update through xbar = x / sqrt(abar):
/// xbar_{i-1} = xbar_i + (sigma_{i-1} - sigma_i) z_theta.
std::vector<double> reverse_step_ddim_reparameterized(std::span<const double> x, int i, const Schedule& schedule,
                                                      const ScoreOracle& oracle);

/// Dispatches on schedule.kind(). DDIM ignores `noise`.
void reverse_step(std::span<const double> x, int i, const Schedule& schedule, const ScoreOracle& oracle,
                  std::span<const double> noise, std::span<double> out);

struct CorrectorResult {
    std::vector<double> x;
    double step_size = 0.0;  ///< epsilon_i
    bool skipped = false;    ///< score norm was zero; x returned unchanged
};

enum class CorrectorRule {
    Linear,   ///< eps = 2 r ||z|| / ||s||
    Squared,  ///< eps = 2 (r ||z|| / ||s||)^2, the signal-to-noise form
};

/// One Langevin step x + eps s + sqrt(2 eps) z with eps = 2 r ||z|| / ||s(x, i)||
/// (or the squared rule) for a fresh z. Variance-exploding schedules only.
CorrectorResult langevin_corrector(std::span<const double> x, int i, const Schedule& schedule,
                                   const ScoreOracle& oracle, double r, RngStream& rng,
                                   CorrectorRule rule = CorrectorRule::Linear);

struct CcdfConfig {
    double t0 = 1.0;                     ///< reverse diffusion starts at N' = round(t0 N)
    double corrector_r = 0.16;           ///< Langevin step ratio (VE only)
    bool use_corrector = true;           ///< predictor-corrector on VE schedules
    CorrectorRule corrector_rule = CorrectorRule::Linear;
    bool consistency_every_step = true;  ///< false: consistency only after the last step

    int n_prime(const Schedule& schedule) const { return schedule.index_for_time(t0); }
};

/// Independent roles of randomness in one CCDF run.
struct SamplerStreams {
    RngStream forward;  ///< the single forward-diffusion draw
    RngStream reverse;  ///< predictor and corrector noise
    RngStream anchors;  ///< forward-diffused measurements inside b_i

    /// Derives the three roles from one stream.
    static SamplerStreams from(const RngStream& base);
};

/// Step-by-step CCDF run: forward diffusion to N', then for i = N'..1 the
/// kind-specific reverse step followed by data consistency, or predictor,
/// consistency, corrector, consistency on VE schedules.
class CcdfTrajectory {
public:
    CcdfTrajectory(const Schedule& schedule, const ScoreOracle& oracle, const ConsistencyOp& op,
                   const CcdfConfig& config);

    /// x_{N'} = a_{N'} x0 + b_{N'} z
    void start(std::span<const double> x0, RngStream& forward);
    /// Starts from a given x_{N'}.
    void start_at(std::span<const double> x_start);
    /// Advances i -> i - 1.
    void step(RngStream& reverse, RngStream& anchors);
    void run(RngStream& reverse, RngStream& anchors);

    int n_prime() const noexcept { return n_prime_; }
    int index() const noexcept { return index_; }
    bool finished() const noexcept { return index_ == 0; }
    std::span<const double> state() const noexcept { return x_; }

    int reverse_steps() const noexcept { return reverse_steps_; }
    int corrector_steps() const noexcept { return corrector_steps_; }
    int corrector_skips() const noexcept { return corrector_skips_; }
    int consistency_applications() const noexcept { return consistency_applications_; }

private:
    void apply_consistency(int i, RngStream& anchors);

    const Schedule& schedule_;
    const ScoreOracle& oracle_;
    const ConsistencyOp& op_;
    CcdfConfig config_;
    int n_prime_;
    int index_ = -1;
    std::vector<double> x_, work_, noise_, score_, anchor_;
    int reverse_steps_ = 0;
    int corrector_steps_ = 0;
    int corrector_skips_ = 0;
    int consistency_applications_ = 0;
};

struct CcdfResult {
    std::vector<double> x;
    int n_prime = 0;
    int reverse_steps = 0;
    int corrector_steps = 0;
    int corrector_skips = 0;
    int consistency_applications = 0;
};

CcdfResult ccdf_sample(std::span<const double> x0_init, const ConsistencyOp& op, const CcdfConfig& config,
                       const Schedule& schedule, const ScoreOracle& oracle, RngStream& rng);
CcdfResult ccdf_sample(std::span<const double> x0_init, const ConsistencyOp& op, const CcdfConfig& config,
                       const Schedule& schedule, const ScoreOracle& oracle, SamplerStreams& streams);

} // namespace ccdf
