#pragma once

#include "ccdf/analysis.hpp"
#include "ccdf/consistency.hpp"
#include "ccdf/image.hpp"
#include "ccdf/samplers.hpp"
#include "ccdf/schedule.hpp"
#include "ccdf/score.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ccdf {

class KeyValueConfig;

struct Phantom {
    std::string kind;  ///< "ellipses" or "blocks"
    ImageShape shape;
    std::uint64_t seed = 0;
    std::vector<double> data;  ///< values in [0, 1]
};

/// Ellipse overlap (a Shepp-Logan-like head with seeded jitter of centers,
/// axes and angles) or a piecewise-constant pattern of `block` x `block`
/// tiles with seeded gray levels.
Phantom make_phantom(const std::string& kind, ImageShape shape, std::uint64_t seed, std::size_t block = 8);

/// Random is standard Gaussian noise, the usual start of reverse diffusion.
enum class InitMode { Random, Vanilla, Refined, File };
std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

enum class OracleKind { Conditional, Gaussian };
std::string_view to_string(OracleKind kind);
OracleKind parse_oracle_kind(std::string_view text);

struct ScheduleSpec {
    double beta_min = 1e-4, beta_max = 0.02;    ///< VP
    double sigma_min = 0.01, sigma_max = 378.0;  ///< VE
    int n_steps = 1000;
    ReverseVariance variance = ReverseVariance::Beta;

    /// VP for DDPM/DDIM, VE for SMLD, tagged with `kind`.
    Schedule build(SamplerKind kind) const;
};

struct OperatorSpec {
    std::string type = "identity";  ///< identity | sr | inpaint | mri
    std::size_t factor = 4;         ///< sr
    double keep_fraction = 0.5;     ///< inpaint: random pixel mask
    std::size_t box = 0;            ///< inpaint: centered box hole instead of a random mask
    double accel = 4.0;             ///< mri
    double acs_fraction = 0.08;     ///< mri
    std::uint64_t mask_seed = 1;
    std::string mask_file;          ///< inpaint/mri: load the mask instead
};

/// Builds the operator for ground truth `truth`; the measurement is
/// simulated from it.
std::unique_ptr<ConsistencyOp> make_operator(const OperatorSpec& spec, ImageShape shape,
                                             std::span<const double> truth, const Schedule& schedule);

/// The operator's own degraded estimate: P x for sr, the masked image for
/// inpaint, the zero-filled image for mri, x plus N(0, 0.1^2) noise for
/// identity.
std::vector<double> vanilla_estimate(const OperatorSpec& spec, const ConsistencyOp& op,
                                     std::span<const double> truth, std::uint64_t seed);

struct OracleSpec {
    OracleKind kind = OracleKind::Conditional;
    /// Gaussian: per-pixel prior from `prior_samples` phantoms of the same
    /// kind (seeds disjoint from the experiment seed) when the truth is a
    /// phantom; otherwise mean and variance of the truth itself.
    int prior_samples = 32;
    double variance_floor = 1e-2;
};

struct ExperimentConfig {
    SamplerKind kind = SamplerKind::DDPM;
    ScheduleSpec schedule;
    std::vector<double> t0_grid{0.2};
    int trials = 10000;
    ImageShape shape{1, 64};
    std::string truth = "random";   ///< random | ellipses | blocks | file:<path>
    OperatorSpec op;
    OracleSpec oracle;
    InitMode init = InitMode::Vanilla;
    std::string init_path;
    double refine_fraction = 0.3;   ///< refined init = truth + f (vanilla - truth)
    std::uint64_t seed = 0;
    bool shared_reverse_noise = false;
    bool use_corrector = false;
    CorrectorRule corrector_rule = CorrectorRule::Linear;
    double corrector_r = 0.16;
    bool consistency_every_step = true;
    int threads = 0;                ///< 0: hardware concurrency

    /// Checks ranges, file existence and a non-empty grid.
    void validate() const;
    /// Reads keys from a key=value file (unknown keys are rejected).
    static ExperimentConfig from_config(const KeyValueConfig& kv);
};

/// Per-step statistics of the coupled-pair squared error, from i = N' down
/// to 0. DDIM rows are measured in xbar = x / sqrt(alpha_bar) coordinates.
struct TrajectoryStats {
    SamplerKind kind = SamplerKind::DDPM;
    double t0 = 0.0;
    int n_prime = 0;
    int trials = 0;
    double eps0 = 0.0;
    double tau = 0.0;
    std::vector<int> index;
    std::vector<double> mean;
    std::vector<double> std_error;
    std::vector<double> bound;        ///< recursive bound at the same step
    double bound_simple = 0.0;
    double initial_error = 0.0;       ///< eps0 reached before diffusion, for plotting

    double final_mean() const { return mean.back(); }
    double final_se() const { return std_error.back(); }
};

/// One experiment world: truth, operator, oracle and initial estimate.
struct ExperimentSetup {
    Schedule schedule;
    ImageShape shape;
    std::vector<double> truth;
    std::vector<double> init;
    std::unique_ptr<ConsistencyOp> op;
    std::unique_ptr<ScoreOracle> oracle;
    double tau = 1.0;
    double eps0 = 0.0;
};

ExperimentSetup make_setup(const ExperimentConfig& cfg);

/// Coupled pairs: the reference trajectory starts from the truth, the other
/// from the configured init. Forward and reverse noise are independent per
/// trajectory (shared reverse noise when requested); consistency anchors are
/// shared.
TrajectoryStats run_error_curve(const ExperimentConfig& cfg, double t0);
TrajectoryStats run_error_curve(const ExperimentConfig& cfg, const ExperimentSetup& setup, double t0);

struct SweepRow {
    double t0;
    int n_prime;
    double final_mean;
    double final_se;
    double bound_recursive;
    double bound_simple;
};

struct SweepResult {
    double eps0 = 0.0;
    std::vector<SweepRow> rows;
    double argmin_t0 = 0.0;
    bool beats_full_path = false;  ///< some t0 < 1 has a lower final error than t0 = 1
    std::vector<TrajectoryStats> curves;
};

SweepResult run_t0_sweep(const ExperimentConfig& cfg);

void write_curve_csv(std::ostream& out, const TrajectoryStats& stats);
void write_curves_csv(std::ostream& out, const std::vector<TrajectoryStats>& curves,
                      const std::vector<std::string>& labels);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
/// gnuplot script plotting a curves CSV written by write_curves_csv.
void write_gnuplot_script(std::ostream& out, const std::string& csv_path, const std::vector<std::string>& labels);

struct MriDemoConfig {
    double accel = 4.0;
    double acs_fraction = 0.08;
    std::uint64_t mask_seed = 1;
    double t0 = 0.02;
    ScheduleSpec schedule;
    OracleKind oracle = OracleKind::Gaussian;
    int prior_samples = 32;
    double variance_floor = 1e-2;
    bool use_corrector = true;
    CorrectorRule corrector_rule = CorrectorRule::Squared;
    double corrector_r = 0.16;
    int trials = 1;
    std::uint64_t seed = 0;
};

struct MriDemoResult {
    std::vector<double> reconstruction;  ///< first trial
    std::vector<double> zero_filled;
    SamplingMask mask;
    double psnr = 0.0;               ///< mean over trials
    double zero_filled_psnr = 0.0;
    double max_residual = 0.0;       ///< max over trials of ||D F x - y|| / ||y||
    int n_prime = 0;
    int reverse_steps = 0;
    int corrector_steps = 0;
    int corrector_skips = 0;
    double seconds = 0.0;
};

MriDemoResult run_mri_demo(const Phantom& phantom, const MriDemoConfig& cfg);

/// Peak signal-to-noise ratio for unit peak; +inf when identical.
double psnr(std::span<const double> reference, std::span<const double> estimate);

/// Per-pixel Gaussian prior from phantoms of `kind` with seeds disjoint from `exclude_seed`.
GaussianScoreOracle fit_phantom_prior(const std::string& kind, ImageShape shape, int samples,
                                      double variance_floor, std::uint64_t exclude_seed);

} // namespace ccdf
