#pragma once

#include "ccdf/fft.hpp"
#include "ccdf/image.hpp"
#include "ccdf/rng.hpp"
#include "ccdf/schedule.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccdf {

/// Non-expansive affine data-consistency map x = A x' + b_i.
///
/// The linear part A is fixed at construction. The offset b_i may depend on
/// the step index and, for operators that forward-diffuse their measurement,
/// on draws from the caller's stream; it never depends on x'. Operators are
/// immutable and reentrant.
class ConsistencyOp {
public:
    virtual ~ConsistencyOp() = default;

    virtual std::size_t dim() const noexcept = 0;
    virtual std::string describe() const = 0;

    /// out = A x
    virtual void apply_linear(std::span<const double> x, std::span<double> out) const = 0;
    /// out = A^T x. Shipped operators are symmetric.
    virtual void apply_linear_transpose(std::span<const double> x, std::span<double> out) const
    {
        apply_linear(x, out);
    }
    /// out = b_i
    virtual void anchor(int i, RngStream& rng, std::span<double> out) const = 0;

    /// Tr(A^T A) / n when known in closed form.
    virtual std::optional<double> exact_tau() const { return std::nullopt; }
    /// Upper bound on sigma_max(A) when known.
    virtual std::optional<double> sigma_max_certificate() const { return std::nullopt; }

    /// x = A x' + b_i (validates sizes).
    std::vector<double> apply(std::span<const double> x, int i, RngStream& rng) const;
    void apply_into(std::span<const double> x, int i, RngStream& rng, std::span<double> out) const;
};

/// A = I, b = 0.
class IdentityConsistency final : public ConsistencyOp {
public:
    explicit IdentityConsistency(std::size_t n);

    std::size_t dim() const noexcept override { return n_; }
    std::string describe() const override { return "identity"; }
    void apply_linear(std::span<const double> x, std::span<double> out) const override;
    void anchor(int, RngStream&, std::span<double> out) const override;
    std::optional<double> exact_tau() const override { return 1.0; }
    std::optional<double> sigma_max_certificate() const override { return 1.0; }

private:
    std::size_t n_;
};

/// Super-resolution consistency: A = I - P with P the block-mean downsample
/// by D followed by replication upsample (an orthogonal projection), and
/// b_i = P xhat_i with xhat_i = a_i xhat_0 + b_i z the forward-diffused
/// measurement.
class SuperResolutionProjection final : public ConsistencyOp {
public:
    /// `measurement` is either the full-resolution image or the H/D x W/D
    /// low-resolution image (replicated up).
    SuperResolutionProjection(ImageShape shape, std::size_t factor, std::span<const double> measurement,
                              Schedule schedule);

    std::size_t dim() const noexcept override { return shape_.size(); }
    std::string describe() const override;
    std::size_t factor() const noexcept { return factor_; }
    ImageShape shape() const noexcept { return shape_; }

    /// out = P x
    void project(std::span<const double> x, std::span<double> out) const;
    void apply_linear(std::span<const double> x, std::span<double> out) const override;
    void anchor(int i, RngStream& rng, std::span<double> out) const override;
    std::optional<double> exact_tau() const override;
    std::optional<double> sigma_max_certificate() const override;
    /// P xhat_0: the block-mean view of the measurement.
    const std::vector<double>& projected_measurement() const noexcept { return measured_; }

private:
    ImageShape shape_;
    std::size_t factor_;
    Schedule schedule_;
    std::vector<double> measured_;
};

/// Inpainting consistency: A = I - P with P = diag(mask), b_i = P xhat_i.
class InpaintProjection final : public ConsistencyOp {
public:
    InpaintProjection(SamplingMask mask, std::span<const double> measurement, Schedule schedule);

    std::size_t dim() const noexcept override { return mask_.shape.size(); }
    std::string describe() const override;
    const SamplingMask& mask() const noexcept { return mask_; }

    void apply_linear(std::span<const double> x, std::span<double> out) const override;
    void anchor(int i, RngStream& rng, std::span<double> out) const override;
    std::optional<double> exact_tau() const override;
    std::optional<double> sigma_max_certificate() const override;
    /// Measured pixels, zero elsewhere.
    const std::vector<double>& masked_measurement() const noexcept { return measured_; }

private:
    SamplingMask mask_;
    Schedule schedule_;
    std::vector<double> measured_;
};

/// Single-coil compressed-sensing MRI consistency with the unitary DFT:
/// A = I - F^-1 D F, b = F^-1 D y (constant in i). The mask must be
/// conjugate-symmetric so that A maps real images to real images.
class MriProjection final : public ConsistencyOp {
public:
    /// `kspace` holds y in natural FFT order (size H*W); entries off the mask
    /// are ignored.
    MriProjection(SamplingMask mask, std::vector<std::complex<double>> kspace);

    /// Simulates y = D F image.
    static MriProjection from_image(SamplingMask mask, std::span<const double> image);

    std::size_t dim() const noexcept override { return mask_.shape.size(); }
    std::string describe() const override;
    const SamplingMask& mask() const noexcept { return mask_; }
    const std::vector<std::complex<double>>& kspace() const noexcept { return y_; }

    void apply_linear(std::span<const double> x, std::span<double> out) const override;
    void anchor(int i, RngStream& rng, std::span<double> out) const override;
    std::optional<double> exact_tau() const override;
    std::optional<double> sigma_max_certificate() const override;

    /// Re(F^-1 y), the zero-filled reconstruction (equals b).
    const std::vector<double>& zero_filled() const noexcept { return b_; }
    /// max |Im(F^-1 D y)|; zero up to roundoff for y from a real image.
    double anchor_imaginary_residual() const noexcept { return b_imag_residual_; }
    /// ||D F x - y|| / ||y||
    double consistency_residual(std::span<const double> x) const;
    /// D F x
    std::vector<std::complex<double>> measure(std::span<const double> x) const;

private:
    SamplingMask mask_;
    std::vector<std::complex<double>> y_;
    Fft2d fft_;
    std::vector<double> b_;
    double b_imag_residual_ = 0.0;
};

/// Black-box linear part with a constant offset. The operator carries no
/// certificate until certify_nonexpansive() has accepted it.
class LinearMapConsistency final : public ConsistencyOp {
public:
    using Map = std::function<void(std::span<const double>, std::span<double>)>;

    LinearMapConsistency(std::size_t n, Map forward, Map transpose, std::vector<double> offset,
                         std::string name = "linear-map");

    std::size_t dim() const noexcept override { return n_; }
    std::string describe() const override { return name_; }
    void apply_linear(std::span<const double> x, std::span<double> out) const override;
    void apply_linear_transpose(std::span<const double> x, std::span<double> out) const override;
    void anchor(int, RngStream&, std::span<double> out) const override;
    std::optional<double> sigma_max_certificate() const override { return certificate_; }
    void set_certificate(double sigma_max) { certificate_ = sigma_max; }

private:
    std::size_t n_;
    Map forward_;
    Map transpose_;
    std::vector<double> offset_;
    std::string name_;
    std::optional<double> certificate_;
};

struct NonexpansiveCertificate {
    double sigma_max_estimate = 0.0;  ///< power-iteration estimate of sigma_max(A)
    int iterations = 0;
    double max_pair_ratio = 0.0;      ///< max ||Ax - Ax'|| / ||x - x'|| over random pairs
    int pair_trials = 0;
    bool certified = false;           ///< both quantities <= 1 + tolerance
    static constexpr double tolerance = 1e-6;
};

/// Power iteration on A^T A (at least 50 iterations) plus `trials` random
/// pair checks. Throws NumericError when the operator is expansive.
NonexpansiveCertificate certify_nonexpansive(const ConsistencyOp& op, int trials, RngStream& rng,
                                             int iterations = 50);
/// Same as certify_nonexpansive but reports instead of throwing.
NonexpansiveCertificate inspect_nonexpansive(const ConsistencyOp& op, int trials, RngStream& rng,
                                             int iterations = 50);

struct TraceEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int probes = 0;
};

/// Hutchinson estimate of Tr(A^T A) / n with Rademacher probes.
TraceEstimate estimate_tau_hutchinson(const ConsistencyOp& op, int probes, RngStream& rng);

struct ProjectionCheck {
    double idempotence_error = 0.0;  ///< max ||A A x - A x|| / ||x||
    double symmetry_error = 0.0;     ///< max |<Ax, y> - <x, Ay>| / (||x|| ||y||)
};

/// Probes A^2 = A and A^T = A with random vectors.
ProjectionCheck check_projection(const ConsistencyOp& op, int probes, RngStream& rng);

/// Block-mean downsample of an image by `factor` (H/D x W/D result).
std::vector<double> block_mean_downsample(ImageShape shape, std::size_t factor, std::span<const double> x);
/// Replication upsample of an (H/D x W/D) image back to `shape`.
std::vector<double> replicate_upsample(ImageShape shape, std::size_t factor, std::span<const double> low);

} // namespace ccdf
