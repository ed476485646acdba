#include "ccdf/consistency.hpp"

#include "ccdf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ccdf {

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a[k] * b[k];
    return s;
}

void require_size(std::span<const double> v, std::size_t n, const char* what)
{
    if (v.size() != n)
        throw ValidationError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                              std::to_string(v.size()));
}

} // namespace

std::vector<double> ConsistencyOp::apply(std::span<const double> x, int i, RngStream& rng) const
{
    std::vector<double> out(dim());
    apply_into(x, i, rng, out);
    return out;
}

void ConsistencyOp::apply_into(std::span<const double> x, int i, RngStream& rng, std::span<double> out) const
{
    require_size(x, dim(), "consistency input");
    require_size(out, dim(), "consistency output");
    std::vector<double> b(dim());
    anchor(i, rng, b);
    apply_linear(x, out);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] += b[k];
}

// --- identity -------------------------------------------------------------

IdentityConsistency::IdentityConsistency(std::size_t n) : n_(n)
{
    detail::require(n > 0, "identity consistency needs a positive dimension");
}

void IdentityConsistency::apply_linear(std::span<const double> x, std::span<double> out) const
{
    std::copy(x.begin(), x.end(), out.begin());
}

void IdentityConsistency::anchor(int, RngStream&, std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
}

// --- super-resolution -----------------------------------------------------

std::vector<double> block_mean_downsample(ImageShape shape, std::size_t factor, std::span<const double> x)
{
    detail::require(factor >= 1, "downsampling factor must be >= 1");
    detail::require(shape.height % factor == 0 && shape.width % factor == 0,
                    "image " + to_string(shape) + " is not divisible by factor " + std::to_string(factor));
    require_size(x, shape.size(), "downsample input");
    const std::size_t lh = shape.height / factor;
    const std::size_t lw = shape.width / factor;
    std::vector<double> low(lh * lw, 0.0);
    for (std::size_t r = 0; r < shape.height; ++r)
        for (std::size_t c = 0; c < shape.width; ++c)
            low[(r / factor) * lw + c / factor] += x[r * shape.width + c];
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (double& v : low)
        v *= inv;
    return low;
}

std::vector<double> replicate_upsample(ImageShape shape, std::size_t factor, std::span<const double> low)
{
    detail::require(factor >= 1, "upsampling factor must be >= 1");
    detail::require(shape.height % factor == 0 && shape.width % factor == 0,
                    "image " + to_string(shape) + " is not divisible by factor " + std::to_string(factor));
    const std::size_t lw = shape.width / factor;
    require_size(low, (shape.height / factor) * lw, "upsample input");
    std::vector<double> x(shape.size());
    for (std::size_t r = 0; r < shape.height; ++r)
        for (std::size_t c = 0; c < shape.width; ++c)
            x[r * shape.width + c] = low[(r / factor) * lw + c / factor];
    return x;
}

SuperResolutionProjection::SuperResolutionProjection(ImageShape shape, std::size_t factor,
                                                     std::span<const double> measurement, Schedule schedule)
    : shape_(shape), factor_(factor), schedule_(std::move(schedule))
{
    detail::require(shape.size() > 0, "super-resolution shape must be non-empty");
    detail::require(factor >= 1, "super-resolution factor must be >= 1");
    detail::require(shape.height % factor == 0 && shape.width % factor == 0,
                    "image " + to_string(shape) + " is not divisible by factor " + std::to_string(factor));
    const std::size_t low_size = shape.size() / (factor * factor);
    if (measurement.size() == shape.size()) {
        measured_.resize(shape.size());
        project(measurement, measured_);
    } else if (measurement.size() == low_size) {
        measured_ = replicate_upsample(shape, factor, measurement);
    } else {
        throw ValidationError("super-resolution measurement must have " + std::to_string(shape.size()) +
                              " or " + std::to_string(low_size) + " values");
    }
}

std::string SuperResolutionProjection::describe() const
{
    return "sr(factor=" + std::to_string(factor_) + ", shape=" + to_string(shape_) + ")";
}

void SuperResolutionProjection::project(std::span<const double> x, std::span<double> out) const
{
    const std::size_t d = factor_;
    const std::size_t w = shape_.width;
    const double inv = 1.0 / static_cast<double>(d * d);
    for (std::size_t br = 0; br < shape_.height; br += d)
        for (std::size_t bc = 0; bc < w; bc += d) {
            double s = 0.0;
            for (std::size_t r = br; r < br + d; ++r)
                for (std::size_t c = bc; c < bc + d; ++c)
                    s += x[r * w + c];
            s *= inv;
            for (std::size_t r = br; r < br + d; ++r)
                for (std::size_t c = bc; c < bc + d; ++c)
                    out[r * w + c] = s;
        }
}

void SuperResolutionProjection::apply_linear(std::span<const double> x, std::span<double> out) const
{
    project(x, out);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = x[k] - out[k];
}

void SuperResolutionProjection::anchor(int i, RngStream& rng, std::span<double> out) const
{
    const auto [a, b] = schedule_.forward_coeffs_or_identity(i);
    std::vector<double> z(dim());
    rng.fill_normal(z);
    std::vector<double> pz(dim());
    project(z, pz);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = a * measured_[k] + b * pz[k];
}

std::optional<double> SuperResolutionProjection::exact_tau() const
{
    return 1.0 - 1.0 / static_cast<double>(factor_ * factor_);
}

std::optional<double> SuperResolutionProjection::sigma_max_certificate() const
{
    return factor_ == 1 ? 0.0 : 1.0;
}

// --- inpainting -----------------------------------------------------------

InpaintProjection::InpaintProjection(SamplingMask mask, std::span<const double> measurement, Schedule schedule)
    : mask_(std::move(mask)), schedule_(std::move(schedule))
{
    detail::require(mask_.keep.size() == mask_.shape.size() && mask_.shape.size() > 0,
                    "inpainting mask is malformed");
    detail::require(mask_.count() > 0, "inpainting mask keeps no pixels (unconditional sampling)");
    require_size(measurement, mask_.shape.size(), "inpainting measurement");
    measured_.resize(measurement.size());
    for (std::size_t k = 0; k < measurement.size(); ++k)
        measured_[k] = mask_.keep[k] ? measurement[k] : 0.0;
}

std::string InpaintProjection::describe() const
{
    return "inpaint(kept=" + std::to_string(mask_.count()) + "/" + std::to_string(mask_.shape.size()) + ")";
}

void InpaintProjection::apply_linear(std::span<const double> x, std::span<double> out) const
{
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = mask_.keep[k] ? 0.0 : x[k];
}

void InpaintProjection::anchor(int i, RngStream& rng, std::span<double> out) const
{
    const auto [a, b] = schedule_.forward_coeffs_or_identity(i);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double z = rng.normal();
        out[k] = mask_.keep[k] ? a * measured_[k] + b * z : 0.0;
    }
}

std::optional<double> InpaintProjection::exact_tau() const
{
    const auto n = static_cast<double>(mask_.shape.size());
    return (n - static_cast<double>(mask_.count())) / n;
}

std::optional<double> InpaintProjection::sigma_max_certificate() const
{
    return mask_.count() == mask_.shape.size() ? 0.0 : 1.0;
}

// --- MRI ------------------------------------------------------------------

MriProjection::MriProjection(SamplingMask mask, std::vector<std::complex<double>> kspace)
    : mask_(std::move(mask)), y_(std::move(kspace)), fft_(mask_.shape)
{
    detail::require(mask_.keep.size() == mask_.shape.size() && mask_.shape.size() > 0, "MRI mask is malformed");
    detail::require(mask_.count() > 0, "MRI mask keeps no frequencies");
    if (y_.size() != mask_.shape.size())
        throw ValidationError("MRI k-space has " + std::to_string(y_.size()) + " samples but the mask has " +
                              std::to_string(mask_.shape.size()));
    detail::require(mask_.conjugate_symmetric(),
                    "MRI mask must be conjugate-symmetric for real-valued reconstruction");
    for (std::size_t k = 0; k < y_.size(); ++k) {
        if (!mask_.keep[k])
            y_[k] = 0.0;
        detail::require(std::isfinite(y_[k].real()) && std::isfinite(y_[k].imag()), "MRI k-space must be finite");
    }
    std::vector<std::complex<double>> img(y_.size());
    fft_.inverse(y_, img);
    b_.resize(img.size());
    for (std::size_t k = 0; k < img.size(); ++k) {
        b_[k] = img[k].real();
        b_imag_residual_ = std::max(b_imag_residual_, std::abs(img[k].imag()));
    }
}

MriProjection MriProjection::from_image(SamplingMask mask, std::span<const double> image)
{
    require_size(image, mask.shape.size(), "MRI image");
    Fft2d fft(mask.shape);
    std::vector<std::complex<double>> x(image.begin(), image.end()), y(image.size());
    fft.forward(x, y);
    return MriProjection(std::move(mask), std::move(y));
}

std::string MriProjection::describe() const
{
    return "mri(kept=" + std::to_string(mask_.count()) + "/" + std::to_string(mask_.shape.size()) +
           ", shape=" + to_string(mask_.shape) + ")";
}

void MriProjection::apply_linear(std::span<const double> x, std::span<double> out) const
{
    std::vector<std::complex<double>> a(x.begin(), x.end()), k(x.size());
    fft_.forward(a, k);
    for (std::size_t j = 0; j < k.size(); ++j)
        if (mask_.keep[j])
            k[j] = 0.0;
    fft_.inverse(k, a);
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = a[j].real();
}

void MriProjection::anchor(int, RngStream&, std::span<double> out) const
{
    std::copy(b_.begin(), b_.end(), out.begin());
}

std::optional<double> MriProjection::exact_tau() const
{
    const auto n = static_cast<double>(mask_.shape.size());
    return (n - static_cast<double>(mask_.count())) / n;
}

std::optional<double> MriProjection::sigma_max_certificate() const
{
    return mask_.count() == mask_.shape.size() ? 0.0 : 1.0;
}

std::vector<std::complex<double>> MriProjection::measure(std::span<const double> x) const
{
    require_size(x, dim(), "MRI measure input");
    std::vector<std::complex<double>> a(x.begin(), x.end()), k(x.size());
    fft_.forward(a, k);
    for (std::size_t j = 0; j < k.size(); ++j)
        if (!mask_.keep[j])
            k[j] = 0.0;
    return k;
}

double MriProjection::consistency_residual(std::span<const double> x) const
{
    const auto k = measure(x);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
        if (!mask_.keep[j])
            continue;
        num += std::norm(k[j] - y_[j]);
        den += std::norm(y_[j]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// --- black box ------------------------------------------------------------

LinearMapConsistency::LinearMapConsistency(std::size_t n, Map forward, Map transpose, std::vector<double> offset,
                                           std::string name)
    : n_(n), forward_(std::move(forward)), transpose_(std::move(transpose)), offset_(std::move(offset)),
      name_(std::move(name))
{
    detail::require(n > 0, "linear map needs a positive dimension");
    detail::require(static_cast<bool>(forward_), "linear map needs a forward action");
    if (offset_.empty())
        offset_.assign(n, 0.0);
    require_size(offset_, n, "linear map offset");
}

void LinearMapConsistency::apply_linear(std::span<const double> x, std::span<double> out) const
{
    forward_(x, out);
}

void LinearMapConsistency::apply_linear_transpose(std::span<const double> x, std::span<double> out) const
{
    if (transpose_)
        transpose_(x, out);
    else
        forward_(x, out);
}

void LinearMapConsistency::anchor(int, RngStream&, std::span<double> out) const
{
    std::copy(offset_.begin(), offset_.end(), out.begin());
}

// --- certificates ---------------------------------------------------------

NonexpansiveCertificate inspect_nonexpansive(const ConsistencyOp& op, int trials, RngStream& rng, int iterations)
{
    const std::size_t n = op.dim();
    NonexpansiveCertificate cert;
    iterations = std::max(iterations, 50);

    std::vector<double> v = rng.normal_vector(n);
    std::vector<double> av(n), atav(n);
    double nv = norm2(v);
    for (double& x : v)
        x /= nv;
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        op.apply_linear(v, av);
        op.apply_linear_transpose(av, atav);
        estimate = norm2(av);
        cert.iterations = it + 1;
        const double n_next = norm2(atav);
        if (n_next == 0.0)
            break;
        for (std::size_t k = 0; k < n; ++k)
            v[k] = atav[k] / n_next;
    }
    cert.sigma_max_estimate = estimate;

    std::vector<double> x(n), y(n), d(n), ad(n);
    for (int t = 0; t < trials; ++t) {
        rng.fill_normal(x);
        rng.fill_normal(y);
        for (std::size_t k = 0; k < n; ++k)
            d[k] = x[k] - y[k];
        // A x - A y = A (x - y) for the linear part.
        op.apply_linear(d, ad);
        const double den = norm2(d);
        if (den > 0.0)
            cert.max_pair_ratio = std::max(cert.max_pair_ratio, norm2(ad) / den);
        ++cert.pair_trials;
    }
    const double limit = 1.0 + NonexpansiveCertificate::tolerance;
    cert.certified = cert.sigma_max_estimate <= limit && cert.max_pair_ratio <= limit;
    return cert;
}

NonexpansiveCertificate certify_nonexpansive(const ConsistencyOp& op, int trials, RngStream& rng, int iterations)
{
    auto cert = inspect_nonexpansive(op, trials, rng, iterations);
    if (!cert.certified) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "operator " << op.describe() << " rejected: sigma_max estimate " << cert.sigma_max_estimate
            << ", max pair ratio " << cert.max_pair_ratio << " exceed 1 + "
            << NonexpansiveCertificate::tolerance;
        throw NumericError(msg.str());
    }
    return cert;
}

TraceEstimate estimate_tau_hutchinson(const ConsistencyOp& op, int probes, RngStream& rng)
{
    detail::require(probes >= 2, "Hutchinson estimation needs at least 2 probes");
    const std::size_t n = op.dim();
    std::vector<double> z(n), az(n);
    double mean = 0.0;
    double m2 = 0.0;
    for (int p = 0; p < probes; ++p) {
        for (double& v : z)
            v = rng.uniform() < 0.5 ? -1.0 : 1.0;
        op.apply_linear(z, az);
        const double sample = dot(az, az) / static_cast<double>(n);
        const double delta = sample - mean;
        mean += delta / (p + 1);
        m2 += delta * (sample - mean);
    }
    TraceEstimate est;
    est.value = mean;
    est.std_error = std::sqrt(m2 / (probes - 1) / probes);
    est.probes = probes;
    return est;
}

ProjectionCheck check_projection(const ConsistencyOp& op, int probes, RngStream& rng)
{
    const std::size_t n = op.dim();
    std::vector<double> x(n), y(n), ax(n), aax(n), ay(n);
    ProjectionCheck check;
    for (int p = 0; p < probes; ++p) {
        rng.fill_normal(x);
        rng.fill_normal(y);
        op.apply_linear(x, ax);
        op.apply_linear(ax, aax);
        op.apply_linear(y, ay);
        double diff = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            diff += (aax[k] - ax[k]) * (aax[k] - ax[k]);
        const double nx = norm2(x);
        check.idempotence_error = std::max(check.idempotence_error, std::sqrt(diff) / nx);
        check.symmetry_error =
            std::max(check.symmetry_error, std::abs(dot(ax, y) - dot(x, ay)) / (nx * norm2(y)));
    }
    return check;
}

} // namespace ccdf
