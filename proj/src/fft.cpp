#include "ccdf/fft.hpp"

#include "ccdf/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <vector>

namespace ccdf {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

} // namespace

struct Fft2d::Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
    double scale = 1.0;

    ~Plans()
    {
        std::lock_guard lock(planner_mutex());
        if (forward)
            fftw_destroy_plan(forward);
        if (inverse)
            fftw_destroy_plan(inverse);
    }
};

Fft2d::Fft2d(ImageShape shape) : shape_(shape)
{
    detail::require(shape.size() > 0, "FFT shape must be non-empty");
    auto plans = std::make_shared<Plans>();
    std::vector<std::complex<double>> a(shape.size()), b(shape.size());
    const int h = static_cast<int>(shape.height);
    const int w = static_cast<int>(shape.width);
    {
        std::lock_guard lock(planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plans->forward = fftw_plan_dft_2d(h, w, as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
        plans->inverse = fftw_plan_dft_2d(h, w, as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
    }
    if (!plans->forward || !plans->inverse)
        throw NumericError("FFTW failed to create a plan for " + to_string(shape));
    plans->scale = 1.0 / std::sqrt(static_cast<double>(shape.size()));
    plans_ = std::move(plans);
}

void Fft2d::forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const
{
    detail::require(in.size() == shape_.size() && out.size() == shape_.size(), "FFT buffer size mismatch");
    detail::require(static_cast<const void*>(in.data()) != out.data(), "FFT needs distinct buffers");
    // fftw_execute_dft takes a non-const input pointer but leaves it untouched
    // for out-of-place complex transforms.
    fftw_execute_dft(plans_->forward, as_fftw(const_cast<std::complex<double>*>(in.data())),
                     as_fftw(out.data()));
    for (auto& v : out)
        v *= plans_->scale;
}

void Fft2d::inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const
{
    detail::require(in.size() == shape_.size() && out.size() == shape_.size(), "FFT buffer size mismatch");
    detail::require(static_cast<const void*>(in.data()) != out.data(), "FFT needs distinct buffers");
    fftw_execute_dft(plans_->inverse, as_fftw(const_cast<std::complex<double>*>(in.data())),
                     as_fftw(out.data()));
    for (auto& v : out)
        v *= plans_->scale;
}

} // namespace ccdf
