#pragma once

#include "ccdf/image.hpp"

#include <complex>
#include <memory>
#include <span>

namespace ccdf {

/// Unitary 2-D DFT (1/sqrt(n) on both directions) backed by FFTW.
/// Copies share the underlying plans; execution is reentrant.
class Fft2d {
public:
    explicit Fft2d(ImageShape shape);

    ImageShape shape() const noexcept { return shape_; }
    void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;
    void inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;

private:
    struct Plans;
    ImageShape shape_;
    std::shared_ptr<const Plans> plans_;
};

} // namespace ccdf
