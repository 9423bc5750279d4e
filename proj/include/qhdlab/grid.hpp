#pragma once

// Periodic pseudo-spectral grids in one or two dimensions.
//
// Fields are flat std::vectors in row-major order (axis 0 slowest). Every
// operator takes the grid explicitly; a grid is immutable once built and may
// be shared between threads. Transforms go through FFTW with plans created
// once per grid; execution uses the new-array interface so concurrent callers
// never share scratch memory.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"

namespace qhdlab {

using Complex = std::complex<double>;
using RealField = std::vector<double>;
using ComplexField = std::vector<Complex>;
/// One RealField per spatial axis.
using VectorField = std::vector<RealField>;
using ComplexVectorField = std::vector<ComplexField>;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Owns a forward/backward plan pair. FFTW planning is not thread-safe, so
// creation and destruction are serialized; fftw_execute_dft is safe.
class FftPlans {
public:
    FftPlans(int dim, int n) {
        const std::size_t size = dim == 1 ? static_cast<std::size_t>(n)
                                          : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
        std::vector<Complex> dummy(size);
        auto* p = reinterpret_cast<fftw_complex*>(dummy.data());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        std::lock_guard lock(fftw_planner_mutex());
        if (dim == 1) {
            fwd_ = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, flags);
            bwd_ = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, flags);
        } else {
            fwd_ = fftw_plan_dft_2d(n, n, p, p, FFTW_FORWARD, flags);
            bwd_ = fftw_plan_dft_2d(n, n, p, p, FFTW_BACKWARD, flags);
        }
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
    ~FftPlans() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }

    void forward(ComplexField& data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(fwd_, p, p);
    }
    void backward(ComplexField& data) const {
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(bwd_, p, p);
    }

private:
    fftw_plan fwd_{};
    fftw_plan bwd_{};
};

}  // namespace detail

/// Periodic uniform grid on [-L/2, L/2)^d with DFT mode tables.
class SpectralGrid {
public:
    SpectralGrid(int dim, int n, double length) : dim_(dim), n_(n), length_(length) {
        if (dim != 1 && dim != 2) throw ValidationError("grid dimension must be 1 or 2");
        if (n < 8 || (n & (n - 1)) != 0)
            throw ValidationError("grid points per axis must be a power of two >= 8, got " +
                                  std::to_string(n));
        if (!(length > 0.0) || !std::isfinite(length))
            throw ValidationError("grid period must be positive");

        size_ = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
        modes_.resize(n);
        k_.resize(n);
        k_odd_.resize(n);
        for (int i = 0; i < n; ++i) {
            modes_[i] = i < n / 2 ? i : i - n;
            k_[i] = 2.0 * std::numbers::pi * modes_[i] / length;
            // The Nyquist mode has no conjugate partner; odd derivatives drop it.
            k_odd_[i] = (i == n / 2) ? 0.0 : k_[i];
        }
        ksq_.resize(size_);
        mask_.resize(size_);
        for (std::size_t idx = 0; idx < size_; ++idx) {
            double s = 0.0;
            bool keep = true;
            for (int ax = 0; ax < dim_; ++ax) {
                const int i = axis_index(idx, ax);
                s += k_[i] * k_[i];
                keep = keep && (3 * std::abs(modes_[i]) <= n);
            }
            ksq_[idx] = s;
            mask_[idx] = keep ? 1 : 0;
        }
        plans_ = std::make_shared<detail::FftPlans>(dim, n);
    }

    int dim() const noexcept { return dim_; }
    int n() const noexcept { return n_; }
    double length() const noexcept { return length_; }
    std::size_t size() const noexcept { return size_; }
    double dx() const noexcept { return length_ / n_; }
    double cell_volume() const noexcept { return std::pow(dx(), dim_); }
    double volume() const noexcept { return std::pow(length_, dim_); }

    /// Signed mode numbers m per axis, in FFT order.
    const std::vector<int>& modes() const noexcept { return modes_; }
    /// k = 2 pi m / L per axis, in FFT order.
    const std::vector<double>& wavenumbers() const noexcept { return k_; }
    const std::vector<double>& ksq() const noexcept { return ksq_; }
    /// 1 where the mode survives 2/3-rule dealiasing.
    const std::vector<char>& dealias_mask() const noexcept { return mask_; }

    int axis_index(std::size_t flat, int axis) const noexcept {
        if (dim_ == 1) return static_cast<int>(flat);
        return axis == 0 ? static_cast<int>(flat / n_) : static_cast<int>(flat % n_);
    }
    double k_axis(std::size_t flat, int axis) const noexcept { return k_[axis_index(flat, axis)]; }
    double k_axis_odd(std::size_t flat, int axis) const noexcept {
        return k_odd_[axis_index(flat, axis)];
    }

    /// Centered coordinate x_i = -L/2 + i dx along one axis, as a full field.
    RealField coordinate(int axis) const {
        RealField x(size_);
        for (std::size_t idx = 0; idx < size_; ++idx)
            x[idx] = -0.5 * length_ + axis_index(idx, axis) * dx();
        return x;
    }
    double coordinate_1d(int i) const noexcept { return -0.5 * length_ + i * dx(); }

    /// Unnormalized forward DFT.
    ComplexField forward(ComplexField data) const {
        check(data.size());
        plans_->forward(data);
        return data;
    }
    /// Inverse DFT including the 1/N factor.
    ComplexField inverse(ComplexField data) const {
        check(data.size());
        plans_->backward(data);
        const double s = 1.0 / static_cast<double>(size_);
        for (auto& c : data) c *= s;
        return data;
    }
    void forward_inplace(ComplexField& data) const {
        check(data.size());
        plans_->forward(data);
    }
    void inverse_inplace(ComplexField& data) const {
        check(data.size());
        plans_->backward(data);
        const double s = 1.0 / static_cast<double>(size_);
        for (auto& c : data) c *= s;
    }

    void check(std::size_t s) const {
        if (s != size_) throw ValidationError("field size does not match grid");
    }

private:
    int dim_;
    int n_;
    double length_;
    std::size_t size_{};
    std::vector<int> modes_;
    std::vector<double> k_;
    std::vector<double> k_odd_;
    std::vector<double> ksq_;
    std::vector<char> mask_;
    std::shared_ptr<const detail::FftPlans> plans_;
};

inline SpectralGrid make_grid(int dim, int n, double length) { return SpectralGrid(dim, n, length); }

// ---------------------------------------------------------------------------
// Field helpers

inline ComplexField to_complex(std::span<const double> f) {
    return ComplexField(f.begin(), f.end());
}

inline RealField real_part(std::span<const Complex> f) {
    RealField r(f.size());
    std::transform(f.begin(), f.end(), r.begin(), [](Complex c) { return c.real(); });
    return r;
}

inline RealField imag_part(std::span<const Complex> f) {
    RealField r(f.size());
    std::transform(f.begin(), f.end(), r.begin(), [](Complex c) { return c.imag(); });
    return r;
}

inline RealField abs2(std::span<const Complex> f) {
    RealField r(f.size());
    std::transform(f.begin(), f.end(), r.begin(), [](Complex c) { return std::norm(c); });
    return r;
}

inline bool all_finite(std::span<const double> f) {
    return std::all_of(f.begin(), f.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(std::span<const Complex> f) {
    return std::all_of(f.begin(), f.end(),
                       [](Complex c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

inline double max_abs(std::span<const double> f) {
    double m = 0.0;
    for (double x : f) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(std::span<const Complex> f) {
    double m = 0.0;
    for (Complex c : f) m = std::max(m, std::abs(c));
    return m;
}

/// Trapezoidal quadrature on the periodic grid (sum times cell volume).
inline double integrate(const SpectralGrid& g, std::span<const double> f) {
    g.check(f.size());
    double s = 0.0;
    for (double x : f) s += x;
    return s * g.cell_volume();
}

inline Complex integrate(const SpectralGrid& g, std::span<const Complex> f) {
    g.check(f.size());
    Complex s = 0.0;
    for (Complex x : f) s += x;
    return s * g.cell_volume();
}

// ---------------------------------------------------------------------------
// Spectral differentiation

/// d/dx_axis of a field given by its spectrum.
inline ComplexField derivative_from_spectrum(const SpectralGrid& g, const ComplexField& spec,
                                             int axis) {
    ComplexField out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i)
        out[i] = Complex(0.0, g.k_axis_odd(i, axis)) * spec[i];
    g.inverse_inplace(out);
    return out;
}

inline ComplexVectorField gradient(const SpectralGrid& g, const ComplexField& f) {
    const ComplexField spec = g.forward(f);
    ComplexVectorField out;
    out.reserve(g.dim());
    for (int ax = 0; ax < g.dim(); ++ax) out.push_back(derivative_from_spectrum(g, spec, ax));
    return out;
}

inline VectorField gradient(const SpectralGrid& g, std::span<const double> f) {
    const ComplexField spec = g.forward(to_complex(f));
    VectorField out;
    out.reserve(g.dim());
    for (int ax = 0; ax < g.dim(); ++ax) out.push_back(real_part(derivative_from_spectrum(g, spec, ax)));
    return out;
}

inline ComplexField partial(const SpectralGrid& g, const ComplexField& f, int axis) {
    return derivative_from_spectrum(g, g.forward(f), axis);
}

inline RealField partial(const SpectralGrid& g, std::span<const double> f, int axis) {
    return real_part(derivative_from_spectrum(g, g.forward(to_complex(f)), axis));
}

inline ComplexField laplacian(const SpectralGrid& g, const ComplexField& f) {
    ComplexField spec = g.forward(f);
    const auto& ksq = g.ksq();
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= -ksq[i];
    g.inverse_inplace(spec);
    return spec;
}

inline RealField laplacian(const SpectralGrid& g, std::span<const double> f) {
    return real_part(laplacian(g, to_complex(f)));
}

inline RealField divergence(const SpectralGrid& g, const VectorField& v) {
    ComplexField acc(g.size(), Complex(0.0));
    for (int ax = 0; ax < g.dim(); ++ax) {
        const ComplexField spec = g.forward(to_complex(v[ax]));
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += Complex(0.0, g.k_axis_odd(i, ax)) * spec[i];
    }
    g.inverse_inplace(acc);
    return real_part(acc);
}

inline ComplexField divergence(const SpectralGrid& g, const ComplexVectorField& v) {
    ComplexField acc(g.size(), Complex(0.0));
    for (int ax = 0; ax < g.dim(); ++ax) {
        const ComplexField spec = g.forward(v[ax]);
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += Complex(0.0, g.k_axis_odd(i, ax)) * spec[i];
    }
    g.inverse_inplace(acc);
    return acc;
}

// ---------------------------------------------------------------------------
// Dealiasing

inline void dealias_spectrum(const SpectralGrid& g, ComplexField& spec) {
    const auto& mask = g.dealias_mask();
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (!mask[i]) spec[i] = 0.0;
}

inline ComplexField dealias(const SpectralGrid& g, const ComplexField& f) {
    ComplexField spec = g.forward(f);
    dealias_spectrum(g, spec);
    g.inverse_inplace(spec);
    return spec;
}

inline RealField dealias(const SpectralGrid& g, std::span<const double> f) {
    return real_part(dealias(g, to_complex(f)));
}

// ---------------------------------------------------------------------------
// Norms

struct Norms {
    double l2 = 0.0;
    double linf = 0.0;
    double h1_seminorm = 0.0;
};

inline Norms norms(const SpectralGrid& g, const ComplexField& f) {
    Norms out;
    double s = 0.0;
    for (Complex c : f) {
        s += std::norm(c);
        out.linf = std::max(out.linf, std::abs(c));
    }
    out.l2 = std::sqrt(s * g.cell_volume());
    double h = 0.0;
    for (const auto& d : gradient(g, f))
        for (Complex c : d) h += std::norm(c);
    out.h1_seminorm = std::sqrt(h * g.cell_volume());
    return out;
}

inline Norms norms(const SpectralGrid& g, std::span<const double> f) {
    return norms(g, to_complex(f));
}

inline double l2_norm(const SpectralGrid& g, std::span<const double> f) {
    double s = 0.0;
    for (double x : f) s += x * x;
    return std::sqrt(s * g.cell_volume());
}

inline double l2_norm(const SpectralGrid& g, std::span<const Complex> f) {
    double s = 0.0;
    for (Complex c : f) s += std::norm(c);
    return std::sqrt(s * g.cell_volume());
}

inline double l2_distance(const SpectralGrid& g, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s * g.cell_volume());
}

inline double l2_distance(const SpectralGrid& g, std::span<const Complex> a, std::span<const Complex> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s * g.cell_volume());
}

/// Fraction of spectral energy in retained modes whose index exceeds `fraction`
/// of the dealiasing cutoff on some axis. Used as an under-resolution monitor.
inline double spectral_tail_fraction(const SpectralGrid& g, std::span<const double> f,
                                     double fraction = 0.75) {
    const ComplexField spec = g.forward(to_complex(f));
    const double cutoff = fraction * g.n() / 3.0;
    double tail = 0.0, total = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double e = std::norm(spec[i]);
        total += e;
        bool high = false;
        for (int ax = 0; ax < g.dim(); ++ax)
            high = high || std::abs(g.modes()[g.axis_index(i, ax)]) > cutoff;
        if (high) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

/// Evaluate a field at arbitrary points by trigonometric interpolation (1D only):
/// returns f(x + shift) sampled on the grid, exact for band-limited f.
inline RealField spectral_shift_1d(const SpectralGrid& g, std::span<const double> f, double shift) {
    ComplexField spec = g.forward(to_complex(f));
    const int n = g.n();
    for (int i = 0; i < n; ++i) {
        if (i == n / 2) {
            // Nyquist: keep only the real cosine part of the shifted mode.
            spec[i] *= std::cos(g.wavenumbers()[i] * shift);
        } else {
            spec[i] *= std::polar(1.0, g.wavenumbers()[i] * shift);
        }
    }
    g.inverse_inplace(spec);
    return real_part(spec);
}

}  // namespace qhdlab
