#pragma once

// Named initial-data families. Each builder takes a grid and a flat parameter
// record so that the command-line driver can select them by name.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace qhdlab {

struct DataParams {
    double amplitude = 1.0;
    double width = 1.0;
    double k0 = 0.0;          // carrier wavenumber (or compression rate for compact_bump)
    double chirp = 0.0;
    double center = 0.0;      // shift along axis 0
    double separation = 4.0;  // vortex_pair distance between cores
    double phase_amplitude = 0.0;
    double velocity = 0.0;
};

/// C-infinity bump exp(1 - 1/(1 - s^2)) on |s| < 1, peak value 1.
inline double compact_bump(double s) {
    const double q = 1.0 - s * s;
    return q > 0.0 ? std::exp(1.0 - 1.0 / q) : 0.0;
}

/// Smooth transition from 1 (r <= r0) to 0 (r >= r1).
inline double smooth_cutoff(double r, double r0, double r1) {
    if (r <= r0) return 1.0;
    if (r >= r1) return 0.0;
    auto h = [](double q) { return q > 0.0 ? std::exp(-1.0 / q) : 0.0; };
    const double s = (r - r0) / (r1 - r0);
    return h(1.0 - s) / (h(1.0 - s) + h(s));
}

namespace detail {

inline double radius2(const SpectralGrid& g, const std::vector<RealField>& x, std::size_t i, double center) {
    double r2 = 0.0;
    for (int ax = 0; ax < g.dim(); ++ax) {
        const double q = x[ax][i] - (ax == 0 ? center : 0.0);
        r2 += q * q;
    }
    return r2;
}

inline std::vector<RealField> coordinates(const SpectralGrid& g) {
    std::vector<RealField> x(g.dim());
    for (int ax = 0; ax < g.dim(); ++ax) x[ax] = g.coordinate(ax);
    return x;
}

}  // namespace detail

/// Vortex-antivortex pair on a unit background, cores at (-+d/2, 0) shifted off the grid nodes by dx/2.
/// psi = g(r1) g(r2) |u| exp(i c(r) arg u) with u = (z - z1) conj(z - z2) and g(r) = tanh(r)/r;
/// the phase is switched off smoothly far from the pair so the field is periodic.
inline ComplexField vortex_pair(const SpectralGrid& g, double separation) {
    if (g.dim() != 2) throw ValidationError("vortex_pair data needs d = 2");
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    const double off = 0.5 * g.dx();
    const Complex z1(-0.5 * separation + off, off), z2(0.5 * separation + off, off);
    auto prof = [](double r) { return r < 1e-8 ? 1.0 : std::tanh(r) / r; };
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const Complex z(x[i], y[i]);
        const Complex u = (z - z1) * std::conj(z - z2);
        const double c = smooth_cutoff(std::abs(z), 0.25 * g.length(), 0.45 * g.length());
        psi[i] = prof(std::abs(z - z1)) * prof(std::abs(z - z2)) * std::abs(u) * std::polar(1.0, c * std::arg(u));
    }
    return psi;
}

/// Two mirrored black solitons -tanh(x - x1) tanh(x - x2), x1,2 = -+(L/4 + dx/2): periodic up to
/// exp(-L/2) and locally equal to tanh(x - x1) near the first zero. No node sits exactly on a zero.
inline ComplexField black_soliton_pair(const SpectralGrid& g) {
    if (g.dim() != 1) throw ValidationError("black_soliton data is one-dimensional");
    const double x1 = -0.25 * g.length() - 0.5 * g.dx(), x2 = -x1;
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double x = g.coordinate_1d(static_cast<int>(i));
        psi[i] = -std::tanh(x - x1) * std::tanh(x - x2);
    }
    return psi;
}

/// Wave-function families:
///   constant         psi = A
///   plane_wave       psi = A exp(i k0 x)
///   gaussian_packet  psi = A exp(-|x - c|^2 / w^2) exp(i (k0 x + chirp |x|^2) / eps)
///   density_bump     psi = sqrt(1 + A exp(-|x|^2/w^2)) exp(i phase_amplitude exp(-|x|^2/(2 w^2)) / eps)
///   black_soliton    mirrored pair, see black_soliton_pair
///   vortex_pair      see vortex_pair
inline ComplexField wave_data(const SpectralGrid& g, const std::string& family, double eps, const DataParams& p) {
    const auto x = detail::coordinates(g);
    ComplexField psi(g.size());
    if (family == "constant") {
        for (auto& v : psi) v = p.amplitude;
    } else if (family == "plane_wave") {
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::polar(p.amplitude, p.k0 * x[0][i]);
    } else if (family == "gaussian_packet") {
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double r2c = detail::radius2(g, x, i, p.center);
            const double r2 = detail::radius2(g, x, i, 0.0);
            psi[i] = p.amplitude * std::exp(-r2c / (p.width * p.width)) *
                     std::polar(1.0, (p.k0 * x[0][i] + p.chirp * r2) / eps);
        }
    } else if (family == "density_bump") {
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double r2 = detail::radius2(g, x, i, p.center);
            const double w2 = p.width * p.width;
            psi[i] = std::polar(std::sqrt(1.0 + p.amplitude * std::exp(-r2 / w2)),
                                p.phase_amplitude * std::exp(-0.5 * r2 / w2) / eps);
        }
    } else if (family == "black_soliton") {
        psi = black_soliton_pair(g);
    } else if (family == "vortex_pair") {
        psi = vortex_pair(g, p.separation);
    } else {
        throw ValidationError("unknown wave data family '" + family + "'");
    }
    return psi;
}

struct HydroData {
    RealField rho;
    VectorField v;
};

/// Hydrodynamic families:
///   constant      rho = 1, v = 0
///   density_bump  rho = 1 + A exp(-|x|^2/w^2), v_0 = U exp(-|x|^2/w^2)
///   cosine_mode   rho = 1 + A cos(k0 x), v = 0
///   compact_bump  sqrt(rho) = A B(|x|/w), v_c = -k0 x_c B(|x|/w), vacuum outside (B = compact_bump)
inline HydroData hydro_data(const SpectralGrid& g, const std::string& family, const DataParams& p) {
    const auto x = detail::coordinates(g);
    HydroData h;
    h.rho.assign(g.size(), 1.0);
    h.v.assign(g.dim(), RealField(g.size(), 0.0));
    if (family == "constant") return h;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r2 = detail::radius2(g, x, i, p.center);
        if (family == "density_bump") {
            const double e = std::exp(-r2 / (p.width * p.width));
            h.rho[i] = 1.0 + p.amplitude * e;
            h.v[0][i] = p.velocity * e;
        } else if (family == "cosine_mode") {
            h.rho[i] = 1.0 + p.amplitude * std::cos(p.k0 * x[0][i]);
        } else if (family == "compact_bump") {
            const double b = compact_bump(std::sqrt(r2) / p.width);
            h.rho[i] = p.amplitude * p.amplitude * b * b;
            for (int ax = 0; ax < g.dim(); ++ax) h.v[ax][i] = -p.k0 * x[ax][i] * b;
        } else {
            throw ValidationError("unknown hydrodynamic data family '" + family + "'");
        }
    }
    return h;
}

}  // namespace qhdlab
