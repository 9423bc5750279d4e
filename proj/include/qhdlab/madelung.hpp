#pragma once

// Wave function <-> hydrodynamic variables.

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "laws.hpp"

namespace qhdlab {

struct HydroState {
    RealField rho;
    VectorField v;
    std::vector<char> vacuum_mask;
    double t = 0.0;
    double eps = 1.0;
};

/// (rho, z = v + i w). Used for both the quantum and the general capillary case.
struct ExtendedState {
    RealField rho;
    ComplexVectorField z;
    double t = 0.0;
    double eps = 1.0;
};

/// Fields built from psi through the unit phase phi = psi/|psi| (0 on vacuum).
struct WeakVars {
    RealField rho;
    VectorField lambda;          // Im(conj(phi) grad psi)
    VectorField j;               // sqrt(rho) * lambda
    VectorField grad_sqrt_rho;   // Re(conj(phi) grad psi)
    std::vector<char> vacuum_mask;
};

/// rho = |psi|^2, v = eps Im(conj(psi) grad psi)/rho where rho >= threshold, 0 elsewhere.
inline HydroState to_hydro(const SpectralGrid& g, const ComplexField& psi, double eps,
                           double vacuum_threshold, double t = 0.0) {
    if (!(vacuum_threshold > 0.0)) throw ValidationError("vacuum threshold must be positive");
    HydroState h;
    h.t = t;
    h.eps = eps;
    h.rho = abs2(psi);
    h.vacuum_mask.resize(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) h.vacuum_mask[i] = h.rho[i] < vacuum_threshold;
    const auto grad = gradient(g, psi);
    for (int ax = 0; ax < g.dim(); ++ax) {
        RealField v(psi.size(), 0.0);
        for (std::size_t i = 0; i < psi.size(); ++i)
            if (!h.vacuum_mask[i]) v[i] = eps * (std::conj(psi[i]) * grad[ax][i]).imag() / h.rho[i];
        h.v.push_back(std::move(v));
    }
    return h;
}

/// psi = sqrt(rho) exp(i phi / eps).
inline ComplexField from_hydro(std::span<const double> rho, std::span<const double> phase, double eps) {
    ComplexField psi(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (rho[i] < 0.0) throw ValidationError("density must be non-negative");
        psi[i] = std::polar(std::sqrt(rho[i]), phase[i] / eps);
    }
    return psi;
}

inline double min_value(std::span<const double> f) {
    return f.empty() ? 0.0 : *std::min_element(f.begin(), f.end());
}

namespace detail {

inline ExtendedState assemble_extended(const SpectralGrid& g, const RealField& rho, const VectorField& v,
                                       double eps, auto&& w_factor, double floor) {
    const double m = min_value(rho);
    if (!(m >= floor)) throw VacuumError("extended variables need density above the floor", m, 0.0);
    ExtendedState s;
    s.rho = rho;
    s.eps = eps;
    const auto grad = gradient(g, rho);
    for (int ax = 0; ax < g.dim(); ++ax) {
        ComplexField z(rho.size());
        for (std::size_t i = 0; i < rho.size(); ++i)
            z[i] = Complex(v[ax][i], -w_factor(rho[i]) * grad[ax][i]);
        s.z.push_back(std::move(z));
    }
    return s;
}

}  // namespace detail

/// z = v + i w with w = -(eps/2) grad(rho)/rho.
inline ExtendedState extended_vars_qhd(const SpectralGrid& g, const RealField& rho, const VectorField& v,
                                       double eps, double density_floor = 1e-12) {
    return detail::assemble_extended(
        g, rho, v, eps, [eps](double r) { return 0.5 * eps / r; }, density_floor);
}

/// z = v + i w with w = -sqrt(kappa(rho)/rho) grad(rho).
inline ExtendedState extended_vars_korteweg(const SpectralGrid& g, const RealField& rho,
                                            const VectorField& v, const CapillarityLaw& kappa,
                                            double density_floor = 1e-12) {
    const double eps = kappa.kind() == CapillarityLaw::Kind::quantum ? kappa.parameter() : 0.0;
    return detail::assemble_extended(
        g, rho, v, eps, [&kappa](double r) { return kappa.w_factor(r); }, density_floor);
}

inline WeakVars weak_vars(const SpectralGrid& g, const ComplexField& psi) {
    WeakVars wv;
    wv.rho = abs2(psi);
    wv.vacuum_mask.resize(psi.size());
    const auto grad = gradient(g, psi);
    for (int ax = 0; ax < g.dim(); ++ax) {
        RealField lam(psi.size(), 0.0), jj(psi.size(), 0.0), gs(psi.size(), 0.0);
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double mod = std::abs(psi[i]);
            wv.vacuum_mask[i] = mod == 0.0;
            if (mod == 0.0) continue;
            const Complex q = std::conj(psi[i] / mod) * grad[ax][i];
            lam[i] = q.imag();
            gs[i] = q.real();
            jj[i] = mod * q.imag();
        }
        wv.lambda.push_back(std::move(lam));
        wv.j.push_back(std::move(jj));
        wv.grad_sqrt_rho.push_back(std::move(gs));
    }
    return wv;
}

inline double vacuum_fraction(std::span<const Complex> psi, double threshold) {
    if (!(threshold > 0.0)) throw ValidationError("vacuum threshold must be positive");
    if (psi.empty()) return 0.0;
    const auto count = std::count_if(psi.begin(), psi.end(),
                                     [threshold](Complex c) { return std::norm(c) < threshold; });
    return static_cast<double>(count) / static_cast<double>(psi.size());
}

/// Mask of points whose density is below `relative` times the maximum density.
inline std::vector<char> relative_vacuum_mask(std::span<const double> rho, double relative) {
    const double m = rho.empty() ? 0.0 : *std::max_element(rho.begin(), rho.end());
    std::vector<char> mask(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) mask[i] = rho[i] < relative * m;
    return mask;
}

}  // namespace qhdlab
