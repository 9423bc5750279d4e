#pragma once

// Hydrodynamic solvers: compressible Euler in symmetric (v, a = sqrt(rho))
// form, the extended quantum (z = v + i w) system, the extended Korteweg
// system and the exactly solvable linearization about (rho, v) = (1, 0).
//
// All nonlinear systems are pseudo-spectral with 2/3-rule dealiasing of
// every product and classical RK4 in time (Lawson integrating factor for the
// quantum dispersion term).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "laws.hpp"
#include "madelung.hpp"
#include "schrodinger.hpp"

namespace qhdlab {

// ---------------------------------------------------------------------------
// Small spectral helpers shared by the solvers

namespace detail {

// Dealiased physical-space product source: forward transform, mask, inverse.
inline RealField project(const SpectralGrid& g, const RealField& f) { return dealias(g, f); }

inline RealField product(const SpectralGrid&, const RealField& a, const RealField& b) {
    RealField p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
    return p;
}

inline void axpy(RealField& y, double a, const RealField& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline void axpy(ComplexField& y, Complex a, const ComplexField& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Compressible Euler

struct SymmetricEulerState {
    VectorField v;
    RealField a;
    double t = 0.0;
};

/// Euler solver. For laws with f'(rho) = 1 the symmetric (v, a) system is used
/// directly; other laws evolve (v, rho) and report a = sqrt(rho).
class EulerSolver {
public:
    EulerSolver(SpectralGrid grid, NonlinearityLaw law) : grid_(std::move(grid)), law_(law) {}

    const SpectralGrid& grid() const noexcept { return grid_; }

    /// Advective CFL bound 0.5 dx / (|v|_inf + 2 |a|_inf max sqrt(f')).
    double cfl_limit(const SymmetricEulerState& s) const {
        double vmax = 0.0;
        for (const auto& c : s.v) vmax = std::max(vmax, max_abs(c));
        const double amax = max_abs(s.a);
        const double fp = std::sqrt(std::max(1e-300, law_.fprime(amax * amax)));
        return 0.5 * grid_.dx() / (vmax + 2.0 * amax * std::max(1.0, fp) + 1e-300);
    }

    void step(SymmetricEulerState& s, double dt) const {
        if (symmetric()) {
            rk4(s.v, s.a, dt, [this](const VectorField& v, const RealField& a, VectorField& dv,
                                     RealField& da) { rhs_symmetric(v, a, dv, da); });
        } else {
            RealField rho(s.a.size());
            for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = s.a[i] * s.a[i];
            rk4(s.v, rho, dt, [this](const VectorField& v, const RealField& r, VectorField& dv,
                                     RealField& dr) { rhs_density(v, r, dv, dr); });
            for (std::size_t i = 0; i < rho.size(); ++i) s.a[i] = std::sqrt(std::max(0.0, rho[i]));
        }
        s.t += dt;
        bool ok = all_finite(s.a);
        for (const auto& c : s.v) ok = ok && all_finite(c);
        if (!ok) throw NonFiniteError("Euler step produced non-finite values", s.t);
    }

private:
    bool symmetric() const { return law_.kind() != NonlinearityLaw::Kind::power || law_.sigma() == 1.0; }

    // v_t = -(v.grad)v - 2 a grad a ;  a_t = -v.grad a - (a/2) div v
    void rhs_symmetric(const VectorField& v, const RealField& a, VectorField& dv, RealField& da) const {
        const int d = grid_.dim();
        const std::size_t n = a.size();
        const VectorField ga = gradient(grid_, a);
        std::vector<VectorField> gv(d);
        for (int c = 0; c < d; ++c) gv[c] = gradient(grid_, v[c]);
        const RealField divv = divergence(grid_, v);
        dv.assign(d, RealField(n));
        for (int c = 0; c < d; ++c) {
            RealField src(n);
            for (std::size_t i = 0; i < n; ++i) {
                double adv = 0.0;
                for (int k = 0; k < d; ++k) adv += v[k][i] * gv[c][k][i];
                src[i] = -adv - 2.0 * a[i] * ga[c][i];
            }
            dv[c] = detail::project(grid_, src);
        }
        RealField src(n);
        for (std::size_t i = 0; i < n; ++i) {
            double adv = 0.0;
            for (int k = 0; k < d; ++k) adv += v[k][i] * ga[k][i];
            src[i] = -adv - 0.5 * a[i] * divv[i];
        }
        da = detail::project(grid_, src);
    }

    // v_t = -(v.grad)v - grad f(rho) ;  rho_t = -div(rho v)
    void rhs_density(const VectorField& v, const RealField& rho, VectorField& dv, RealField& dr) const {
        const int d = grid_.dim();
        const std::size_t n = rho.size();
        RealField frho(n);
        for (std::size_t i = 0; i < n; ++i) frho[i] = law_.f(std::max(0.0, rho[i]));
        const VectorField gf = gradient(grid_, detail::project(grid_, frho));
        std::vector<VectorField> gv(d);
        for (int c = 0; c < d; ++c) gv[c] = gradient(grid_, v[c]);
        dv.assign(d, RealField(n));
        for (int c = 0; c < d; ++c) {
            RealField src(n);
            for (std::size_t i = 0; i < n; ++i) {
                double adv = 0.0;
                for (int k = 0; k < d; ++k) adv += v[k][i] * gv[c][k][i];
                src[i] = -adv;
            }
            dv[c] = detail::project(grid_, src);
            detail::axpy(dv[c], -1.0, gf[c]);
        }
        VectorField flux(d);
        for (int c = 0; c < d; ++c) flux[c] = detail::project(grid_, detail::product(grid_, rho, v[c]));
        dr = divergence(grid_, flux);
        for (auto& x : dr) x = -x;
    }

    template <class Rhs>
    void rk4(VectorField& v, RealField& s, double dt, Rhs&& rhs) const {
        const int d = grid_.dim();
        VectorField k1v, k2v, k3v, k4v;
        RealField k1s, k2s, k3s, k4s;
        rhs(v, s, k1v, k1s);
        auto stage = [&](const VectorField& kv, const RealField& ks, double h, VectorField& vo, RealField& so) {
            vo = v;
            so = s;
            for (int c = 0; c < d; ++c) detail::axpy(vo[c], h, kv[c]);
            detail::axpy(so, h, ks);
        };
        VectorField vt;
        RealField st;
        stage(k1v, k1s, 0.5 * dt, vt, st);
        rhs(vt, st, k2v, k2s);
        stage(k2v, k2s, 0.5 * dt, vt, st);
        rhs(vt, st, k3v, k3s);
        stage(k3v, k3s, dt, vt, st);
        rhs(vt, st, k4v, k4s);
        const double w = dt / 6.0;
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < s.size(); ++i)
                v[c][i] += w * (k1v[c][i] + 2.0 * k2v[c][i] + 2.0 * k3v[c][i] + k4v[c][i]);
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] += w * (k1s[i] + 2.0 * k2s[i] + 2.0 * k3s[i] + k4s[i]);
    }

    SpectralGrid grid_;
    NonlinearityLaw law_;
};

// ---------------------------------------------------------------------------
// Extended systems

namespace detail {

inline RealField real_velocity(const ComplexField& z) { return real_part(z); }

inline void check_floor(const RealField& rho, double floor, double t) {
    const double m = min_value(rho);
    if (!(m >= floor)) throw VacuumError("density dropped below the extended-solver floor", m, t);
}

inline void check_finite(const ExtendedState& s, const char* who) {
    bool ok = all_finite(s.rho);
    for (const auto& c : s.z) ok = ok && all_finite(c);
    if (!ok) throw NonFiniteError(std::string(who) + " produced non-finite values", s.t);
}

// rho_t = -div(rho v), dealiased.
inline RealField continuity_rhs(const SpectralGrid& g, const RealField& rho, const ComplexVectorField& z) {
    VectorField flux(g.dim());
    for (int c = 0; c < g.dim(); ++c) {
        RealField p(rho.size());
        for (std::size_t i = 0; i < rho.size(); ++i) p[i] = rho[i] * z[c][i].real();
        flux[c] = dealias(g, p);
    }
    RealField r = divergence(g, flux);
    for (auto& x : r) x = -x;
    return r;
}

}  // namespace detail

/// Extended quantum system
///     z_t + (1/2) grad(z.z) + grad f(rho) = i (eps/2) Lap z,   rho_t + div(rho Re z) = 0.
/// The dispersive term is integrated exactly in Fourier space (Lawson RK4).
class QhdExtendedSolver {
public:
    QhdExtendedSolver(SpectralGrid grid, NonlinearityLaw law, double density_floor)
        : grid_(std::move(grid)), law_(law), floor_(density_floor) {}

    const SpectralGrid& grid() const noexcept { return grid_; }
    double density_floor() const noexcept { return floor_; }

    void step(ExtendedState& s, double dt) {
        if (!(dt > 0.0)) throw ValidationError("time step must be positive");
        detail::check_floor(s.rho, floor_, s.t);
        prepare(dt, s.eps);
        const int d = grid_.dim();

        // Work with z in spectral space and rho in physical space.
        ComplexVectorField zh(d);
        for (int c = 0; c < d; ++c) zh[c] = grid_.forward(s.z[c]);

        auto apply = [&](const ComplexField& e, ComplexVectorField& f) {
            for (auto& comp : f)
                for (std::size_t i = 0; i < comp.size(); ++i) comp[i] *= e[i];
        };

        ComplexVectorField k1z, k2z, k3z, k4z;
        RealField k1r, k2r, k3r, k4r;
        rhs(zh, s.rho, k1z, k1r);

        // stage 2: E(h/2)(z + h/2 k1)
        ComplexVectorField za = zh;
        for (int c = 0; c < d; ++c) detail::axpy(za[c], 0.5 * dt, k1z[c]);
        apply(half_, za);
        RealField ra = s.rho;
        detail::axpy(ra, 0.5 * dt, k1r);
        rhs(za, ra, k2z, k2r);

        // stage 3: E(h/2) z + h/2 k2
        ComplexVectorField zb = zh;
        apply(half_, zb);
        for (int c = 0; c < d; ++c) detail::axpy(zb[c], 0.5 * dt, k2z[c]);
        RealField rb = s.rho;
        detail::axpy(rb, 0.5 * dt, k2r);
        rhs(zb, rb, k3z, k3r);

        // stage 4: E(h) z + h E(h/2) k3
        ComplexVectorField zc = zh;
        apply(full_, zc);
        ComplexVectorField k3e = k3z;
        apply(half_, k3e);
        for (int c = 0; c < d; ++c) detail::axpy(zc[c], dt, k3e[c]);
        RealField rc = s.rho;
        detail::axpy(rc, dt, k3r);
        rhs(zc, rc, k4z, k4r);

        // combine
        const double w = dt / 6.0;
        ComplexVectorField zn = zh;
        apply(full_, zn);
        ComplexVectorField k1e = k1z;
        apply(full_, k1e);
        ComplexVectorField k23 = k2z;
        for (int c = 0; c < d; ++c) detail::axpy(k23[c], 1.0, k3z[c]);
        apply(half_, k23);
        for (int c = 0; c < d; ++c) {
            detail::axpy(zn[c], w, k1e[c]);
            detail::axpy(zn[c], 2.0 * w, k23[c]);
            detail::axpy(zn[c], w, k4z[c]);
            s.z[c] = grid_.inverse(std::move(zn[c]));
        }
        for (std::size_t i = 0; i < s.rho.size(); ++i)
            s.rho[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
        s.t += dt;
        detail::check_finite(s, "QHD extended step");
        detail::check_floor(s.rho, floor_, s.t);
    }

private:
    void prepare(double dt, double eps) {
        if (dt == cached_dt_ && eps == cached_eps_) return;
        const auto& ksq = grid_.ksq();
        half_.resize(ksq.size());
        full_.resize(ksq.size());
        for (std::size_t i = 0; i < ksq.size(); ++i) {
            half_[i] = std::polar(1.0, -0.25 * eps * dt * ksq[i]);
            full_[i] = std::polar(1.0, -0.5 * eps * dt * ksq[i]);
        }
        cached_dt_ = dt;
        cached_eps_ = eps;
    }

    // Nonlinear part in spectral space for z: -(1/2) grad(z.z) - grad f(rho).
    void rhs(const ComplexVectorField& zh, const RealField& rho, ComplexVectorField& dz, RealField& drho) const {
        const int d = grid_.dim();
        const std::size_t n = rho.size();
        ComplexVectorField z(d);
        for (int c = 0; c < d; ++c) z[c] = grid_.inverse(zh[c]);
        ComplexField q(n);
        for (std::size_t i = 0; i < n; ++i) {
            Complex zz = 0.0;
            for (int c = 0; c < d; ++c) zz += z[c][i] * z[c][i];
            q[i] = 0.5 * zz + law_.f(rho[i]);
        }
        grid_.forward_inplace(q);
        dealias_spectrum(grid_, q);
        dz.assign(d, ComplexField(n));
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < n; ++i) dz[c][i] = -Complex(0.0, grid_.k_axis_odd(i, c)) * q[i];
        drho = detail::continuity_rhs(grid_, rho, z);
    }

    SpectralGrid grid_;
    NonlinearityLaw law_;
    double floor_;
    ComplexField half_, full_;
    double cached_dt_ = -1.0;
    double cached_eps_ = -1.0;
};

/// Extended Korteweg system
///     z_t + (v.grad) z + i (grad z)^T w + grad f(rho) = i grad(a(rho) div z),
///     rho_t + div(rho v) = 0,   a(rho) = sqrt(rho kappa(rho)),
/// integrated with explicit RK4 (the second-order term is degenerate in general).
class KortewegSolver {
public:
    KortewegSolver(SpectralGrid grid, NonlinearityLaw law, CapillarityLaw kappa, double density_floor)
        : grid_(std::move(grid)), law_(law), kappa_(kappa), floor_(density_floor) {}

    const SpectralGrid& grid() const noexcept { return grid_; }

    /// Dispersive stability bound dx^2 / (pi max a(rho)).
    double dispersive_limit(const ExtendedState& s) const {
        double amax = 0.0;
        for (double r : s.rho) amax = std::max(amax, kappa_.a(r));
        const double dx = grid_.dx();
        return amax > 0.0 ? dx * dx / (std::numbers::pi * amax) : std::numeric_limits<double>::infinity();
    }

    void step(ExtendedState& s, double dt) const {
        if (!(dt > 0.0)) throw ValidationError("time step must be positive");
        detail::check_floor(s.rho, floor_, s.t);
        const int d = grid_.dim();
        ComplexVectorField k1z, k2z, k3z, k4z;
        RealField k1r, k2r, k3r, k4r;
        auto stage = [&](const ComplexVectorField& kz, const RealField& kr, double h, ComplexVectorField& zo,
                         RealField& ro) {
            zo = s.z;
            ro = s.rho;
            for (int c = 0; c < d; ++c) detail::axpy(zo[c], h, kz[c]);
            detail::axpy(ro, h, kr);
        };
        rhs(s.z, s.rho, k1z, k1r);
        ComplexVectorField zt;
        RealField rt;
        stage(k1z, k1r, 0.5 * dt, zt, rt);
        rhs(zt, rt, k2z, k2r);
        stage(k2z, k2r, 0.5 * dt, zt, rt);
        rhs(zt, rt, k3z, k3r);
        stage(k3z, k3r, dt, zt, rt);
        rhs(zt, rt, k4z, k4r);
        const double w = dt / 6.0;
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < s.rho.size(); ++i)
                s.z[c][i] += w * (k1z[c][i] + 2.0 * k2z[c][i] + 2.0 * k3z[c][i] + k4z[c][i]);
        for (std::size_t i = 0; i < s.rho.size(); ++i)
            s.rho[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
        s.t += dt;
        detail::check_finite(s, "Korteweg step");
        detail::check_floor(s.rho, floor_, s.t);
    }

private:
    void rhs(const ComplexVectorField& z, const RealField& rho, ComplexVectorField& dz, RealField& drho) const {
        const int d = grid_.dim();
        const std::size_t n = rho.size();
        std::vector<ComplexVectorField> gz(d);  // gz[c][k] = d_k z_c
        for (int c = 0; c < d; ++c) gz[c] = gradient(grid_, z[c]);
        const ComplexField divz = divergence(grid_, z);
        ComplexField adiv(n);
        RealField frho(n);
        for (std::size_t i = 0; i < n; ++i) {
            adiv[i] = kappa_.a(rho[i]) * divz[i];
            frho[i] = law_.f(rho[i]);
        }
        ComplexField pot(n);
        for (std::size_t i = 0; i < n; ++i) pot[i] = Complex(0.0, 1.0) * adiv[i] - frho[i];
        const ComplexVectorField gpot = gradient(grid_, dealias(grid_, pot));
        dz.assign(d, ComplexField(n));
        for (int c = 0; c < d; ++c) {
            ComplexField src(n);
            for (std::size_t i = 0; i < n; ++i) {
                Complex adv = 0.0;
                for (int k = 0; k < d; ++k) {
                    adv += z[k][i].real() * gz[c][k][i];                          // (v.grad) z_c
                    adv += Complex(0.0, 1.0) * gz[k][c][i] * z[k][i].imag();      // i d_c z_k w_k
                }
                src[i] = -adv;
            }
            dz[c] = dealias(grid_, src);
            detail::axpy(dz[c], 1.0, gpot[c]);
        }
        drho = detail::continuity_rhs(grid_, rho, z);
    }

    SpectralGrid grid_;
    NonlinearityLaw law_;
    CapillarityLaw kappa_;
    double floor_;
};

// ---------------------------------------------------------------------------
// Linearization about (rho, v) = (1, 0):
//     v_t + grad b = (eps^2/4) grad Lap b,   b_t + div v = 0.

struct LinearWaveState {
    RealField b;
    VectorField v;
    double t = 0.0;
    double eps = 0.0;
};

inline double linear_frequency(double k_abs, double eps) {
    return k_abs * std::sqrt(1.0 + 0.25 * eps * eps * k_abs * k_abs);
}

/// Exact mode-by-mode propagation to time t (negative t runs backwards).
inline LinearWaveState solve_linearized(const SpectralGrid& g, const RealField& b0, const VectorField& v0,
                                        double t, double eps) {
    const int d = g.dim();
    const std::size_t n = b0.size();
    const ComplexField bh0 = g.forward(to_complex(b0));
    ComplexVectorField vh0(d);
    for (int c = 0; c < d; ++c) vh0[c] = g.forward(to_complex(v0[c]));
    ComplexField bh(n);
    ComplexVectorField vh(d, ComplexField(n));
    const Complex I(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double kk = 0.0;
        std::vector<double> k(d);
        for (int c = 0; c < d; ++c) {
            k[c] = g.k_axis_odd(i, c);
            kk += k[c] * k[c];
        }
        const double kabs = std::sqrt(kk);
        if (kabs == 0.0) {
            bh[i] = bh0[i];
            for (int c = 0; c < d; ++c) vh[c][i] = vh0[c][i];
            continue;
        }
        const double beta = 1.0 + 0.25 * eps * eps * kk;
        const double omega = kabs * std::sqrt(beta);
        Complex q0 = 0.0;  // longitudinal velocity component
        for (int c = 0; c < d; ++c) q0 += k[c] * vh0[c][i];
        q0 /= kabs;
        const double cs = std::cos(omega * t), sn = std::sin(omega * t);
        bh[i] = bh0[i] * cs - I * (kabs / omega) * q0 * sn;
        const Complex q = q0 * cs - I * (kabs * beta / omega) * bh0[i] * sn;
        for (int c = 0; c < d; ++c) vh[c][i] = vh0[c][i] + (q - q0) * k[c] / kabs;
    }
    LinearWaveState out;
    out.t = t;
    out.eps = eps;
    out.b = real_part(g.inverse(std::move(bh)));
    for (int c = 0; c < d; ++c) out.v.push_back(real_part(g.inverse(std::move(vh[c]))));
    return out;
}

// ---------------------------------------------------------------------------
// Breakdown monitoring

enum class BreakdownCause { none, gradient_blowup, vacuum_approach, nonfinite };

inline const char* to_string(BreakdownCause c) {
    switch (c) {
        case BreakdownCause::none: return "none";
        case BreakdownCause::gradient_blowup: return "gradient_blowup";
        case BreakdownCause::vacuum_approach: return "vacuum_approach";
        case BreakdownCause::nonfinite: return "nonfinite";
    }
    return "?";
}

struct BreakdownReport {
    bool triggered = false;
    double time = 0.0;
    BreakdownCause cause = BreakdownCause::none;
    double peak_gradient = 0.0;   // max |grad(v, a)| seen up to the trigger
    double min_density = 0.0;     // min rho seen up to the trigger
};

struct BreakdownThresholds {
    double max_gradient = 50.0;
    /// Disabled when negative (e.g. data with vacuum by construction).
    double min_density = -1.0;
};

struct EulerSnapshot {
    double t = 0.0;
    VectorField v;
    RealField a;
};

/// W^{1,inf}-type monitor: max over components of |grad v|, |grad a|.
inline double max_gradient(const SpectralGrid& g, const VectorField& v, const RealField& a) {
    double m = 0.0;
    for (const auto& c : gradient(g, a)) m = std::max(m, max_abs(c));
    for (const auto& comp : v)
        for (const auto& c : gradient(g, comp)) m = std::max(m, max_abs(c));
    return m;
}

/// Scan one snapshot; returns true and fills `report` when a monitor trips.
inline bool check_breakdown(const SpectralGrid& g, const EulerSnapshot& s, const BreakdownThresholds& th,
                            BreakdownReport& report) {
    bool finite = all_finite(s.a);
    for (const auto& c : s.v) finite = finite && all_finite(c);
    if (!finite) {
        report = {true, s.t, BreakdownCause::nonfinite, report.peak_gradient, report.min_density};
        return true;
    }
    const double grad = max_gradient(g, s.v, s.a);
    double rmin = std::numeric_limits<double>::infinity();
    for (double x : s.a) rmin = std::min(rmin, x * x);
    report.peak_gradient = std::max(report.peak_gradient, grad);
    report.min_density = std::min(report.min_density, rmin);
    if (grad > th.max_gradient) {
        report.triggered = true;
        report.time = s.t;
        report.cause = BreakdownCause::gradient_blowup;
        return true;
    }
    if (th.min_density >= 0.0 && rmin < th.min_density) {
        report.triggered = true;
        report.time = s.t;
        report.cause = BreakdownCause::vacuum_approach;
        return true;
    }
    return false;
}

inline BreakdownReport detect_breakdown(const SpectralGrid& g, const std::vector<EulerSnapshot>& traj,
                                        const BreakdownThresholds& th) {
    BreakdownReport r;
    r.min_density = std::numeric_limits<double>::infinity();
    for (const auto& s : traj)
        if (check_breakdown(g, s, th, r)) return r;
    if (traj.empty()) r.min_density = 0.0;
    return r;
}

struct EulerRun {
    std::vector<EulerSnapshot> snapshots;
    BreakdownReport report;
    /// Max over checked steps of int_{outside} rho / int rho, "outside" being where rho0 == 0.
    double max_leakage = 0.0;
    SymmetricEulerState final_state;
};

/// Euler evolution to time T (or the first monitor trip), checking every step.
inline EulerRun evolve_euler(const SpectralGrid& g, SymmetricEulerState s, double T, double dt,
                             const NonlinearityLaw& law, const BreakdownThresholds& th, int snapshot_every = 0) {
    const int steps = step_count(T, dt);
    EulerSolver solver(g, law);
    EulerRun run;
    run.report.min_density = std::numeric_limits<double>::infinity();
    std::vector<char> outside(s.a.size());
    bool has_outside = false;
    for (std::size_t i = 0; i < s.a.size(); ++i) {
        outside[i] = s.a[i] == 0.0;
        has_outside = has_outside || outside[i];
    }
    auto leakage = [&](const RealField& a) {
        double o = 0.0, tot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            tot += a[i] * a[i];
            if (outside[i]) o += a[i] * a[i];
        }
        return tot > 0.0 ? o / tot : 0.0;
    };
    const double t0 = s.t;
    run.snapshots.push_back({s.t, s.v, s.a});
    for (int k = 0; k <= steps; ++k) {
        if (k > 0) {
            try {
                solver.step(s, dt);
            } catch (const NonFiniteError&) {
                run.report.triggered = true;
                run.report.time = s.t;
                run.report.cause = BreakdownCause::nonfinite;
                break;
            }
            s.t = t0 + k * dt;
        }
        if (check_breakdown(g, {s.t, s.v, s.a}, th, run.report)) break;
        if (has_outside) run.max_leakage = std::max(run.max_leakage, leakage(s.a));
        if (k > 0 && (k == steps || (snapshot_every > 0 && k % snapshot_every == 0)))
            run.snapshots.push_back({s.t, s.v, s.a});
    }
    run.final_state = std::move(s);
    return run;
}

}  // namespace qhdlab
