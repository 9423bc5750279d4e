#pragma once

// Conserved functionals and their flux laws, in wave-function, hydrodynamic
// and Korteweg form.
//
// On the torus the moment functionals (X, F, I, Z, U, A) use the centered
// coordinate and are meaningful only while the deviation from the background
// stays inside the fundamental domain; `support_warning` flags records where
// it reaches the outer 10% of the box. With a nonzero background density the
// mass-like moments use rho - bg and the potential energy uses
// G(r) = F(r) - F(bg) - f(bg)(r - bg), which keeps every integral finite and
// leaves all flux laws intact.

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "grid.hpp"
#include "laws.hpp"
#include "madelung.hpp"

namespace qhdlab {

struct DiagnosticsRecord {
    double t = 0.0;
    double M = 0.0;
    double H = 0.0;
    std::array<double, 2> P{};
    double A = 0.0;
    std::array<double, 2> X{};
    double F = 0.0;
    double I = 0.0;
    double Z = 0.0;
    std::array<double, 2> U{};
    /// S = int(d (P(rho) - P(bg)) - 2 G(rho)) (+ (d/2)(rho kappa)'|grad rho|^2 for Korteweg).
    double virial_source = 0.0;
    double gp_momentum = 0.0;
    std::string representation = "wave";
    bool support_warning = false;
};

struct DiagnosticsOptions {
    double background = 0.0;
    /// Deviation below this fraction of its maximum counts as "outside the support".
    double support_tolerance = 1e-8;
    bool with_gp_momentum = false;
};

namespace detail {

inline bool support_near_boundary(const SpectralGrid& g, const RealField& dev, double rel_tol) {
    const double m = max_abs(dev);
    if (m == 0.0) return false;
    const double edge = 0.4 * g.length();  // |x| beyond 80% of the half-width
    for (int ax = 0; ax < g.dim(); ++ax) {
        const RealField x = g.coordinate(ax);
        for (std::size_t i = 0; i < dev.size(); ++i)
            if (std::abs(x[i]) > edge && std::abs(dev[i]) > rel_tol * m) return true;
    }
    return false;
}

// Fills the rho/current-based entries shared by every representation.
// `j` is the momentum density rho v (= eps Im(conj psi grad psi)).
inline void fill_moments(const SpectralGrid& g, const RealField& rho, const VectorField& j, double t,
                         const NonlinearityLaw& law, const DiagnosticsOptions& o, DiagnosticsRecord& r) {
    const int d = g.dim();
    const double bg = o.background;
    RealField dev(rho.size()), src(rho.size()), r2(rho.size(), 0.0), xj(rho.size(), 0.0);
    std::vector<RealField> x(d);
    for (int ax = 0; ax < d; ++ax) x[ax] = g.coordinate(ax);
    const double pbg = bg == 0.0 ? 0.0 : law.pressure(bg);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        dev[i] = rho[i] - bg;
        src[i] = d * (law.pressure(rho[i]) - pbg) - 2.0 * law.potential(rho[i], bg);
        for (int ax = 0; ax < d; ++ax) {
            r2[i] += x[ax][i] * x[ax][i];
            xj[i] += x[ax][i] * j[ax][i];
        }
    }
    r.t = t;
    r.M = integrate(g, dev);
    for (int ax = 0; ax < d; ++ax) {
        r.P[ax] = integrate(g, j[ax]);
        RealField xd(rho.size());
        for (std::size_t i = 0; i < rho.size(); ++i) xd[i] = x[ax][i] * dev[i];
        r.X[ax] = integrate(g, xd);
        r.U[ax] = r.X[ax] - t * r.P[ax];
    }
    if (d == 2) {
        RealField a(rho.size());
        for (std::size_t i = 0; i < rho.size(); ++i) a[i] = x[0][i] * j[1][i] - x[1][i] * j[0][i];
        r.A = integrate(g, a);
    }
    r.F = integrate(g, xj);
    for (std::size_t i = 0; i < rho.size(); ++i) r2[i] *= 0.5 * dev[i];
    r.I = integrate(g, r2);
    r.virial_source = integrate(g, src);
    r.support_warning = support_near_boundary(g, dev, o.support_tolerance);
}

}  // namespace detail

/// GP momentum via the integrable form 1/2 int(d1 Re psi Im psi - d1 Im psi (Re psi - 1)).
inline double gp_momentum(const SpectralGrid& g, const ComplexField& psi) {
    const RealField re = real_part(psi), im = imag_part(psi);
    const RealField dre = partial(g, re, 0), dim = partial(g, im, 0);
    RealField q(psi.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = 0.5 * (dre[i] * im[i] - dim[i] * (re[i] - 1.0));
    return integrate(g, q);
}

inline DiagnosticsRecord diagnostics_wave(const SpectralGrid& g, const ComplexField& psi, double t, double eps,
                                          const NonlinearityLaw& law, const DiagnosticsOptions& o = {}) {
    g.check(psi.size());
    const int d = g.dim();
    const std::size_t n = psi.size();
    const RealField rho = abs2(psi);
    const ComplexVectorField grad = gradient(g, psi);
    VectorField j(d, RealField(n));
    RealField energy(n), zdens(n);
    std::vector<RealField> x(d);
    for (int ax = 0; ax < d; ++ax) x[ax] = g.coordinate(ax);
    for (std::size_t i = 0; i < n; ++i) {
        double g2 = 0.0;
        double c2 = 0.0;
        for (int ax = 0; ax < d; ++ax) {
            g2 += std::norm(grad[ax][i]);
            j[ax][i] = eps * (std::conj(psi[i]) * grad[ax][i]).imag();
            const Complex c = x[ax][i] * psi[i] + Complex(0.0, eps * t) * grad[ax][i];
            c2 += std::norm(c);
        }
        const double G = law.potential(rho[i], o.background);
        energy[i] = 0.5 * eps * eps * g2 + G;
        zdens[i] = 0.5 * c2 + t * t * G;
    }
    DiagnosticsRecord r;
    r.representation = "wave";
    detail::fill_moments(g, rho, j, t, law, o, r);
    r.H = integrate(g, energy);
    if (o.background == 0.0) {
        // Direct pseudo-conformal integral; its x^2|psi|^2 part diverges on a background.
        r.Z = integrate(g, zdens);
    } else {
        r.Z = t * t * r.H - t * r.F + r.I;
    }
    if (o.with_gp_momentum) r.gp_momentum = gp_momentum(g, psi);
    return r;
}

inline DiagnosticsRecord diagnostics_hydro(const SpectralGrid& g, const RealField& rho, const VectorField& v,
                                           double t, double eps, const NonlinearityLaw& law,
                                           const DiagnosticsOptions& o = {}) {
    g.check(rho.size());
    const int d = g.dim();
    const std::size_t n = rho.size();
    RealField sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = std::sqrt(std::max(0.0, rho[i]));
    const VectorField gs = gradient(g, sq);
    VectorField j(d, RealField(n));
    RealField energy(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v2 = 0.0, g2 = 0.0;
        for (int ax = 0; ax < d; ++ax) {
            j[ax][i] = rho[i] * v[ax][i];
            v2 += v[ax][i] * v[ax][i];
            g2 += gs[ax][i] * gs[ax][i];
        }
        energy[i] = 0.5 * rho[i] * v2 + 0.5 * eps * eps * g2 + law.potential(rho[i], o.background);
    }
    DiagnosticsRecord r;
    r.representation = "hydro";
    detail::fill_moments(g, rho, j, t, law, o, r);
    r.H = integrate(g, energy);
    r.Z = t * t * r.H - t * r.F + r.I;
    return r;
}

inline DiagnosticsRecord diagnostics_korteweg(const SpectralGrid& g, const RealField& rho, const VectorField& v,
                                              double t, const CapillarityLaw& kappa, const NonlinearityLaw& law,
                                              const DiagnosticsOptions& o = {}) {
    g.check(rho.size());
    const int d = g.dim();
    const std::size_t n = rho.size();
    const VectorField gr = gradient(g, rho);
    VectorField j(d, RealField(n));
    RealField energy(n), extra(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v2 = 0.0, g2 = 0.0;
        for (int ax = 0; ax < d; ++ax) {
            j[ax][i] = rho[i] * v[ax][i];
            v2 += v[ax][i] * v[ax][i];
            g2 += gr[ax][i] * gr[ax][i];
        }
        energy[i] = 0.5 * rho[i] * v2 + 0.5 * kappa.kappa(rho[i]) * g2 + law.potential(rho[i], o.background);
        extra[i] = 0.5 * d * kappa.rho_kappa_prime(rho[i]) * g2;
    }
    DiagnosticsRecord r;
    r.representation = "korteweg";
    detail::fill_moments(g, rho, j, t, law, o, r);
    r.H = integrate(g, energy);
    r.virial_source += integrate(g, extra);
    r.Z = t * t * r.H - t * r.F + r.I;
    return r;
}

/// Capillary energy int kappa(rho)/2 |grad rho|^2 on its own.
inline double capillary_energy(const SpectralGrid& g, const RealField& rho, const CapillarityLaw& kappa) {
    const VectorField gr = gradient(g, rho);
    RealField e(rho.size(), 0.0);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        double g2 = 0.0;
        for (const auto& c : gr) g2 += c[i] * c[i];
        e[i] = 0.5 * kappa.kappa(rho[i]) * g2;
    }
    return integrate(g, e);
}

// ---------------------------------------------------------------------------
// Flux laws

struct FluxLawResiduals {
    // Max over interior records of |lhs - rhs|, normalized by the larger of max|lhs|, max|rhs|.
    double X = 0.0;   // dX/dt = P
    double I = 0.0;   // dI/dt = F
    double F = 0.0;   // dF/dt = 2H + S
    double Z = 0.0;   // dZ/dt + t S = 0
    // Same residuals without normalization.
    double X_abs = 0.0, I_abs = 0.0, F_abs = 0.0, Z_abs = 0.0;
};

struct DriftReport {
    double M = 0.0, H = 0.0, P = 0.0, A = 0.0, U = 0.0;  // max relative drift from the first record
    double Z_identity = 0.0;  // max |Z - (t^2 H - t F + I)| / max(|Z|, tiny)
    double U_identity = 0.0;  // max |U - (X - t P)|
};

/// Residuals of the non-constant laws by central differences of records at a uniform cadence.
inline FluxLawResiduals check_flux_laws(const std::vector<DiagnosticsRecord>& rec) {
    FluxLawResiduals out;
    if (rec.size() < 3) throw ValidationError("flux-law check needs at least three records");
    const double h = rec[1].t - rec[0].t;
    if (!(h > 0.0)) throw ValidationError("records must be increasing in time");
    for (std::size_t m = 1; m < rec.size(); ++m)
        if (std::abs((rec[m].t - rec[m - 1].t) - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw ValidationError("flux-law check needs records at a uniform cadence");
    struct Acc {
        double res = 0.0, scale = 0.0;
        void add(double lhs, double rhs) {
            res = std::max(res, std::abs(lhs - rhs));
            scale = std::max({scale, std::abs(lhs), std::abs(rhs)});
        }
        double rel() const { return scale > 0.0 ? res / scale : res; }
    } ax, ai, af, az;
    for (std::size_t m = 1; m + 1 < rec.size(); ++m) {
        const auto& a = rec[m - 1];
        const auto& b = rec[m + 1];
        const auto& c = rec[m];
        const double inv = 1.0 / (2.0 * h);
        for (int k = 0; k < 2; ++k) ax.add((b.X[k] - a.X[k]) * inv, c.P[k]);
        ai.add((b.I - a.I) * inv, c.F);
        af.add((b.F - a.F) * inv, 2.0 * c.H + c.virial_source);
        az.add((b.Z - a.Z) * inv, -c.t * c.virial_source);
    }
    out.X = ax.rel();
    out.I = ai.rel();
    out.F = af.rel();
    out.Z = az.rel();
    out.X_abs = ax.res;
    out.I_abs = ai.res;
    out.F_abs = af.res;
    out.Z_abs = az.res;
    return out;
}

inline DriftReport conservation_drift(const std::vector<DiagnosticsRecord>& rec) {
    DriftReport d;
    if (rec.empty()) return d;
    const auto& r0 = rec.front();
    auto rel = [](double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); };
    const double pscale = std::max({std::hypot(r0.P[0], r0.P[1]), std::abs(r0.M), 1e-300});
    const double uscale = std::max({std::hypot(r0.U[0], r0.U[1]), std::abs(r0.M), 1e-300});
    const double ascale = std::max(std::abs(r0.A), std::abs(r0.M));
    for (const auto& r : rec) {
        d.M = std::max(d.M, rel(r.M, r0.M, std::abs(r0.M)));
        d.H = std::max(d.H, rel(r.H, r0.H, std::abs(r0.H)));
        d.P = std::max(d.P, std::hypot(r.P[0] - r0.P[0], r.P[1] - r0.P[1]) / pscale);
        d.U = std::max(d.U, std::hypot(r.U[0] - r0.U[0], r.U[1] - r0.U[1]) / uscale);
        d.A = std::max(d.A, rel(r.A, r0.A, ascale));
        const double zid = r.t * r.t * r.H - r.t * r.F + r.I;
        d.Z_identity = std::max(d.Z_identity, std::abs(r.Z - zid) / std::max(std::abs(r.Z), 1e-300));
        d.U_identity = std::max(d.U_identity, std::max(std::abs(r.U[0] - (r.X[0] - r.t * r.P[0])),
                                                       std::abs(r.U[1] - (r.X[1] - r.t * r.P[1]))));
    }
    return d;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* diagnostics_csv_header() {
    return "t,M,H,Px,Py,A,Xx,Xy,F,I,Z,Ux,Uy,virial_source,gp_momentum";
}

inline void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& rec) {
    os << diagnostics_csv_header() << '\n';
    const auto old = os.precision(17);
    for (const auto& r : rec) {
        os << r.t << ',' << r.M << ',' << r.H << ',' << r.P[0] << ',' << r.P[1] << ',' << r.A << ',' << r.X[0]
           << ',' << r.X[1] << ',' << r.F << ',' << r.I << ',' << r.Z << ',' << r.U[0] << ',' << r.U[1] << ','
           << r.virial_source << ',' << r.gp_momentum << '\n';
    }
    os.precision(old);
}

}  // namespace qhdlab
