#pragma once

// Canned verification suites with fixed configurations and thresholds. The
// command-line `verify` subcommand and the acceptance binary both run these;
// every check carries the number of the acceptance criterion it belongs to
// (0 for supplementary checks).

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "asymptotics.hpp"
#include "conserved.hpp"
#include "data.hpp"
#include "hydro.hpp"
#include "madelung.hpp"
#include "schrodinger.hpp"
#include "weakqhd.hpp"

namespace qhdlab {

struct SuiteCheck {
    int criterion = 0;
    std::string name;
    double value = 0.0;
    std::string relation;  // "<", ">=", "in", "true"
    double lo = 0.0, hi = 0.0;
    bool pass = false;
};

struct SuiteTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct SuiteReport {
    std::string suite;
    std::vector<SuiteCheck> checks;
    std::vector<SuiteTable> tables;
    double seconds = 0.0;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    void less(int crit, std::string name, double v, double bound) {
        checks.push_back({crit, std::move(name), v, "<", 0.0, bound, v < bound});
    }
    void at_least(int crit, std::string name, double v, double bound) {
        checks.push_back({crit, std::move(name), v, ">=", bound, 0.0, v >= bound});
    }
    void within(int crit, std::string name, double v, double lo, double hi) {
        checks.push_back({crit, std::move(name), v, "in", lo, hi, v >= lo && v <= hi});
    }
    void holds(int crit, std::string name, bool ok) {
        checks.push_back({crit, std::move(name), ok ? 1.0 : 0.0, "true", 0.0, 0.0, ok});
    }
};

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"conservation", "identities", "euler_limit", "wave_approx",
                                                   "dispersion",   "kdv",        "weakqhd",     "korteweg"};
    return names;
}

namespace detail {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Slope of log(res) against log(h).
inline double observed_order(const std::vector<double>& h, const std::vector<double>& res) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < h.size(); ++i) {
        lx.push_back(std::log(h[i]));
        ly.push_back(std::log(std::max(res[i], 1e-300)));
    }
    return linear_fit(lx, ly).slope;
}

template <class T>
std::vector<T> every_nth(const std::vector<T>& v, std::size_t stride) {
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(v[i]);
    return out;
}

inline std::vector<DiagnosticsRecord> wave_records(const SpectralGrid& g, const ComplexField& psi0, double eps,
                                                   const NonlinearityLaw& law, double T, double dt,
                                                   int observe_every, const DiagnosticsOptions& o = {}) {
    std::vector<DiagnosticsRecord> rec;
    EvolveOptions eo;
    eo.observe_every = observe_every;
    eo.snapshot_every = 0;
    eo.observers.push_back(
        [&](const SchrodingerState& s) { rec.push_back(diagnostics_wave(g, s.psi, s.t, eps, law, o)); });
    evolve({psi0, 0.0, eps}, T, dt, law, g, eo);
    return rec;
}

/// Asymmetric 2D packet with nonzero momentum and angular momentum.
inline ComplexField packet_2d(const SpectralGrid& g, double eps) {
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double r2 = x[i] * x[i] + 0.5 * y[i] * y[i];
        psi[i] = std::exp(-r2) * (1.0 + 0.3 * Complex(x[i], y[i])) *
                 std::polar(1.0, (0.4 * x[i] + 0.2 * x[i] * y[i]) / eps);
    }
    return psi;
}

struct FluxOrders {
    std::vector<double> h;
    std::vector<FluxLawResiduals> res;
};

inline FluxOrders flux_orders(const std::vector<DiagnosticsRecord>& rec, const std::vector<std::size_t>& strides) {
    FluxOrders f;
    for (std::size_t s : strides) {
        const auto sub = every_nth(rec, s);
        f.h.push_back(sub[1].t - sub[0].t);
        f.res.push_back(check_flux_laws(sub));
    }
    return f;
}

inline SuiteTable flux_table(const FluxOrders& f) {
    SuiteTable t{"flux_law_residuals", {"h", "X", "I", "F", "Z"}, {}};
    for (std::size_t i = 0; i < f.h.size(); ++i)
        t.rows.push_back({f.h[i], f.res[i].X, f.res[i].I, f.res[i].F, f.res[i].Z});
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conservation: cubic NLS invariants (criterion 1) and flux laws (criterion 2)

inline SuiteReport verify_conservation() {
    detail::Stopwatch clock;
    SuiteReport rep{"conservation", {}, {}, 0.0};
    const double eps = 0.5;
    const auto law = NonlinearityLaw::cubic();
    const SpectralGrid g(1, 512, 40.0);
    DataParams p;
    p.k0 = 0.5;
    p.chirp = 0.3;
    const ComplexField psi0 = wave_data(g, "gaussian_packet", eps, p);

    const auto r1 = detail::wave_records(g, psi0, eps, law, 1.0, 1e-3, 10);
    const auto r2 = detail::wave_records(g, psi0, eps, law, 1.0, 5e-4, 20);
    const DriftReport d1 = conservation_drift(r1), d2 = conservation_drift(r2);
    rep.less(1, "1D mass drift (rel)", d1.M, 1e-10);
    rep.less(1, "1D energy drift (rel), dt = 1e-3", d1.H, 1e-6);
    rep.within(1, "energy drift ratio dt / (dt/2)", d1.H / d2.H, 3.5, 4.5);
    rep.less(1, "1D momentum drift (rel)", d1.P, 1e-8);
    rep.less(1, "1D U drift (rel)", d1.U, 1e-8);
    rep.less(1, "1D Z = t^2 H - t F + I (rel)", d1.Z_identity, 1e-10);
    rep.less(1, "1D U = X - t P (abs)", d1.U_identity, 1e-12);

    // 2D cubic is the pseudo-conformal (critical) case: Z itself is conserved.
    const SpectralGrid g2(2, 128, 20.0);
    const auto r2d = detail::wave_records(g2, detail::packet_2d(g2, eps), eps, law, 1.0, 1e-3, 20);
    const DriftReport d2d = conservation_drift(r2d);
    double zdrift = 0.0;
    for (const auto& r : r2d) zdrift = std::max(zdrift, std::abs(r.Z - r2d[0].Z) / std::abs(r2d[0].Z));
    rep.less(1, "2D mass drift (rel)", d2d.M, 1e-10);
    rep.less(1, "2D momentum drift (rel)", d2d.P, 1e-8);
    rep.less(1, "2D angular momentum drift (rel)", d2d.A, 1e-8);
    rep.less(1, "2D U drift (rel)", d2d.U, 1e-8);
    rep.less(1, "2D Z = t^2 H - t F + I (rel)", d2d.Z_identity, 1e-10);
    rep.less(2, "2D cubic Z drift (rel)", zdrift, 1e-6);

    // Flux laws: one fine run, coarser observation spacings by subsampling.
    const auto rf = detail::wave_records(g, psi0, eps, law, 1.0, 1e-4, 10);
    const auto fo = detail::flux_orders(rf, {1, 2, 4, 8});
    rep.tables.push_back(detail::flux_table(fo));
    std::vector<double> rx, ri, rF, rz;
    for (const auto& r : fo.res) {
        rx.push_back(r.X);
        ri.push_back(r.I);
        rF.push_back(r.F);
        rz.push_back(r.Z);
    }
    // X is exactly linear in t under the split-step flow (the nonlinear substep leaves |psi| and
    // hence X fixed, the linear substep moves X by dt P), so its residual sits at rounding level.
    const double xmax = *std::max_element(rx.begin(), rx.end());
    if (xmax < 1e-9)
        rep.less(2, "dX/dt = P residual (exact for the scheme)", xmax, 1e-9);
    else
        rep.within(2, "dX/dt = P residual order", detail::observed_order(fo.h, rx), 1.7, 2.3);
    rep.within(2, "dI/dt = F residual order", detail::observed_order(fo.h, ri), 1.7, 2.3);
    rep.within(2, "dF/dt = 2H + int(dP - 2F) residual order", detail::observed_order(fo.h, rF), 1.7, 2.3);
    rep.within(2, "dZ/dt + t int(dP - 2F) = 0 residual order", detail::observed_order(fo.h, rz), 1.7, 2.3);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// identities: NLS + Madelung against the extended QHD system (criterion 4)

/// L2 distance of the hydrodynamic fields at t = 0.25 (eps = 0.5, cubic law) between the two routes.
inline double cross_formulation_error(int n, double dt, double T = 0.25) {
    const double eps = 0.5;
    const auto law = NonlinearityLaw::cubic();
    const SpectralGrid g(1, n, 8.0 * std::numbers::pi);
    RealField rho(n), phi(n);
    VectorField v(1, RealField(n));
    for (int i = 0; i < n; ++i) {
        const double x = g.coordinate_1d(i);
        rho[i] = 1.0 + 0.3 * std::exp(-x * x);
        phi[i] = 0.2 * std::exp(-0.5 * x * x);
        v[0][i] = -0.2 * x * std::exp(-0.5 * x * x);
    }
    const int steps = step_count(T, dt);
    SchrodingerState s{from_hydro(rho, phi, eps), 0.0, eps};
    SchrodingerSolver nls(g, law);
    ExtendedState e = extended_vars_qhd(g, rho, v, eps, 1e-4);
    QhdExtendedSolver qhd(g, law, 1e-4);
    for (int k = 0; k < steps; ++k) {
        nls.step(s, dt);
        qhd.step(e, dt);
    }
    const HydroState h = to_hydro(g, s.psi, eps, 1e-8);
    return l2_distance(g, h.rho, e.rho) + l2_distance(g, h.v[0], real_part(e.z[0]));
}

inline SuiteReport verify_identities() {
    detail::Stopwatch clock;
    SuiteReport rep{"identities", {}, {}, 0.0};
    const std::vector<std::pair<int, double>> ladder = {{128, 0.01}, {256, 0.005}, {512, 0.0025}};
    std::vector<double> dts, errs;
    SuiteTable t{"cross_formulation", {"n", "dt", "error"}, {}};
    for (auto [n, dt] : ladder) {
        dts.push_back(dt);
        errs.push_back(cross_formulation_error(n, dt));
        t.rows.push_back({double(n), dt, errs.back()});
    }
    rep.tables.push_back(t);
    rep.less(4, "NLS vs extended QHD at t = 0.25, n = 512", errs.back(), 1e-5);
    rep.at_least(4, "error order under simultaneous (dx, dt) refinement", detail::observed_order(dts, errs), 2.0);

    // Pointwise identities on the final NLS state of a smooth run.
    const SpectralGrid g(1, 256, 8.0 * std::numbers::pi);
    DataParams p;
    p.amplitude = 0.3;
    p.phase_amplitude = 0.2;
    const ComplexField psi = wave_data(g, "density_bump", 0.5, p);
    rep.less(0, "|grad psi|^2 = |grad sqrt rho|^2 + |Lambda|^2", modulus_identity_residual(g, psi), 1e-10);
    const HydroState h = to_hydro(g, psi, 0.5, 1e-8);
    RealField phase(g.size());
    {
        // phase = eps * arg(psi), continuous for this data
        for (std::size_t i = 0; i < g.size(); ++i) phase[i] = 0.5 * std::arg(psi[i]);
    }
    const ComplexField back = from_hydro(h.rho, phase, 0.5);
    rep.less(0, "from_hydro(to_hydro(psi)) roundtrip", max_abs([&] {
                 ComplexField d(psi.size());
                 for (std::size_t i = 0; i < d.size(); ++i) d[i] = back[i] - psi[i];
                 return d;
             }()),
             1e-12);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// korteweg (criterion 3)

inline std::vector<DiagnosticsRecord> korteweg_records(const CapillarityLaw& kappa, double dt, int observe_every,
                                                       double T, bool virial_extra = true) {
    const SpectralGrid g(1, 256, 20.0);
    const auto law = NonlinearityLaw::cubic();
    DataParams p;
    p.amplitude = 0.2;
    p.velocity = 0.3;
    HydroData d = hydro_data(g, "density_bump", p);
    for (std::size_t i = 0; i < g.size(); ++i) d.v[0][i] *= 1.0 + g.coordinate_1d(static_cast<int>(i));
    ExtendedState s = extended_vars_korteweg(g, d.rho, d.v, kappa, 1e-4);
    KortewegSolver solver(g, law, kappa, 1e-4);
    DiagnosticsOptions o;
    o.background = 1.0;
    std::vector<DiagnosticsRecord> rec;
    const int steps = step_count(T, dt);
    for (int k = 0; k <= steps; ++k) {
        if (k % observe_every == 0) {
            rec.push_back(diagnostics_korteweg(g, s.rho, {real_part(s.z[0])}, s.t, kappa, law, o));
            if (!virial_extra) {
                const VectorField gr = gradient(g, s.rho);
                RealField extra(g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    extra[i] = 0.5 * kappa.rho_kappa_prime(s.rho[i]) * gr[0][i] * gr[0][i];
                rec.back().virial_source -= integrate(g, extra);
            }
        }
        if (k < steps) solver.step(s, dt);
    }
    return rec;
}

inline SuiteReport verify_korteweg() {
    detail::Stopwatch clock;
    SuiteReport rep{"korteweg", {}, {}, 0.0};
    const auto kappa = CapillarityLaw::constant(0.01);
    const auto rec = korteweg_records(kappa, 0.0025, 1, 0.5);
    const DriftReport d = conservation_drift(rec);
    rep.less(3, "kappa = 0.01 energy drift over T = 0.5 (rel)", d.H, 1e-6);
    const auto fo = detail::flux_orders(rec, {4, 8, 16, 32});
    rep.tables.push_back(detail::flux_table(fo));
    std::vector<double> rF;
    for (const auto& r : fo.res) rF.push_back(r.F);
    rep.within(3, "Korteweg virial law residual order", detail::observed_order(fo.h, rF), 1.7, 2.3);

    // Without the (d/2)(rho kappa)'|grad rho|^2 term the virial residual does not converge.
    const auto bad = korteweg_records(kappa, 0.0025, 1, 0.5, false);
    const auto fb = detail::flux_orders(bad, {4, 8, 16, 32});
    rep.at_least(0, "virial residual without the capillary term stays O(1) (ratio to correct law)",
                 fb.res.front().F / fo.res.front().F, 10.0);

    // kappa = eps^2/(4 rho) against the extended QHD solver.
    const double eps = 0.5;
    const SpectralGrid g(1, 128, 20.0);
    const auto law = NonlinearityLaw::cubic();
    DataParams p;
    p.amplitude = 0.2;
    p.velocity = 0.3;
    HydroData hd = hydro_data(g, "density_bump", p);
    for (std::size_t i = 0; i < g.size(); ++i) hd.v[0][i] *= g.coordinate_1d(static_cast<int>(i));
    ExtendedState a = extended_vars_qhd(g, hd.rho, hd.v, eps, 1e-4);
    ExtendedState b = extended_vars_korteweg(g, hd.rho, hd.v, CapillarityLaw::quantum(eps), 1e-4);
    QhdExtendedSolver q(g, law, 1e-4);
    KortewegSolver k(g, law, CapillarityLaw::quantum(eps), 1e-4);
    const double dt = 0.0025;
    for (int i = 0, n = step_count(0.5, dt); i < n; ++i) {
        q.step(a, dt);
        k.step(b, dt);
    }
    rep.less(3, "kappa = eps^2/(4 rho) trajectory vs extended QHD",
             l2_distance(g, a.rho, b.rho) + l2_distance(g, a.z[0], b.z[0]), 1e-8);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// dispersion (criterion 5)

inline SuiteReport verify_dispersion() {
    detail::Stopwatch clock;
    SuiteReport rep{"dispersion", {}, {}, 0.0};
    SuiteTable t3{"semiclassical", {"eps", "k", "omega_measured", "omega_exact", "rel_error"}, {}};
    double worst = 0.0;
    for (double eps : {0.5, 1.0, 2.0})
        for (const auto& r : dispersion_check(eps, {1.0, 2.0, 4.0}, DispersionNormalization::semiclassical)) {
            t3.rows.push_back({r.eps, r.k, r.omega_measured, r.omega_exact, r.rel_error});
            worst = std::max(worst, r.rel_error);
        }
    rep.less(5, "omega^2 = k^2 (1 + eps^2 k^2/4), max rel error", worst, 1e-3);
    SuiteTable t4{"gross_pitaevskii", {"k", "omega_measured", "omega_exact", "rel_error", "phase_speed"}, {}};
    double worst4 = 0.0;
    const auto rows = dispersion_check(1.0, {0.4, 0.2, 0.1, 0.05}, DispersionNormalization::gross_pitaevskii);
    for (const auto& r : rows) {
        t4.rows.push_back({r.k, r.omega_measured, r.omega_exact, r.rel_error, r.phase_speed});
        worst4 = std::max(worst4, r.rel_error);
    }
    rep.tables.push_back(t3);
    rep.tables.push_back(t4);
    rep.less(5, "omega^2 = 2k^2 + k^4, max rel error", worst4, 1e-3);
    const double cs = rows.back().phase_speed;
    rep.less(5, "phase speed at k = 0.05 vs sqrt(2) (rel)", std::abs(cs - std::sqrt(2.0)) / std::sqrt(2.0), 1e-2);
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i)
        monotone = monotone && std::abs(rows[i].phase_speed - std::sqrt(2.0)) <=
                                   std::abs(rows[i - 1].phase_speed - std::sqrt(2.0));
    rep.holds(5, "phase speed approaches sqrt(2) monotonically as k -> 0", monotone);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// euler_limit (criterion 6) and Euler breakdown (criterion 10)

struct BreakdownProbe {
    BreakdownReport report;
    double leakage = 0.0;
    double initial_gradient = 0.0;
};

/// Compactly supported (v, sqrt rho) on vacuum, compressive velocity. The gradient threshold is
/// ten times the initial W^{1,inf} size, reached while the steepening front is still resolved.
inline BreakdownProbe euler_compact_breakdown(int n = 2048, double length = 12.0) {
    const SpectralGrid g(1, n, length);
    DataParams p;
    p.amplitude = 0.3;
    p.width = 4.0;
    p.k0 = 0.5;
    const HydroData d = hydro_data(g, "compact_bump", p);
    SymmetricEulerState s;
    s.v = d.v;
    s.a.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s.a[i] = std::sqrt(d.rho[i]);
    BreakdownProbe out;
    out.initial_gradient = max_gradient(g, s.v, s.a);
    BreakdownThresholds th;
    th.max_gradient = 10.0 * out.initial_gradient;
    const EulerSolver solver(g, NonlinearityLaw::cubic());
    const double dt_max = 0.25 * solver.cfl_limit(s);
    const double T = 10.0;
    const double dt = T / tile_steps(T, dt_max);
    const EulerRun run = evolve_euler(g, s, T, dt, NonlinearityLaw::cubic(), th);
    out.report = run.report;
    out.leakage = run.max_leakage;
    return out;
}

inline SuiteReport verify_euler_limit() {
    detail::Stopwatch clock;
    SuiteReport rep{"euler_limit", {}, {}, 0.0};
    const EulerLimitConfig c;
    const EulerLimitResult r = euler_limit_error(c);
    SuiteTable t{"euler_limit", {"eps", "density_error", "velocity_error", "total"}, {}};
    bool monotone = true;
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        t.rows.push_back({c.eps[i], r.density_error[i], r.velocity_error[i], r.total.error[i]});
        if (i > 0) monotone = monotone && r.total.error[i] < r.total.error[i - 1];
    }
    rep.tables.push_back(t);
    rep.at_least(6, "total error order in eps", r.total.slope, 1.0);
    rep.at_least(6, "density error order in eps", r.density.slope, 1.7);
    rep.holds(6, "errors decrease monotonically in eps", monotone);

    const BreakdownProbe b = euler_compact_breakdown();
    rep.holds(10, "compact Euler data triggers gradient_blowup",
              b.report.triggered && b.report.cause == BreakdownCause::gradient_blowup);
    rep.less(10, "mass leakage outside the initial support until the trigger", b.leakage, 1e-8);
    rep.tables.push_back({"breakdown", {"time", "peak_gradient", "initial_gradient", "leakage"},
                          {{b.report.time, b.report.peak_gradient, b.initial_gradient, b.leakage}}});
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// wave_approx (criterion 7)

inline SuiteReport verify_wave_approx() {
    detail::Stopwatch clock;
    SuiteReport rep{"wave_approx", {}, {}, 0.0};
    const WaveApproxResult r = wave_approx_error(WaveApproxConfig{});
    SuiteTable t{"cells", {"t", "amplitude", "eps", "error", "shape"}, {}};
    for (const auto& c : r.cells) t.rows.push_back({c.t, c.amplitude, c.eps, c.error, c.shape});
    rep.tables.push_back(t);
    rep.at_least(7, "grid cells", static_cast<double>(r.cells.size()), 12.0);
    rep.at_least(7, "R^2 of error ~ C (t A^2 + eps^2 t A)", r.r2, 0.9);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// kdv (criterion 8)

/// L2 shape error of the c = 1 soliton after tau = 1.
inline double kdv_soliton_error(KdvDirection dir, int n = 256, double length = 64.0, double dtau = 1e-3) {
    const SpectralGrid g(1, n, length);
    const auto traj = kdv_evolve(g, kdv_soliton(g, 1.0, 0.0, 0.0, dir), 1.0, dtau, dir);
    return l2_distance(g, traj.back().u, kdv_soliton(g, 1.0, 1.0, 0.0, dir));
}

inline SuiteReport verify_kdv(const TransonicConfig& cfg = {}) {
    detail::Stopwatch clock;
    SuiteReport rep{"kdv", {}, {}, 0.0};
    rep.less(8, "KdV soliton shape error at tau = 1 (left)", kdv_soliton_error(KdvDirection::left), 1e-6);
    rep.less(8, "KdV soliton shape error at tau = 1 (right)", kdv_soliton_error(KdvDirection::right), 1e-6);

    const TransonicResult r = transonic_kdv_error(cfg);
    SuiteTable t{"transonic", {"eps", "n", "error_minus", "error_plus", "total"}, {}};
    std::vector<double> le, lr;
    for (const auto& run : r.runs) {
        const double tot = run.err_minus.back() + run.err_plus.back();
        t.rows.push_back({run.eps, double(run.n), run.err_minus.back(), run.err_plus.back(), tot});
        if (run.eps >= 0.1 - 1e-12) {
            le.push_back(std::log(run.eps));
            lr.push_back(std::log(tot));
        }
    }
    rep.tables.push_back(t);
    rep.within(8, "order of ||U - KdV|| in eps (OrderFit)", r.fit.slope, 1.7, 2.3);
    if (le.size() >= 2) rep.within(8, "order over eps in [0.1, 0.3]", linear_fit(le, lr).slope, 1.7, 2.3);

    // Growth along tau at the smallest eps: exp(K tau) envelope with a finite exponent.
    const auto& last = r.runs.back();
    std::vector<double> lg;
    for (std::size_t j = 0; j < last.taus.size(); ++j) lg.push_back(std::log(last.err_minus[j] + last.err_plus[j]));
    const double K = linear_fit(last.taus, lg).slope;
    rep.less(0, "tau-growth exponent of the error at the smallest eps", std::abs(K), 10.0);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& run : r.runs) margin = std::min(margin, run.vacuum_margin);
    rep.at_least(0, "GP density stays away from vacuum (min |psi|^2)", margin, 0.5);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// weakqhd (criterion 9)

struct WeakTolerances {
    double continuity = 1e-5;
    double momentum = 1e-5;
    double curl = 1e-6;
    double energy = 1e-4;
};

struct WeakRunResult {
    WeakResidual continuity, momentum;
    double curl = 0.0;  // max over snapshots of the relative pointwise residual (d = 2)
    double energy = 0.0;
    double modulus = 0.0;
    double min_density = 0.0;
};

inline WeakRunResult weak_run(const SpectralGrid& g, const ComplexField& psi0, double T = 1.0, double dt = 0.005,
                              unsigned seed = 7) {
    const auto law = NonlinearityLaw::gross_pitaevskii();
    validate_weak_law(law, g.dim());
    EvolveOptions o;
    o.snapshot_every = 1;
    const Trajectory tr = evolve({psi0, 0.0, 1.0}, T, dt, law, g, o);
    const TestFunctionSet tests(g, tr.front().t, tr.back().t, seed);
    WeakRunResult r;
    r.continuity = weak_residual_continuity(g, tr, 1.0, tests);
    r.momentum = weak_residual_momentum(g, tr, 1.0, law, tests);
    r.energy = energy_equality_check(g, tr, 1.0, law, 1.0);
    r.min_density = std::numeric_limits<double>::infinity();
    for (const auto& s : tr) {
        r.modulus = std::max(r.modulus, modulus_identity_residual(g, s.psi));
        r.min_density = std::min(r.min_density, min_value(abs2(s.psi)));
        if (g.dim() == 2) {
            const CurlResidual c = curl_constraint_residual(g, s.psi);
            r.curl = std::max(r.curl, c.max_lhs > 0.0 ? c.max_residual / c.max_lhs : c.max_residual);
        }
    }
    return r;
}

inline SuiteReport verify_weakqhd(const WeakTolerances& tol = {}) {
    detail::Stopwatch clock;
    SuiteReport rep{"weakqhd", {}, {}, 0.0};
    DataParams p;
    p.amplitude = 0.3;
    p.phase_amplitude = 0.5;
    const SpectralGrid g1(1, 256, 32.0), g2(2, 256, 32.0);
    const WeakRunResult smooth = weak_run(g1, wave_data(g1, "density_bump", 1.0, p));
    DataParams q;
    q.separation = 4.0;
    const WeakRunResult vortex = weak_run(g2, wave_data(g2, "vortex_pair", 1.0, q));
    // Smooth 2D reference for the curl constraint (vacuous in 1D).
    const SpectralGrid g2s(2, 256, 32.0);
    ComplexField s2(g2s.size());
    {
        const RealField x = g2s.coordinate(0), y = g2s.coordinate(1);
        for (std::size_t i = 0; i < s2.size(); ++i)
            s2[i] = std::sqrt(1.0 + 0.3 * std::exp(-(x[i] - 1.0) * (x[i] - 1.0) - y[i] * y[i])) *
                    std::polar(1.0, 0.5 * std::exp(-x[i] * x[i] - (y[i] - 1.0) * (y[i] - 1.0)));
    }
    const CurlResidual cs = curl_constraint_residual(g2s, s2);

    SuiteTable t{"weak_residuals", {"run", "continuity", "momentum", "curl", "energy", "modulus", "min_rho"}, {}};
    t.rows.push_back({1.0, smooth.continuity.relative(), smooth.momentum.relative(), cs.max_residual / cs.max_lhs,
                      smooth.energy, smooth.modulus, smooth.min_density});
    t.rows.push_back({2.0, vortex.continuity.relative(), vortex.momentum.relative(), vortex.curl, vortex.energy,
                      vortex.modulus, vortex.min_density});
    rep.tables.push_back(t);
    for (const auto& [tag, r] : {std::pair{"smooth 1D", &smooth}, std::pair{"2D vortex pair", &vortex}}) {
        rep.less(9, std::string(tag) + ": continuity residual", r->continuity.relative(), tol.continuity);
        rep.less(9, std::string(tag) + ": momentum residual", r->momentum.relative(), tol.momentum);
        rep.less(9, std::string(tag) + ": energy equality drift", r->energy, tol.energy);
        rep.less(9, std::string(tag) + ": modulus identity", r->modulus, 1e-10);
    }
    rep.less(9, "smooth 2D: curl constraint", cs.max_residual / cs.max_lhs, tol.curl);
    rep.less(9, "2D vortex pair: curl constraint", vortex.curl, tol.curl);
    rep.less(0, "2D vortex pair carries near-vacuum cores (min |psi|^2)", vortex.min_density, 0.05);

    // Black soliton stationarity.
    const SpectralGrid gs(1, 512, 40.0);
    const ComplexField b0 = black_soliton_pair(gs);
    const Trajectory bt = evolve({b0, 0.0, 1.0}, 1.0, 1e-3, NonlinearityLaw::gross_pitaevskii(), gs,
                                 EvolveOptions{1, 0, {}});
    ComplexField diff(b0.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = bt.back().psi[i] - b0[i];
    rep.less(9, "black soliton ||psi(1) - psi(0)||_inf", max_abs(diff), 1e-6);
    rep.seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------

inline SuiteReport run_suite(const std::string& name) {
    if (name == "conservation") return verify_conservation();
    if (name == "identities") return verify_identities();
    if (name == "euler_limit") return verify_euler_limit();
    if (name == "wave_approx") return verify_wave_approx();
    if (name == "dispersion") return verify_dispersion();
    if (name == "kdv") return verify_kdv();
    if (name == "weakqhd") return verify_weakqhd();
    if (name == "korteweg") return verify_korteweg();
    throw ValidationError("unknown suite '" + name + "'");
}

}  // namespace qhdlab
