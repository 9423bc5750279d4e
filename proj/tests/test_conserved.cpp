#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qhdlab/conserved.hpp"
#include "qhdlab/hydro.hpp"
#include "qhdlab/schrodinger.hpp"

using namespace qhdlab;
constexpr double pi = std::numbers::pi;

namespace {

ComplexField sample(const SpectralGrid& g, auto&& f) {
    const RealField x = g.coordinate(0);
    ComplexField out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
    return out;
}

// Diagnostics recorded every step of a Strang run.
std::vector<DiagnosticsRecord> nls_records(const SpectralGrid& g, const ComplexField& psi0, double eps, double T,
                                           double dt) {
    const NonlinearityLaw law = NonlinearityLaw::cubic();
    std::vector<DiagnosticsRecord> rec;
    EvolveOptions opts;
    opts.snapshot_every = 0;
    opts.observers.push_back(
        [&](const SchrodingerState& s) { rec.push_back(diagnostics_wave(g, s.psi, s.t, eps, law)); });
    evolve({psi0, 0.0, eps}, T, dt, law, g, opts);
    return rec;
}

std::vector<DiagnosticsRecord> stride(const std::vector<DiagnosticsRecord>& rec, std::size_t s) {
    std::vector<DiagnosticsRecord> out;
    for (std::size_t i = 0; i < rec.size(); i += s) out.push_back(rec[i]);
    return out;
}

ComplexField packet(const SpectralGrid& g, double eps) {
    return sample(g, [eps](double x) {
        return std::exp(-(x - 0.5) * (x - 0.5)) * std::polar(1.0, (0.7 * x + 0.2 * x * x) / eps);
    });
}

}  // namespace

TEST(DiagnosticsWave, GaussianMass) {
    const SpectralGrid g(1, 128, 20.0);
    const auto r = diagnostics_wave(g, sample(g, [](double x) { return std::exp(-x * x); }), 0.0, 1.0,
                                    NonlinearityLaw::cubic());
    EXPECT_NEAR(r.M, std::sqrt(pi / 2), 1e-13);
    // int (1/2)|psi'|^2 + (1/2)|psi|^4 = (1/2) sqrt(pi/2) + (1/2) sqrt(pi)/2
    EXPECT_NEAR(r.H, 0.5 * std::sqrt(pi / 2) + 0.25 * std::sqrt(pi), 1e-12);
    EXPECT_EQ(r.representation, "wave");
}

TEST(DiagnosticsWave, RealFieldHasNoMomentumOrVirialFlux) {
    const SpectralGrid g(1, 128, 20.0);
    const auto r = diagnostics_wave(g, sample(g, [](double x) { return std::exp(-(x - 1) * (x - 1)) * (1 + x); }),
                                    0.3, 0.5, NonlinearityLaw::cubic());
    EXPECT_NEAR(r.P[0], 0.0, 1e-14);
    EXPECT_NEAR(r.F, 0.0, 1e-14);
}

TEST(DiagnosticsWave, EvenRealFieldHasNoFirstMoment) {
    const SpectralGrid g(2, 64, 16.0);
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::exp(-x[i] * x[i] - 0.5 * y[i] * y[i]) * (1 + x[i] * x[i]);
    const auto r = diagnostics_wave(g, psi, 0.7, 1.0, NonlinearityLaw::cubic());
    for (int ax = 0; ax < 2; ++ax) {
        EXPECT_NEAR(r.X[ax], 0.0, 1e-14);
        EXPECT_NEAR(r.U[ax], 0.0, 1e-14);
    }
    EXPECT_NEAR(r.A, 0.0, 1e-14);
}

TEST(DiagnosticsWave, SupportMonitorWarnsNearBoundary) {
    const SpectralGrid g(1, 128, 20.0);
    const auto law = NonlinearityLaw::cubic();
    EXPECT_FALSE(diagnostics_wave(g, sample(g, [](double x) { return std::exp(-x * x); }), 0, 1, law).support_warning);
    EXPECT_TRUE(diagnostics_wave(g, sample(g, [](double x) { return std::exp(-0.05 * x * x); }), 0, 1, law)
                    .support_warning);
}

TEST(DiagnosticsHydro, BackgroundStateIsZero) {
    const SpectralGrid g(1, 64, 10.0);
    DiagnosticsOptions o;
    o.background = 1.0;
    const auto r = diagnostics_hydro(g, RealField(g.size(), 1.0), VectorField(1, RealField(g.size())), 0.0, 1.0,
                                     NonlinearityLaw::gross_pitaevskii(), o);
    EXPECT_EQ(r.P[0], 0.0);
    EXPECT_EQ(r.F, 0.0);
    EXPECT_EQ(r.M, 0.0);
    EXPECT_NEAR(r.H, 0.0, 1e-15);
}

TEST(DiagnosticsHydro, MatchesWaveRepresentation) {
    const double eps = 0.6;
    for (int dim : {1, 2}) {
        const SpectralGrid g(dim, dim == 1 ? 256 : 64, 16.0);
        std::vector<RealField> x;
        for (int ax = 0; ax < dim; ++ax) x.push_back(g.coordinate(ax));
        ComplexField psi(g.size());
        for (std::size_t i = 0; i < psi.size(); ++i) {
            double r2 = 0.0;
            for (int ax = 0; ax < dim; ++ax) r2 += x[ax][i] * x[ax][i];
            const double e = std::exp(-r2);
            psi[i] = std::polar(std::sqrt(1.0 + 0.3 * e), (0.5 * e + 0.2 * x[0][i] * e) / eps);
        }
        DiagnosticsOptions o;
        o.background = 1.0;
        const auto law = NonlinearityLaw::gross_pitaevskii();
        const auto w = diagnostics_wave(g, psi, 0.4, eps, law, o);
        const HydroState h = to_hydro(g, psi, eps, 1e-8);
        const auto r = diagnostics_hydro(g, h.rho, h.v, 0.4, eps, law, o);
        EXPECT_NEAR(r.M, w.M, 1e-8);
        EXPECT_NEAR(r.H, w.H, 1e-8);
        EXPECT_NEAR(r.F, w.F, 1e-8);
        EXPECT_NEAR(r.I, w.I, 1e-8);
        for (int ax = 0; ax < dim; ++ax) EXPECT_NEAR(r.P[ax], w.P[ax], 1e-8);
        EXPECT_NEAR(r.A, w.A, 1e-8);
        EXPECT_EQ(r.representation, "hydro");
    }
}

TEST(DiagnosticsHydro, VirialFluxOfLinearVelocity) {
    // rho = exp(-x^2), v = x: F = int rho x^2 = sqrt(pi)/2 = 2 I.
    const SpectralGrid g(1, 256, 24.0);
    const RealField x = g.coordinate(0);
    RealField rho(g.size());
    VectorField v(1, RealField(g.size()));
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = std::exp(-x[i] * x[i]);
        v[0][i] = x[i];
    }
    const auto r = diagnostics_hydro(g, rho, v, 0.0, 1.0, NonlinearityLaw::cubic());
    EXPECT_NEAR(r.F, std::sqrt(pi) / 2, 1e-13);
    EXPECT_NEAR(r.I, std::sqrt(pi) / 4, 1e-13);
}

TEST(DiagnosticsKorteweg, QuantumCapillarityEnergyEqualsQuantumPressureEnergy) {
    const double eps = 0.4;
    const SpectralGrid g(1, 128, 2 * pi);
    const RealField x = g.coordinate(0);
    RealField rho(g.size());
    VectorField v(1, RealField(g.size()));
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = 1.0 + 0.5 * std::sin(x[i]) * std::cos(2 * x[i]);
        v[0][i] = 0.2 * std::cos(x[i]);
    }
    const auto law = NonlinearityLaw::cubic();
    const auto k = diagnostics_korteweg(g, rho, v, 0.0, CapillarityLaw::quantum(eps), law);
    const auto h = diagnostics_hydro(g, rho, v, 0.0, eps, law);
    EXPECT_NEAR(k.H, h.H, 1e-12);
    EXPECT_EQ(k.representation, "korteweg");
}

TEST(DiagnosticsKorteweg, CapillaryEnergyExamples) {
    const SpectralGrid g(1, 64, 2 * pi);
    EXPECT_EQ(capillary_energy(g, RealField(g.size(), 2.0), CapillarityLaw::constant(0.3)), 0.0);
    const RealField x = g.coordinate(0);
    RealField rho(g.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = 1.0 + 0.1 * std::sin(x[i]);
    // (kappa/2) int 0.01 cos^2 = (kappa/2) 0.01 pi
    for (double kappa : {0.01, 0.5}) EXPECT_NEAR(capillary_energy(g, rho, CapillarityLaw::constant(kappa)), 0.005 * kappa * pi, 1e-15);
}

TEST(GpMomentum, RealAndConstantFieldsVanish) {
    const SpectralGrid g(1, 256, 40.0);
    EXPECT_EQ(gp_momentum(g, ComplexField(g.size(), 1.0)), 0.0);
    const ComplexField psi = sample(g, [](double x) { return std::tanh(x - 5) * std::tanh(x + 5); });
    EXPECT_NEAR(gp_momentum(g, psi), 0.0, 1e-15);
    // Purely imaginary perturbation of the background: Re psi - 1 = 0 and d Re psi = 0.
    EXPECT_NEAR(gp_momentum(g, sample(g, [](double x) { return Complex(1.0, 0.1 * std::exp(-x * x)); })), 0.0, 1e-15);
}

TEST(GpMomentum, AgainstFiniteDifferenceQuadrature) {
    const double d = 0.1;
    auto u = [d](double x) { return d * std::exp(-x * x); };
    auto w = [d](double x) { return d * x * std::exp(-x * x); };
    const SpectralGrid g(1, 256, 30.0);
    const double p = gp_momentum(g, sample(g, [&](double x) { return Complex(1.0 + u(x), w(x)); }));
    // Independent oracle: 4th-order finite differences on a fine midpoint grid.
    const double h = 1e-3, L = 30.0;
    const int m = 60000;
    double sum = 0.0;
    auto fd = [h](auto&& f, double x) { return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h); };
    for (int i = 0; i < m; ++i) {
        const double x = -L / 2 + (i + 0.5) * L / m;
        sum += 0.5 * (fd(u, x) * w(x) - fd(w, x) * u(x));
    }
    EXPECT_NEAR(p, sum * L / m, 1e-8);
    EXPECT_NEAR(p, -0.5 * d * d * std::sqrt(pi / 2), 1e-12);
}

TEST(Conservation, StrangRunKeepsInvariants) {
    const double eps = 1.0;
    const SpectralGrid g(1, 256, 40.0);
    const auto rec = nls_records(g, packet(g, eps), eps, 1.0, 2e-3);
    const DriftReport d = conservation_drift(rec);
    EXPECT_LT(d.M, 1e-10);
    EXPECT_LT(d.H, 1e-4);
    EXPECT_LT(d.P, 1e-8);
    EXPECT_LT(d.U, 1e-8);
    EXPECT_LT(d.Z_identity, 1e-10);
    EXPECT_LT(d.U_identity, 1e-12);
}

TEST(Conservation, EnergyDriftIsSecondOrderInTimeStep) {
    const double eps = 1.0;
    const SpectralGrid g(1, 256, 40.0);
    const double d1 = conservation_drift(nls_records(g, packet(g, eps), eps, 0.5, 1e-2)).H;
    const double d2 = conservation_drift(nls_records(g, packet(g, eps), eps, 0.5, 5e-3)).H;
    EXPECT_NEAR(std::log2(d1 / d2), 2.0, 0.15);
}

TEST(Conservation, AngularMomentumIn2D) {
    const double eps = 1.0;
    const SpectralGrid g(2, 64, 16.0);
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = std::exp(-x[i] * x[i] - 0.5 * y[i] * y[i]) * Complex(x[i] + 0.3, y[i]);
    const auto law = NonlinearityLaw::cubic();
    std::vector<DiagnosticsRecord> rec;
    EvolveOptions opts;
    opts.snapshot_every = 0;
    opts.observe_every = 10;
    opts.observers.push_back([&](const SchrodingerState& s) { rec.push_back(diagnostics_wave(g, s.psi, s.t, eps, law)); });
    evolve({psi, 0.0, eps}, 0.3, 1e-3, law, g, opts);
    EXPECT_GT(std::abs(rec.front().A), 0.1);
    EXPECT_LT(conservation_drift(rec).A, 1e-8);
}

TEST(FluxLaws, SecondOrderInObservationSpacing) {
    const double eps = 1.0;
    const SpectralGrid g(1, 256, 40.0);
    const auto rec = nls_records(g, packet(g, eps), eps, 1.0, 1e-3);
    const FluxLawResiduals a = check_flux_laws(stride(rec, 20)), b = check_flux_laws(stride(rec, 10));
    EXPECT_NEAR(std::log2(a.I_abs / b.I_abs), 2.0, 0.1);
    EXPECT_NEAR(std::log2(a.F_abs / b.F_abs), 2.0, 0.1);
    EXPECT_NEAR(std::log2(a.Z_abs / b.Z_abs), 2.0, 0.15);
    // X is linear in t for the discrete flow: only rounding remains.
    EXPECT_LT(a.X, 1e-10);
    EXPECT_LT(b.X, 1e-10);
}

TEST(FluxLaws, ValidatesCadence) {
    std::vector<DiagnosticsRecord> rec(3);
    EXPECT_THROW(check_flux_laws(std::vector<DiagnosticsRecord>(2)), ValidationError);
    rec[0].t = 0.0;
    rec[1].t = 0.1;
    rec[2].t = 0.3;
    EXPECT_THROW(check_flux_laws(rec), ValidationError);
}

TEST(FluxLaws, KortewegVirialLawWithCapillaryTerm) {
    const SpectralGrid g(1, 256, 24.0);
    const CapillarityLaw kappa = CapillarityLaw::constant(0.02);
    const auto law = NonlinearityLaw::cubic();
    const RealField x = g.coordinate(0);
    RealField rho(g.size());
    VectorField v(1, RealField(g.size()));
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = 1.0 + 0.25 * std::exp(-(x[i] + 1) * (x[i] + 1));
        v[0][i] = -0.2 * x[i] * std::exp(-x[i] * x[i]);
    }
    ExtendedState s = extended_vars_korteweg(g, rho, v, kappa, 1e-4);
    const KortewegSolver solver(g, law, kappa, 1e-4);
    DiagnosticsOptions o;
    o.background = 1.0;
    const double dt = 2.5e-3;
    std::vector<DiagnosticsRecord> rec;
    for (int k = 0; k <= 200; ++k) {
        rec.push_back(diagnostics_korteweg(g, s.rho, {real_part(s.z[0])}, s.t, kappa, law, o));
        if (k < 200) solver.step(s, dt);
    }
    EXPECT_LT(conservation_drift(rec).H, 1e-6);
    const FluxLawResiduals a = check_flux_laws(stride(rec, 16)), b = check_flux_laws(stride(rec, 8));
    EXPECT_NEAR(std::log2(a.F_abs / b.F_abs), 2.0, 0.2);
}

TEST(Galilean, BoostShiftsMomentumAndKeepsInternalEnergy) {
    const double eps = 0.5;
    const SpectralGrid g(1, 512, 40.0);
    const ComplexField psi = packet(g, eps);
    const double xi = 2 * pi / g.length() * 3;  // commensurate with the period
    const ComplexField boosted = sample(g, [&](double x) { return std::polar(1.0, xi * x); });
    ComplexField b(psi.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = psi[i] * boosted[i];
    const auto law = NonlinearityLaw::cubic();
    const auto r0 = diagnostics_wave(g, psi, 0.0, eps, law);
    const auto r1 = diagnostics_wave(g, b, 0.0, eps, law);
    EXPECT_NEAR(r1.P[0] - r0.P[0], eps * xi * r0.M, 1e-8);
    EXPECT_NEAR(r1.H - r1.P[0] * r1.P[0] / (2 * r1.M), r0.H - r0.P[0] * r0.P[0] / (2 * r0.M), 1e-8);
}

TEST(Csv, HeaderAndRowShape) {
    std::ostringstream os;
    DiagnosticsRecord r;
    r.t = 0.25;
    r.M = 1.5;
    write_diagnostics_csv(os, {r, r});
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "t,M,H,Px,Py,A,Xx,Xy,F,I,Z,Ux,Uy,virial_source,gp_momentum");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 14);
        EXPECT_EQ(line.substr(0, 9), "0.25,1.5,");
    }
    EXPECT_EQ(rows, 2);
}
