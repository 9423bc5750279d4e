#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qhdlab/data.hpp"
#include "qhdlab/madelung.hpp"

using namespace qhdlab;
constexpr double pi = std::numbers::pi;

namespace {

ComplexField smooth_2d(const SpectralGrid& g) {
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    ComplexField psi(g.size());
    const double q = 2 * pi / g.length();
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double r = 1.0 + 0.4 * std::cos(q * x[i] - 0.3) * std::sin(q * y[i]);
        const double phase = std::sin(q * x[i]) * std::cos(q * y[i]) + 0.3 * std::cos(2 * q * x[i] + q * y[i]);
        psi[i] = std::polar(std::sqrt(r), phase);
    }
    return psi;
}

}  // namespace

TEST(ToHydro, PlaneWave) {
    const double eps = 0.5;
    const SpectralGrid g(1, 32, 2 * pi * eps * 2);
    const RealField x = g.coordinate(0);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::polar(1.0, x[i] / eps);
    const HydroState h = to_hydro(g, psi, eps, 1e-8);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(h.rho[i], 1.0, 1e-14);
        EXPECT_NEAR(h.v[0][i], 1.0, 1e-12);
    }
}

TEST(ToHydro, ConstantState) {
    const SpectralGrid g(2, 16, 5.0);
    const HydroState h = to_hydro(g, ComplexField(g.size(), 1.0), 0.3, 1e-8);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(h.rho[i], 1.0);
        EXPECT_EQ(h.vacuum_mask[i], 0);
        for (int ax = 0; ax < 2; ++ax) EXPECT_NEAR(h.v[ax][i], 0.0, 1e-15);
    }
}

TEST(ToHydro, TanhHasNoCurrentAndVacuumAtOrigin) {
    const SpectralGrid g(1, 256, 20.0);
    const RealField x = g.coordinate(0);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::tanh(x[i]);
    const HydroState h = to_hydro(g, psi, 1.0, 1e-6);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(h.v[0][i], 0.0, 1e-13);
        EXPECT_EQ(h.vacuum_mask[i] != 0, std::pow(std::tanh(x[i]), 2) < 1e-6) << x[i];
    }
    EXPECT_EQ(h.vacuum_mask[128], 1);  // x = 0 is a node
}

TEST(FromHydro, ConstantState) {
    const ComplexField psi = from_hydro(RealField(8, 1.0), RealField(8, 0.0), 0.5);
    for (Complex c : psi) EXPECT_EQ(c, Complex(1.0, 0.0));
}

TEST(FromHydro, DensityFourLinearPhase) {
    const double eps = 0.25;
    const SpectralGrid g(1, 16, 2 * pi);
    const RealField x = g.coordinate(0);
    RealField phase(g.size());
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = eps * x[i];
    const ComplexField psi = from_hydro(RealField(g.size(), 4.0), phase, eps);
    for (std::size_t i = 0; i < psi.size(); ++i) EXPECT_LT(std::abs(psi[i] - std::polar(2.0, x[i])), 1e-14);
}

TEST(FromHydro, RejectsNegativeDensity) {
    EXPECT_THROW(from_hydro(RealField{1.0, -0.1}, RealField{0.0, 0.0}, 1.0), ValidationError);
}

TEST(FromHydro, RoundTripRecoversDensityAndPhaseGradient) {
    const double eps = 0.5, threshold = 1e-8;
    const SpectralGrid g(1, 128, 2 * pi);
    const RealField x = g.coordinate(0);
    RealField rho(g.size()), phase(g.size()), dphase(g.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = 1.0 + 0.5 * std::sin(x[i]);
        phase[i] = 0.3 * std::cos(2 * x[i]);
        dphase[i] = -0.6 * std::sin(2 * x[i]);
    }
    const HydroState h = to_hydro(g, from_hydro(rho, phase, eps), eps, threshold);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        ASSERT_GE(rho[i], 2 * threshold);
        EXPECT_NEAR(h.rho[i], rho[i], 1e-10);
        EXPECT_NEAR(h.v[0][i], dphase[i], 1e-10);
    }
}

TEST(FromHydro, InverseUpToGlobalPhase) {
    const double eps = 0.5;
    const SpectralGrid g(1, 128, 2 * pi);
    const RealField x = g.coordinate(0);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = std::polar(std::sqrt(1.2 + std::cos(x[i])), 0.7 + std::sin(x[i]) / eps);
    const HydroState h = to_hydro(g, psi, eps, 1e-8);
    // Rebuild the phase by integrating v spectrally (v has zero mean here).
    const ComplexField vh = g.forward(to_complex(h.v[0]));
    ComplexField ph(g.size(), 0.0);
    for (std::size_t i = 0; i < ph.size(); ++i) {
        const double k = g.k_axis_odd(i, 0);
        if (k != 0.0) ph[i] = vh[i] / Complex(0.0, k);
    }
    const ComplexField back = from_hydro(h.rho, real_part(g.inverse(ph)), eps);
    const Complex ratio0 = psi[0] / back[0];
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(std::abs(back[i]), std::abs(psi[i]), 1e-10);
        EXPECT_LT(std::abs(psi[i] / back[i] - ratio0), 1e-10);
    }
}

TEST(ExtendedVars, ConstantDensityGivesZeroZ) {
    const SpectralGrid g(1, 32, 10.0);
    const ExtendedState s = extended_vars_qhd(g, RealField(g.size(), 1.0), VectorField(1, RealField(g.size())), 0.5);
    EXPECT_LT(max_abs(s.z[0]), 1e-15);
}

TEST(ExtendedVars, OsmoticVelocityAgainstFiniteDifferences) {
    const SpectralGrid g(1, 64, 2 * pi);
    const RealField x = g.coordinate(0);
    RealField rho(g.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = 1.0 + 0.1 * std::sin(x[i]);
    const ExtendedState s = extended_vars_qhd(g, rho, VectorField(1, RealField(g.size())), 1.0);
    const double h = 1e-3;
    auto r = [](double y) { return 1.0 + 0.1 * std::sin(y); };
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double drho = (r(x[i] - 2 * h) - 8 * r(x[i] - h) + 8 * r(x[i] + h) - r(x[i] + 2 * h)) / (12 * h);
        EXPECT_NEAR(s.z[0][i].imag(), -0.5 * drho / r(x[i]), 1e-11);
        EXPECT_NEAR(s.z[0][i].imag(), -0.05 * std::cos(x[i]) / rho[i], 1e-13);
    }
}

TEST(ExtendedVars, KortewegQuantumCapillarityMatchesQhd) {
    const double eps = 0.7;
    const SpectralGrid g(2, 32, 8.0);
    const ComplexField psi = smooth_2d(g);
    const HydroState h = to_hydro(g, psi, eps, 1e-8);
    const ExtendedState a = extended_vars_qhd(g, h.rho, h.v, eps);
    const ExtendedState b = extended_vars_korteweg(g, h.rho, h.v, CapillarityLaw::quantum(eps));
    for (int ax = 0; ax < 2; ++ax)
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_EQ(a.z[ax][i].real(), b.z[ax][i].real());
            EXPECT_NEAR(a.z[ax][i].imag(), b.z[ax][i].imag(), 1e-15 * (1 + std::abs(a.z[ax][i].imag())));
        }
}

TEST(ExtendedVars, RefusesDensityBelowFloor) {
    const SpectralGrid g(1, 16, 4.0);
    RealField rho(g.size(), 1.0);
    rho[3] = 1e-6;
    EXPECT_THROW(extended_vars_qhd(g, rho, VectorField(1, RealField(g.size())), 1.0, 1e-4), VacuumError);
}

TEST(ExtendedVars, PotentialDataIsCurlFree) {
    const double eps = 0.5;
    const SpectralGrid g(2, 64, 2 * pi);
    const RealField x = g.coordinate(0), y = g.coordinate(1);
    RealField rho(g.size()), phase(g.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = 1.0 + 0.3 * std::cos(x[i]) * std::sin(y[i]);
        phase[i] = 0.2 * std::sin(x[i] + 2 * y[i]);
    }
    const HydroState h = to_hydro(g, from_hydro(rho, phase, eps), eps, 1e-8);
    const ExtendedState s = extended_vars_qhd(g, h.rho, h.v, eps);
    auto curl = [&](const RealField& a, const RealField& b) {
        const RealField dxb = partial(g, b, 0), dya = partial(g, a, 1);
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(dxb[i] - dya[i]));
        return m;
    };
    EXPECT_LT(curl(h.v[0], h.v[1]), 1e-10);
    EXPECT_LT(curl(imag_part(s.z[0]), imag_part(s.z[1])), 1e-10);
}

TEST(WeakVars, ConstantState) {
    const SpectralGrid g(1, 16, 4.0);
    const WeakVars w = weak_vars(g, ComplexField(g.size(), 1.0));
    EXPECT_LT(max_abs(w.lambda[0]), 1e-15);
    EXPECT_LT(max_abs(w.j[0]), 1e-15);
    EXPECT_LT(max_abs(w.grad_sqrt_rho[0]), 1e-15);
}

TEST(WeakVars, UnitModulusPlaneWave) {
    const SpectralGrid g(1, 32, 2 * pi);
    const RealField x = g.coordinate(0);
    ComplexField psi(g.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = std::polar(1.0, x[i]);
    const WeakVars w = weak_vars(g, psi);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(w.lambda[0][i], 1.0, 1e-13);
        EXPECT_NEAR(w.grad_sqrt_rho[0][i], 0.0, 1e-13);
    }
}

TEST(WeakVars, RealProfileGivesDerivativeOfModulus) {
    const SpectralGrid g(1, 512, 40.0);
    const ComplexField psi = black_soliton_pair(g);
    const WeakVars w = weak_vars(g, psi);
    const RealField x = g.coordinate(0);
    const double x1 = -0.25 * g.length() - 0.5 * g.dx(), x2 = -x1;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        EXPECT_NEAR(w.lambda[0][i], 0.0, 1e-13);
        const double a = std::tanh(x[i] - x1), b = std::tanh(x[i] - x2);
        const double u = -a * b;
        const double du = -(1 - a * a) * b - a * (1 - b * b);
        if (std::abs(u) > 1e-3) {
            EXPECT_NEAR(w.grad_sqrt_rho[0][i], (u > 0 ? 1 : -1) * du, 1e-8) << x[i];
        }
    }
}

TEST(WeakVars, ModulusIdentityAndCurrent) {
    const SpectralGrid g(2, 64, 8.0);
    const ComplexField psi = smooth_2d(g);
    const WeakVars w = weak_vars(g, psi);
    const auto grad = gradient(g, psi);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        double lhs = 0.0, rhs = 0.0;
        for (int ax = 0; ax < 2; ++ax) {
            lhs += std::norm(grad[ax][i]);
            rhs += w.grad_sqrt_rho[ax][i] * w.grad_sqrt_rho[ax][i] + w.lambda[ax][i] * w.lambda[ax][i];
            const double j = (std::conj(psi[i]) * grad[ax][i]).imag();
            EXPECT_NEAR(w.j[ax][i], j, 1e-10);
            EXPECT_NEAR(w.j[ax][i], std::sqrt(w.rho[i]) * w.lambda[ax][i], 1e-12);
        }
        EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + lhs));
    }
}

TEST(WeakVars, CurlIdentity) {
    const SpectralGrid g(2, 64, 8.0);
    const ComplexField psi = smooth_2d(g);
    const WeakVars w = weak_vars(g, psi);
    const RealField lhs_a = partial(g, w.j[1], 0), lhs_b = partial(g, w.j[0], 1);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double lhs = lhs_a[i] - lhs_b[i];
        const double rhs = 2 * (w.lambda[1][i] * w.grad_sqrt_rho[0][i] - w.lambda[0][i] * w.grad_sqrt_rho[1][i]);
        err = std::max(err, std::abs(lhs - rhs));
        scale = std::max(scale, std::abs(lhs));
    }
    EXPECT_GT(scale, 1e-2);
    EXPECT_LT(err / scale, 1e-10);
}

TEST(VacuumFraction, Examples) {
    EXPECT_EQ(vacuum_fraction(ComplexField(10, 1.0), 0.5), 0.0);
    EXPECT_EQ(vacuum_fraction(ComplexField(10, 0.0), 0.5), 1.0);
    const SpectralGrid g(1, 256, 20.0);
    const RealField x = g.coordinate(0);
    ComplexField psi(g.size());
    int count = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        psi[i] = std::tanh(x[i]);
        count += std::tanh(x[i]) * std::tanh(x[i]) < 1e-6;
    }
    const double f = vacuum_fraction(psi, 1e-6);
    EXPECT_EQ(f, count / 256.0);
    EXPECT_LE(f, 2.0 / 256.0);
    EXPECT_THROW(vacuum_fraction(psi, 0.0), ValidationError);
}
