#pragma once

// Distributional form of the quantum fluid system built from an NLS
// trajectory through the unit phase phi = psi/|psi|:
//     rho_t + div J = 0,
//     J_t + div(L (x) L) + grad P(rho) = (eps^2/4) grad Lap rho - eps^2 div(grad sqrt(rho) (x) grad sqrt(rho)),
//     d_j J^k - d_k J^j = 2 (L^k d_j sqrt(rho) - L^j d_k sqrt(rho)),
// with L = eps Im(conj(phi) grad psi), J = sqrt(rho) L. For eps = 1 this is the
// textbook normalization with the factor 1/4.
//
// Residuals pair the equations with a fixed family of smooth test functions;
// every spatial derivative sits on the test function, so vacuum points only
// enter through rho, J, L and grad sqrt(rho) = Re(conj(phi) grad psi).

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "laws.hpp"
#include "madelung.hpp"
#include "schrodinger.hpp"

namespace qhdlab {

/// Refuses power laws outside the embedding W^{1,1}(R^d) -> L^{sigma+1}(R^d) with integer sigma.
/// In d = 1 every integer sigma >= 1 qualifies; in d = 2 the embedding stops at L^2, so sigma = 1.
inline void validate_weak_law(const NonlinearityLaw& law, int dim) {
    if (law.kind() != NonlinearityLaw::Kind::power) return;
    const double s = law.sigma();
    if (s < 1.0 || s != std::floor(s))
        throw ValidationError("weak-solution check needs an integer exponent sigma >= 1 (got " +
                              std::to_string(s) + ")");
    const double max_p = dim == 1 ? std::numeric_limits<double>::infinity() : double(dim) / (dim - 1);
    if (s + 1.0 > max_p)
        throw ValidationError("sigma = " + std::to_string(static_cast<int>(s)) + " violates the embedding W^{1,1}(R^" +
                              std::to_string(dim) + ") -> L^{sigma+1}: need sigma + 1 <= " +
                              std::to_string(static_cast<int>(max_p)));
}

// ---------------------------------------------------------------------------
// Test functions

struct TemporalBump {
    double center = 0.0;
    double half_width = 1.0;

    double value(double t) const {
        const double s = (t - center) / half_width;
        if (std::abs(s) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - s * s));
    }
    double derivative(double t) const {
        const double s = (t - center) / half_width;
        if (std::abs(s) >= 1.0) return 0.0;
        const double q = 1.0 - s * s;
        return std::exp(-1.0 / q) * (-2.0 * s / (q * q)) / half_width;
    }
};

/// Band-limited periodic space factor with its exact derivatives.
struct SpaceFactor {
    RealField value;
    VectorField grad;
    VectorField grad_lap;  // d_c Lap s, used by the capillary pairing
};

class TestFunctionSet {
public:
    TestFunctionSet(const SpectralGrid& g, double t0, double t1, unsigned seed, int n_space = 8,
                    int max_mode = 4)
        : t0_(t0), t1_(t1) {
        if (!(t1 > t0)) throw ValidationError("test window must have positive length");
        if (max_mode < 1 || 3 * max_mode > g.n()) throw ValidationError("test mode cutoff out of range");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const int d = g.dim();
        for (int s = 0; s < n_space; ++s) {
            ComplexField spec(g.size(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                int m2 = 0, mmax = 0;
                for (int ax = 0; ax < d; ++ax) {
                    const int m = g.modes()[g.axis_index(i, ax)];
                    m2 += m * m;
                    mmax = std::max(mmax, std::abs(m));
                }
                if (m2 == 0 || mmax > max_mode) continue;
                spec[i] = Complex(normal(rng), normal(rng)) / (1.0 + m2);
            }
            // Real part of the synthesized field keeps it real and band-limited.
            ComplexField f = g.inverse(spec);
            RealField v = real_part(f);
            const double m = max_abs(v);
            for (auto& x : v) x /= m;
            SpaceFactor sf;
            sf.grad = gradient(g, v);
            const RealField lap = laplacian(g, v);
            sf.grad_lap = gradient(g, lap);
            sf.value = std::move(v);
            space_.push_back(std::move(sf));
        }
        const double len = t1 - t0;
        time_ = {{t0 + 0.5 * len, 0.5 * len}, {t0 + 0.35 * len, 0.35 * len}, {t1 - 0.35 * len, 0.35 * len}};
    }

    const std::vector<SpaceFactor>& space() const noexcept { return space_; }
    const std::vector<TemporalBump>& time() const noexcept { return time_; }
    double t0() const noexcept { return t0_; }
    double t1() const noexcept { return t1_; }
    std::size_t size() const noexcept { return space_.size() * time_.size(); }

private:
    double t0_, t1_;
    std::vector<SpaceFactor> space_;
    std::vector<TemporalBump> time_;
};

// ---------------------------------------------------------------------------
// Residuals

struct WeakResidual {
    double absolute = 0.0;  // max over tests of |pairing|
    double scale = 0.0;     // max over tests of the largest individual term
    double relative() const { return scale > 0.0 ? absolute / scale : absolute; }
};

namespace detail {

/// Composite Simpson weights for uniformly spaced samples (3/8 rule on the tail for even counts).
inline std::vector<double> simpson_weights(std::size_t n, double h) {
    if (n < 3) throw ValidationError("time quadrature needs at least three snapshots");
    std::vector<double> w(n, 0.0);
    std::size_t simpson_end = n - 1;
    if ((n - 1) % 2 == 1) simpson_end = n - 4;
    for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (simpson_end != n - 1) {
        const std::size_t i = simpson_end;
        w[i] += 3.0 * h / 8.0;
        w[i + 1] += 9.0 * h / 8.0;
        w[i + 2] += 9.0 * h / 8.0;
        w[i + 3] += 3.0 * h / 8.0;
    }
    return w;
}

inline double uniform_cadence(const Trajectory& traj) {
    if (traj.size() < 3) throw ValidationError("weak residuals need at least three snapshots");
    const double h = traj[1].t - traj[0].t;
    for (std::size_t m = 1; m < traj.size(); ++m)
        if (std::abs(traj[m].t - traj[m - 1].t - h) > 1e-9 * std::max(1.0, h))
            throw ValidationError("weak residuals need snapshots at a uniform cadence");
    return h;
}

inline double dot(const SpectralGrid& g, const RealField& a, const RealField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * g.cell_volume();
}

}  // namespace detail

/// Pairing of rho_t + div J = 0 with chi = eta(t) s(x):  int int (rho eta' s + eta J.grad s).
inline WeakResidual weak_residual_continuity(const SpectralGrid& g, const Trajectory& traj, double eps,
                                             const TestFunctionSet& tests) {
    const double h = detail::uniform_cadence(traj);
    const auto w = detail::simpson_weights(traj.size(), h);
    const int d = g.dim();
    const std::size_t ns = tests.space().size(), nt = tests.time().size();
    std::vector<double> term_t(ns * nt, 0.0), term_x(ns * nt, 0.0);
    for (std::size_t m = 0; m < traj.size(); ++m) {
        const WeakVars wv = weak_vars(g, traj[m].psi);
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& sf = tests.space()[s];
            const double rs = detail::dot(g, wv.rho, sf.value);
            double js = 0.0;
            for (int ax = 0; ax < d; ++ax) js += eps * detail::dot(g, wv.j[ax], sf.grad[ax]);
            for (std::size_t b = 0; b < nt; ++b) {
                const auto& bump = tests.time()[b];
                term_t[s * nt + b] += w[m] * bump.derivative(traj[m].t) * rs;
                term_x[s * nt + b] += w[m] * bump.value(traj[m].t) * js;
            }
        }
    }
    WeakResidual r;
    for (std::size_t i = 0; i < term_t.size(); ++i) {
        r.absolute = std::max(r.absolute, std::abs(term_t[i] + term_x[i]));
        r.scale = std::max({r.scale, std::abs(term_t[i]), std::abs(term_x[i])});
    }
    return r;
}

/// Pairing of the momentum equation with chi = eta(t) s(x) e_c:
///   int int (J.chi_t + (L (x) L):grad chi + P(rho) div chi - (eps^2/4) rho Lap div chi
///            + eps^2 (grad sqrt(rho) (x) grad sqrt(rho)):grad chi).
inline WeakResidual weak_residual_momentum(const SpectralGrid& g, const Trajectory& traj, double eps,
                                           const NonlinearityLaw& law, const TestFunctionSet& tests) {
    const double h = detail::uniform_cadence(traj);
    const auto w = detail::simpson_weights(traj.size(), h);
    const int d = g.dim();
    const std::size_t ns = tests.space().size(), nt = tests.time().size();
    const std::size_t ntests = ns * d * nt;
    constexpr int kTerms = 5;
    std::vector<double> terms(ntests * kTerms, 0.0);
    const double e2 = eps * eps;
    for (std::size_t m = 0; m < traj.size(); ++m) {
        const WeakVars wv = weak_vars(g, traj[m].psi);
        RealField p(wv.rho.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = law.pressure(wv.rho[i]);
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& sf = tests.space()[s];
            for (int c = 0; c < d; ++c) {
                double q[kTerms] = {};
                q[0] = eps * detail::dot(g, wv.j[c], sf.value);  // paired with eta'
                for (int j = 0; j < d; ++j) {
                    RealField ll(p.size()), gg(p.size());
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        ll[i] = wv.lambda[j][i] * wv.lambda[c][i];
                        gg[i] = wv.grad_sqrt_rho[j][i] * wv.grad_sqrt_rho[c][i];
                    }
                    q[1] += e2 * detail::dot(g, ll, sf.grad[j]);
                    q[4] += e2 * detail::dot(g, gg, sf.grad[j]);
                }
                q[2] = detail::dot(g, p, sf.grad[c]);
                q[3] = -0.25 * e2 * detail::dot(g, wv.rho, sf.grad_lap[c]);
                for (std::size_t b = 0; b < nt; ++b) {
                    const auto& bump = tests.time()[b];
                    const double eta = bump.value(traj[m].t), deta = bump.derivative(traj[m].t);
                    double* out = &terms[((s * d + c) * nt + b) * kTerms];
                    out[0] += w[m] * deta * q[0];
                    for (int k = 1; k < kTerms; ++k) out[k] += w[m] * eta * q[k];
                }
            }
        }
    }
    WeakResidual r;
    for (std::size_t t = 0; t < ntests; ++t) {
        double sum = 0.0;
        for (int k = 0; k < kTerms; ++k) {
            sum += terms[t * kTerms + k];
            r.scale = std::max(r.scale, std::abs(terms[t * kTerms + k]));
        }
        r.absolute = std::max(r.absolute, std::abs(sum));
    }
    return r;
}

struct CurlResidual {
    double max_residual = 0.0;  // max |lhs - rhs| off the mask
    double max_lhs = 0.0;
    double masked_fraction = 0.0;  // measure of the excluded neighbourhood of vacuum
};

/// Pointwise residual of d_j J^k - d_k J^j = 2 (L^k d_j sqrt(rho) - L^j d_k sqrt(rho)) (eps = 1
/// scaling; the identity is homogeneous in eps). Points with rho below `relative_mask` times
/// max rho are excluded.
inline CurlResidual curl_constraint_residual(const SpectralGrid& g, const ComplexField& psi,
                                             double relative_mask = 1e-6) {
    if (g.dim() != 2) throw ValidationError("curl constraint needs d = 2");
    const WeakVars wv = weak_vars(g, psi);
    // J from the smooth expression Im(conj(psi) grad psi), identical to sqrt(rho) L.
    const ComplexVectorField grad = gradient(g, psi);
    VectorField j(2, RealField(psi.size()));
    for (int ax = 0; ax < 2; ++ax)
        for (std::size_t i = 0; i < psi.size(); ++i) j[ax][i] = (std::conj(psi[i]) * grad[ax][i]).imag();
    const RealField d0j1 = partial(g, j[1], 0);
    const RealField d1j0 = partial(g, j[0], 1);
    const auto mask = relative_vacuum_mask(wv.rho, relative_mask);
    CurlResidual r;
    std::size_t masked = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        if (mask[i]) {
            ++masked;
            continue;
        }
        const double lhs = d0j1[i] - d1j0[i];
        const double rhs =
            2.0 * (wv.lambda[1][i] * wv.grad_sqrt_rho[0][i] - wv.lambda[0][i] * wv.grad_sqrt_rho[1][i]);
        r.max_residual = std::max(r.max_residual, std::abs(lhs - rhs));
        r.max_lhs = std::max(r.max_lhs, std::abs(lhs));
    }
    r.masked_fraction = static_cast<double>(masked) / static_cast<double>(psi.size());
    return r;
}

/// int (eps^2/2 (|L|^2 + |grad sqrt rho|^2) + G(rho)) with L, grad sqrt(rho) from weak_vars.
inline double weak_energy(const SpectralGrid& g, const ComplexField& psi, double eps, const NonlinearityLaw& law,
                          double background = 0.0) {
    const WeakVars wv = weak_vars(g, psi);
    RealField e(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        double q = 0.0;
        for (int ax = 0; ax < g.dim(); ++ax)
            q += wv.lambda[ax][i] * wv.lambda[ax][i] + wv.grad_sqrt_rho[ax][i] * wv.grad_sqrt_rho[ax][i];
        e[i] = 0.5 * eps * eps * q + law.potential(wv.rho[i], background);
    }
    return integrate(g, e);
}

/// Max relative drift of the weak-variable energy along the trajectory.
inline double energy_equality_check(const SpectralGrid& g, const Trajectory& traj, double eps,
                                    const NonlinearityLaw& law, double background = 0.0) {
    if (traj.empty()) return 0.0;
    const double e0 = weak_energy(g, traj.front().psi, eps, law, background);
    double drift = 0.0;
    for (const auto& s : traj) {
        const double e = weak_energy(g, s.psi, eps, law, background);
        drift = std::max(drift, e0 == 0.0 ? std::abs(e) : std::abs(e - e0) / std::abs(e0));
    }
    return drift;
}

/// Max over non-vacuum points of ||grad psi|^2 - |grad sqrt rho|^2 - |L|^2| relative to max |grad psi|^2.
inline double modulus_identity_residual(const SpectralGrid& g, const ComplexField& psi) {
    const WeakVars wv = weak_vars(g, psi);
    const ComplexVectorField grad = gradient(g, psi);
    double res = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        if (wv.vacuum_mask[i]) continue;
        double a = 0.0, b = 0.0;
        for (int ax = 0; ax < g.dim(); ++ax) {
            a += std::norm(grad[ax][i]);
            b += wv.grad_sqrt_rho[ax][i] * wv.grad_sqrt_rho[ax][i] + wv.lambda[ax][i] * wv.lambda[ax][i];
        }
        res = std::max(res, std::abs(a - b));
        scale = std::max(scale, a);
    }
    return scale > 0.0 ? res / scale : res;
}

struct WeakCheck {
    std::string name;
    std::string law;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline WeakCheck make_check(std::string name, const NonlinearityLaw& law, double residual, double tol) {
    return {std::move(name), law.name(), residual, tol, residual < tol};
}

}  // namespace qhdlab
