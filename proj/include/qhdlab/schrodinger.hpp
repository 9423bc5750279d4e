#pragma once

// Split-step Fourier integration of the semiclassical NLS
//     i eps psi_t + (eps^2/2) Lap psi = f(|psi|^2) psi.

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "laws.hpp"

namespace qhdlab {

struct SchrodingerState {
    ComplexField psi;
    double t = 0.0;
    double eps = 1.0;
};

struct Snapshot {
    double t = 0.0;
    ComplexField psi;
};

using Trajectory = std::vector<Snapshot>;

/// Strang splitting: half nonlinear phase rotation, exact linear Fourier
/// propagation, half nonlinear rotation. Both substeps are isometries, so the
/// discrete mass is conserved up to rounding.
class SchrodingerSolver {
public:
    SchrodingerSolver(SpectralGrid grid, NonlinearityLaw law) : grid_(std::move(grid)), law_(law) {}

    const SpectralGrid& grid() const noexcept { return grid_; }
    const NonlinearityLaw& law() const noexcept { return law_; }

    void step(SchrodingerState& s, double dt) {
        if (!(dt > 0.0)) throw ValidationError("time step must be positive");
        grid_.check(s.psi.size());
        prepare(dt, s.eps);
        nonlinear_half(s.psi, dt, s.eps);
        grid_.forward_inplace(s.psi);
        for (std::size_t i = 0; i < s.psi.size(); ++i) s.psi[i] *= propagator_[i];
        grid_.inverse_inplace(s.psi);
        nonlinear_half(s.psi, dt, s.eps);
        s.t += dt;
        if (!all_finite(s.psi)) throw NonFiniteError("NLS step produced non-finite values", s.t);
    }

private:
    void prepare(double dt, double eps) {
        if (dt == cached_dt_ && eps == cached_eps_) return;
        const auto& ksq = grid_.ksq();
        propagator_.resize(ksq.size());
        for (std::size_t i = 0; i < ksq.size(); ++i)
            propagator_[i] = std::polar(1.0, -0.5 * eps * dt * ksq[i]);
        cached_dt_ = dt;
        cached_eps_ = eps;
    }

    void nonlinear_half(ComplexField& psi, double dt, double eps) const {
        const double c = -0.5 * dt / eps;
        for (auto& p : psi) p *= std::polar(1.0, c * law_.f(std::norm(p)));
    }

    SpectralGrid grid_;
    NonlinearityLaw law_;
    ComplexField propagator_;
    double cached_dt_ = -1.0;
    double cached_eps_ = -1.0;
};

inline void step_strang(SchrodingerState& s, double dt, const NonlinearityLaw& law,
                        const SpectralGrid& grid) {
    SchrodingerSolver solver(grid, law);
    solver.step(s, dt);
}

struct EvolveOptions {
    /// Observers run every `observe_every` steps (and at t = 0 and the end).
    int observe_every = 1;
    /// Snapshots retained every `snapshot_every` steps; 0 keeps only the endpoints.
    int snapshot_every = 1;
    std::vector<std::function<void(const SchrodingerState&)>> observers;
};

inline int step_count(double T, double dt) {
    if (T < 0.0) throw ValidationError("final time must be non-negative");
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
    const double r = T / dt;
    const long steps = std::lround(r);
    if (std::abs(r - steps) > 1e-6 * std::max(1.0, r))
        throw ValidationError("time step must divide the final time");
    return static_cast<int>(steps);
}

/// Advance to time state.t + T. The initial state is always the first snapshot.
inline Trajectory evolve(SchrodingerState state, double T, double dt, const NonlinearityLaw& law,
                         const SpectralGrid& grid, EvolveOptions opts = {}) {
    const int steps = step_count(T, dt);
    if (opts.observe_every < 1) throw ValidationError("observation cadence must be >= 1 step");
    SchrodingerSolver solver(grid, law);
    Trajectory traj;
    const double t0 = state.t;
    auto observe = [&] {
        for (auto& o : opts.observers) o(state);
    };
    traj.push_back({state.t, state.psi});
    observe();
    for (int s = 1; s <= steps; ++s) {
        solver.step(state, dt);
        state.t = t0 + s * dt;
        const bool last = s == steps;
        if (last || s % opts.observe_every == 0) observe();
        if (last || (opts.snapshot_every > 0 && s % opts.snapshot_every == 0))
            traj.push_back({state.t, state.psi});
    }
    return traj;
}

/// L2 norm of the midpoint residual of the NLS between two snapshots taken dt apart.
inline double pde_residual(const Snapshot& a, const Snapshot& b, double dt, double eps,
                           const NonlinearityLaw& law, const SpectralGrid& grid) {
    ComplexField mid(a.psi.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (a.psi[i] + b.psi[i]);
    const ComplexField lap = laplacian(grid, mid);
    ComplexField r(mid.size());
    const Complex ie(0.0, eps);
    for (std::size_t i = 0; i < mid.size(); ++i)
        r[i] = ie * (b.psi[i] - a.psi[i]) / dt + 0.5 * eps * eps * lap[i] -
               law.f(std::norm(mid[i])) * mid[i];
    return l2_norm(grid, r);
}

}  // namespace qhdlab
