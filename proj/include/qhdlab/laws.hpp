#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace qhdlab {

/// Nonlinearity f(|psi|^2) with antiderivative F (F(0) = 0) and pressure
/// P(r) = r f(r) - F(r).
class NonlinearityLaw {
public:
    enum class Kind { cubic, gross_pitaevskii, power };

    static NonlinearityLaw cubic() { return NonlinearityLaw(Kind::cubic, 1.0); }
    static NonlinearityLaw gross_pitaevskii() { return NonlinearityLaw(Kind::gross_pitaevskii, 1.0); }
    static NonlinearityLaw power(double sigma) {
        if (!(sigma > 0.0)) throw ValidationError("power law exponent must be positive");
        return NonlinearityLaw(Kind::power, sigma);
    }
    static NonlinearityLaw from_name(const std::string& name, double sigma = 1.0) {
        if (name == "cubic") return cubic();
        if (name == "gross_pitaevskii" || name == "gp") return gross_pitaevskii();
        if (name == "power") return power(sigma);
        throw ValidationError("unknown nonlinearity law '" + name + "'");
    }

    Kind kind() const noexcept { return kind_; }
    double sigma() const noexcept { return sigma_; }
    std::string name() const {
        switch (kind_) {
            case Kind::cubic: return "cubic";
            case Kind::gross_pitaevskii: return "gross_pitaevskii";
            case Kind::power: return "power";
        }
        return "?";
    }

    double f(double r) const {
        switch (kind_) {
            case Kind::cubic: return r;
            case Kind::gross_pitaevskii: return r - 1.0;
            case Kind::power: return std::pow(r, sigma_);
        }
        return 0.0;
    }
    double F(double r) const {
        switch (kind_) {
            case Kind::cubic: return 0.5 * r * r;
            case Kind::gross_pitaevskii: return 0.5 * r * r - r;
            case Kind::power: return std::pow(r, sigma_ + 1.0) / (sigma_ + 1.0);
        }
        return 0.0;
    }
    double fprime(double r) const {
        switch (kind_) {
            case Kind::cubic:
            case Kind::gross_pitaevskii: return 1.0;
            case Kind::power: return sigma_ * std::pow(r, sigma_ - 1.0);
        }
        return 0.0;
    }
    double pressure(double r) const { return r * f(r) - F(r); }

    /// F renormalized against a constant background density: F(r) - F(bg) - f(bg)(r - bg).
    /// With bg = 0 this is F itself.
    double potential(double r, double background) const {
        if (background == 0.0) return F(r);
        return F(r) - F(background) - f(background) * (r - background);
    }

private:
    NonlinearityLaw(Kind k, double s) : kind_(k), sigma_(s) {}
    Kind kind_;
    double sigma_;
};

/// Capillarity coefficient kappa(rho) of a Korteweg fluid.
class CapillarityLaw {
public:
    enum class Kind { constant, quantum };

    static CapillarityLaw constant(double kappa) {
        if (!(kappa >= 0.0)) throw ValidationError("capillarity must be non-negative");
        return CapillarityLaw(Kind::constant, kappa);
    }
    /// kappa(rho) = eps^2 / (4 rho), the quantum-pressure case.
    static CapillarityLaw quantum(double eps) {
        if (!(eps > 0.0)) throw ValidationError("eps must be positive");
        return CapillarityLaw(Kind::quantum, eps);
    }

    Kind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return param_; }
    std::string name() const { return kind_ == Kind::constant ? "constant" : "quantum"; }

    double kappa(double r) const {
        return kind_ == Kind::constant ? param_ : param_ * param_ / (4.0 * r);
    }
    double dkappa(double r) const {
        return kind_ == Kind::constant ? 0.0 : -param_ * param_ / (4.0 * r * r);
    }
    /// (rho kappa)'
    double rho_kappa_prime(double /*r*/) const {
        return kind_ == Kind::constant ? param_ : 0.0;
    }
    /// a(rho) = sqrt(rho kappa(rho)); eps/2 in the quantum case.
    double a(double r) const {
        return kind_ == Kind::constant ? std::sqrt(r * param_) : 0.5 * param_;
    }
    /// sqrt(kappa(rho)/rho), the factor in w = -sqrt(kappa/rho) grad rho.
    double w_factor(double r) const {
        return kind_ == Kind::constant ? std::sqrt(param_ / r) : 0.5 * param_ / r;
    }

private:
    CapillarityLaw(Kind k, double p) : kind_(k), param_(p) {}
    Kind kind_;
    double param_;
};

}  // namespace qhdlab
