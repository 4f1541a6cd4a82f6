#pragma once

#include <complex>
#include <numbers>
#include <variant>
#include <vector>

#include "retina/error.hpp"
#include "retina/stack.hpp"

// Normal-incidence thin-film reflectance by Airy recursion. Uses the n + ik,
// exp(-i w t) convention and shares no code with the modal solver, so it can
// serve as that solver's homogeneous-limit oracle.
namespace retina::tmm {

struct Result {
    std::complex<double> r;
    std::complex<double> t;
    double reflectance;
    // Power entering the substrate (zero for a perfect conductor).
    double transmittance;
};

inline Result solve(const LayerStack& stack, double wavelength_nm) {
    if (!stack.is_planar()) throw ValidationError("TMM requires a planar stack", "stack");
    if (!(wavelength_nm > 0.0)) throw ValidationError("wavelength must be positive", "wavelength");
    using cd = std::complex<double>;

    std::vector<cd> n;
    std::vector<double> d;
    n.push_back(stack.ambient.nk(wavelength_nm).index());
    d.push_back(0.0);
    for (const auto& layer : stack.layers) {
        const auto& u = std::get<UniformLayer>(layer);
        if (!(u.thickness_nm > 0.0)) {
            throw ValidationError("layer thickness must be > 0 nm", "thickness");
        }
        n.push_back(u.material.nk(wavelength_nm).index());
        d.push_back(u.thickness_nm);
    }
    const bool pec = std::holds_alternative<PerfectConductor>(stack.substrate);
    cd n_sub = pec ? cd{} : std::get<MaterialModel>(stack.substrate).nk(wavelength_nm).index();

    const std::size_t last = n.size() - 1;
    cd r, t;
    if (pec) {
        r = -1.0;
        t = 0.0;
    } else {
        r = (n[last] - n_sub) / (n[last] + n_sub);
        t = 2.0 * n[last] / (n[last] + n_sub);
    }
    const double k0 = 2.0 * std::numbers::pi / wavelength_nm;
    for (std::size_t j = last; j-- > 0;) {
        cd rho = (n[j] - n[j + 1]) / (n[j] + n[j + 1]);
        cd tau = 2.0 * n[j] / (n[j] + n[j + 1]);
        cd e = std::exp(cd{0.0, 1.0} * k0 * n[j + 1] * d[j + 1]);
        cd den = 1.0 + rho * r * e * e;
        t = tau * t * e / den;
        r = (rho + r * e * e) / den;
    }
    double n0 = n[0].real();
    double T = pec ? 0.0 : n_sub.real() / n0 * std::norm(t);
    return {r, t, std::norm(r), T};
}

inline double reflectance(const LayerStack& stack, double wavelength_nm) {
    return solve(stack, wavelength_nm).reflectance;
}

}  // namespace retina::tmm
