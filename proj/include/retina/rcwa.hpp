#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "retina/detail/eigen_solve.hpp"
#include "retina/detail/parallel.hpp"
#include "retina/error.hpp"
#include "retina/fourier.hpp"
#include "retina/spectrum.hpp"
#include "retina/stack.hpp"

// Fourier modal method at normal incidence. Fields follow the exp(+j w t)
// convention internally (permittivity conjugated), with a stable reflection
// matrix recursion from the substrate upward.
namespace retina::rcwa {

enum class Polarization { x, y };

struct SolverOptions {
    // Harmonics per axis; orders |p| <= Nx, |q| <= Ny.
    int harmonics = 7;
    // Per-axis overrides; 0 means "use `harmonics`".
    int harmonics_x = 0;
    int harmonics_y = 0;
    std::size_t memory_budget_bytes = std::size_t{1} << 30;
    double max_period_nm = 4000.0;
    // Run homogeneous patterned layers through the eigenproblem too.
    bool force_eigenmodes = false;
    bool use_symmetry = true;
    // Normal-vector inverse rule; false gives plain Laurent products.
    bool inverse_rule = true;
};

struct OrderEfficiency {
    int mx = 0;
    int my = 0;
    double value = 0.0;
};

struct DiffractionResult {
    double wavelength_nm = 0.0;
    // One entry per retained order; evanescent orders carry 0.
    std::vector<OrderEfficiency> reflected;
    std::vector<OrderEfficiency> transmitted;
    double total_R = 0.0;
    double total_T = 0.0;
    double absorbed = 0.0;
    // Per stack layer, top to bottom, from Poynting-flux differences.
    std::vector<double> layer_absorption;
    // Power entering an absorbing substrate.
    double substrate_absorption = 0.0;
    // 1 - net downward flux in the ambient; equals total_R up to round-off.
    double flux_R = 0.0;
};

namespace detail {

inline bool same_dispersion(const MaterialModel& a, const MaterialModel& b) {
    auto x = a.samples();
    auto y = b.samples();
    return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](const auto& s, const auto& t) {
        return s.wavelength_nm == t.wavelength_nm && s.n == t.n && s.k == t.k;
    });
}

inline bool c4_symmetric(const UnitCell& cell) {
    if (cell.period_x_nm != cell.period_y_nm) return false;
    if (!mirror_symmetric_x(cell) || !mirror_symmetric_y(cell)) return false;
    const auto& o = cell.discs.empty() ? DiscSite{} : cell.discs[0];
    for (const auto& a : cell.discs) {
        bool found = false;
        for (const auto& b : cell.discs) {
            double dx = std::remainder((a.x_nm - o.x_nm) - (b.y_nm - o.y_nm), cell.period_x_nm);
            double dy = std::remainder((a.y_nm - o.y_nm) - (b.x_nm - o.x_nm), cell.period_y_nm);
            if (std::abs(dx) < 1e-9 && std::abs(dy) < 1e-9 &&
                std::abs(a.diameter_nm - b.diameter_nm) < 1e-9) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

inline cd principal_root(cd mu) {
    cd g = std::sqrt(mu);
    if (g.real() < 0.0) g = -g;
    if (std::abs(g) < 1e-10) g = 1e-10;
    return g;
}

}  // namespace detail

class Solver {
public:
    explicit Solver(LayerStack stack, SolverOptions options = {})
        : stack_(std::move(stack)), options_(options) {
        stack_.validate();
        if (options_.harmonics < 1 || options_.harmonics_x < 0 || options_.harmonics_y < 0) {
            throw ValidationError("harmonic count must be >= 1", "harmonics");
        }
        const PatternedLayer* pl = stack_.patterned_layer();
        if (pl) {
            patterned_index_ = 0;
            while (!std::holds_alternative<PatternedLayer>(stack_.layers[patterned_index_])) {
                ++patterned_index_;
            }
            cell_ = pl->cell;
            if (cell_.period_x_nm > options_.max_period_nm ||
                cell_.period_y_nm > options_.max_period_nm) {
                throw ValidationError("cell period exceeds the configured limit", "period");
            }
            bool has_disc = std::any_of(cell_.discs.begin(), cell_.discs.end(),
                                        [](const DiscSite& d) { return d.diameter_nm > 0.0; });
            homogeneous_ = !has_disc || detail::same_dispersion(pl->disc, pl->host);
            orders_.nx = options_.harmonics_x > 0 ? options_.harmonics_x : options_.harmonics;
            orders_.ny = options_.harmonics_y > 0 ? options_.harmonics_y : options_.harmonics;
        } else {
            cell_ = UnitCell{1000.0, 1000.0, {}};
            homogeneous_ = true;
            orders_ = {0, 0};
        }
        eigen_path_ = pl && (!homogeneous_ || options_.force_eigenmodes);

        bool sym = options_.use_symmetry && orders_.nx > 0 && orders_.ny > 0;
        bool sx = sym && mirror_symmetric_x(cell_);
        bool sy = sym && mirror_symmetric_y(cell_);
        c4_ = sx && sy && detail::c4_symmetric(cell_);

        std::size_t m = static_cast<std::size_t>(2 * orders_.size());
        if (sx) m = (m + 3) / 4 + orders_.nx + orders_.ny + 2;
        else if (sy) m = (m + 1) / 2 + orders_.nx + 1;
        // About two dozen dense M x M complex matrices live at once.
        if (m * m * sizeof(cd) * 24 > options_.memory_budget_bytes) {
            throw ComputationError("harmonic count too large for the configured memory budget");
        }

        std::optional<FourierTable> chi;
        std::shared_ptr<const NormalVectorTables> nv;
        if (eigen_path_) {
            chi = disc_coefficients(cell_, 2 * orders_.nx, 2 * orders_.ny);
            if (options_.inverse_rule && !homogeneous_) {
                nv = normal_vector_tables(cell_, 2 * orders_.nx, 2 * orders_.ny);
            }
        }
        auto sector = [&](Parity px, Parity py) {
            return Sector{sx ? px : Parity::none, sy ? py : Parity::none};
        };
        using enum Parity;
        channels_[0] = make_channel(sector(even, even), sector(odd, odd), sector(odd, even), chi,
                                    nv, false);
        channels_[1] = make_channel(sector(odd, odd), sector(even, even), sector(even, odd), chi,
                                    nv, true);
    }

    const LayerStack& stack() const noexcept { return stack_; }
    const SolverOptions& options() const noexcept { return options_; }
    const OrderSet& orders() const noexcept { return orders_; }
    const UnitCell& cell() const noexcept { return cell_; }

    // Unpolarized: mean of the x- and y-polarized solutions.
    DiffractionResult solve(double wavelength_nm) const {
        DiffractionResult a = solve(wavelength_nm, Polarization::x);
        DiffractionResult b;
        if (c4_) {
            // Rotating the cell by 90 degrees maps x-polarization onto y.
            b = a;
            for (std::size_t i = 0; i < a.reflected.size(); ++i) {
                int j = orders_.index(a.reflected[i].my, a.reflected[i].mx);
                b.reflected[j].value = a.reflected[i].value;
                b.transmitted[j].value = a.transmitted[i].value;
            }
        } else {
            b = solve(wavelength_nm, Polarization::y);
        }
        DiffractionResult r = a;
        for (std::size_t i = 0; i < r.reflected.size(); ++i) {
            r.reflected[i].value = 0.5 * (a.reflected[i].value + b.reflected[i].value);
            r.transmitted[i].value = 0.5 * (a.transmitted[i].value + b.transmitted[i].value);
        }
        r.total_R = 0.5 * (a.total_R + b.total_R);
        r.total_T = 0.5 * (a.total_T + b.total_T);
        r.absorbed = 1.0 - r.total_R - r.total_T;
        for (std::size_t i = 0; i < r.layer_absorption.size(); ++i) {
            r.layer_absorption[i] = 0.5 * (a.layer_absorption[i] + b.layer_absorption[i]);
        }
        r.substrate_absorption = 0.5 * (a.substrate_absorption + b.substrate_absorption);
        r.flux_R = 0.5 * (a.flux_R + b.flux_R);
        return r;
    }

    DiffractionResult solve(double wavelength_nm, Polarization pol) const {
        if (!(wavelength_nm > 0.0)) {
            throw ValidationError("wavelength must be positive", "wavelength");
        }
        const Channel& ch = channels_[pol == Polarization::x ? 0 : 1];
        const double wl = wavelength_nm;
        const int na = ch.a.size();
        const int nb = ch.b.size();
        const int m = na + nb;
        const CMatrix eye = CMatrix::Identity(m, m);

        // Media top to bottom: ambient, layers, substrate (absent for a perfect conductor).
        std::vector<Medium> media;
        const cd eps_amb = stack_.ambient.nk(wl).permittivity();
        const double n_amb = std::sqrt(eps_amb.real());
        media.push_back(uniform_medium(ch, eps_amb, 0.0, wl));
        for (std::size_t l = 0; l < stack_.layers.size(); ++l) {
            if (auto u = std::get_if<UniformLayer>(&stack_.layers[l])) {
                media.push_back(uniform_medium(ch, u->material.nk(wl).permittivity(),
                                               u->thickness_nm, wl));
            } else {
                const auto& p = std::get<PatternedLayer>(stack_.layers[l]);
                if (eigen_path_) {
                    media.push_back(patterned_medium(ch, p, wl));
                } else {
                    media.push_back(
                        uniform_medium(ch, p.host.nk(wl).permittivity(), p.thickness_nm, wl));
                }
            }
        }
        const bool pec = std::holds_alternative<PerfectConductor>(stack_.substrate);
        const bool opaque = stack_.opaque_substrate();
        cd eps_sub = 0.0;
        if (!pec) {
            eps_sub = std::get<MaterialModel>(stack_.substrate).nk(wl).permittivity();
            media.push_back(uniform_medium(ch, eps_sub, 0.0, wl));
        }
        const std::size_t nl = stack_.layers.size();

        // Reflection matrices at the top and bottom of every layer, and the
        // interface solves that carry amplitudes downward.
        std::vector<CMatrix> gamma_top(nl + 1), gamma_bot(nl + 1);
        std::vector<Eigen::PartialPivLU<CMatrix>> down(nl + 2);
        auto cross = [&](std::size_t u, std::size_t d, const CMatrix& g) {
            CMatrix f = apply_w_inverse(media[u], apply_w(media[d], CMatrix(eye + g)));
            CMatrix h = media[u].v_inv * (media[d].v * (g - eye));
            Eigen::PartialPivLU<CMatrix> lu(f - h);
            check_conditioning(lu);
            CMatrix out = (f + h) * lu.inverse();
            down[d] = std::move(lu);
            return out;
        };
        if (pec) {
            gamma_bot[nl] = -eye;
        } else {
            gamma_bot[nl] = cross(nl, nl + 1, CMatrix::Zero(m, m));
        }
        for (std::size_t j = nl; j >= 1; --j) {
            const CVector& x = media[j].x;
            gamma_top[j] = x.asDiagonal() * gamma_bot[j] * x.asDiagonal();
            gamma_bot[j - 1] = cross(j - 1, j, gamma_top[j]);
        }

        CVector inc = CVector::Zero(m);
        inc[pol == Polarization::x ? ch.incident : na + ch.incident] = 1.0;

        auto flux = [&](const Medium& med, const CVector& a, const CMatrix& g) {
            CVector b = g * a;
            CVector e = apply_w_vec(med, a + b);
            CVector h = med.v * (b - a);
            cd s = 0.0;
            for (int i = 0; i < na; ++i) s += e[i] * std::conj(h[nb + i]);
            for (int i = 0; i < nb; ++i) s -= e[na + i] * std::conj(h[i]);
            return s.imag() / n_amb;
        };

        DiffractionResult res;
        res.wavelength_nm = wl;
        res.layer_absorption.assign(nl, 0.0);
        res.flux_R = 1.0 - flux(media[0], inc, gamma_bot[0]);

        CVector a = inc;
        for (std::size_t j = 1; j <= nl; ++j) {
            CVector top = 2.0 * down[j].solve(a);
            CVector bot = media[j].x.asDiagonal() * top;
            res.layer_absorption[j - 1] =
                flux(media[j], top, gamma_top[j]) - flux(media[j], bot, gamma_bot[j]);
            a = std::move(bot);
        }
        double into_sub = 0.0;
        CVector t_amp;
        if (!pec) {
            t_amp = 2.0 * down[nl + 1].solve(a);
            into_sub = flux(media[nl + 1], t_amp, CMatrix::Zero(m, m));
        }

        CVector r_amp = gamma_bot[0] * inc;
        res.reflected = order_efficiencies(ch, r_amp, eps_amb, n_amb, wl);
        if (!pec && !opaque) {
            res.transmitted = order_efficiencies(ch, t_amp, eps_sub, n_amb, wl);
        } else {
            res.transmitted = order_efficiencies(ch, CVector::Zero(m), eps_amb, n_amb, wl);
            res.substrate_absorption = into_sub;
        }
        for (const auto& o : res.reflected) res.total_R += o.value;
        for (const auto& o : res.transmitted) res.total_T += o.value;
        res.absorbed = 1.0 - res.total_R - res.total_T;
        return res;
    }

private:
    struct Channel {
        SectorBasis a;  // Ex and Hy
        SectorBasis b;  // Ey and Hx
        SectorBasis z;  // Ez
        int incident = 0;
        // |k_parallel / wavelength|^2 per E-space ([a; b]) and H-space ([b; a]) element.
        std::vector<double> k2_e, k2_h;
        // Unit wavevector operators (entries p/Px, q/Py); names read out_in.
        CMatrix kx_za, kx_az, ky_zb, ky_bz, kxky_ba, kykx_ab, kx2_bb, ky2_aa, kx2_aa, ky2_bb;
        CMatrix chi_a, chi_b, chi_z;
        CMatrix nxx_a, nyy_b, nxy_ab, nxy_ba;
    };

    struct Medium {
        bool identity_w = true;
        CMatrix w;
        Eigen::PartialPivLU<CMatrix> w_lu;
        CMatrix v;
        CMatrix v_inv;
        CVector x;
    };

    Channel make_channel(Sector sa, Sector sb, Sector sz, const std::optional<FourierTable>& chi,
                         const std::shared_ptr<const NormalVectorTables>& nv, bool y_pol) const {
        Channel c;
        c.a = SectorBasis(orders_, sa);
        c.b = SectorBasis(orders_, sb);
        c.z = SectorBasis(orders_, sz);
        const SectorBasis& carrier = y_pol ? c.b : c.a;
        c.incident = carrier.owner(orders_.index(0, 0));
        if (c.incident < 0) throw ComputationError("incident order missing from its sector");

        const double px = cell_.period_x_nm;
        const double py = cell_.period_y_nm;
        auto kx = [px](int p, int) { return p / px; };
        auto ky = [py](int, int q) { return q / py; };
        c.kx_za = reduce_diagonal(c.z, c.a, kx);
        c.kx_az = reduce_diagonal(c.a, c.z, kx);
        c.ky_zb = reduce_diagonal(c.z, c.b, ky);
        c.ky_bz = reduce_diagonal(c.b, c.z, ky);
        c.kxky_ba = reduce_diagonal(c.b, c.a, [&](int p, int q) { return kx(p, q) * ky(p, q); });
        c.kykx_ab = reduce_diagonal(c.a, c.b, [&](int p, int q) { return kx(p, q) * ky(p, q); });
        c.kx2_bb = reduce_diagonal(c.b, c.b, [&](int p, int q) { return kx(p, q) * kx(p, q); });
        c.ky2_aa = reduce_diagonal(c.a, c.a, [&](int p, int q) { return ky(p, q) * ky(p, q); });
        c.kx2_aa = reduce_diagonal(c.a, c.a, [&](int p, int q) { return kx(p, q) * kx(p, q); });
        c.ky2_bb = reduce_diagonal(c.b, c.b, [&](int p, int q) { return ky(p, q) * ky(p, q); });
        auto k2 = [&](const SectorBasis& s, std::vector<double>& out) {
            for (int i = 0; i < s.size(); ++i) {
                int o = s.representative(i);
                double u = orders_.p(o) / px, v = orders_.q(o) / py;
                out.push_back(u * u + v * v);
            }
        };
        k2(c.a, c.k2_e);
        k2(c.b, c.k2_e);
        k2(c.b, c.k2_h);
        k2(c.a, c.k2_h);
        if (chi) {
            c.chi_a = reduce_toeplitz(c.a, c.a, *chi);
            c.chi_b = reduce_toeplitz(c.b, c.b, *chi);
            c.chi_z = reduce_toeplitz(c.z, c.z, *chi);
        }
        if (nv) {
            c.nxx_a = reduce_toeplitz(c.a, c.a, nv->xx);
            c.nyy_b = reduce_toeplitz(c.b, c.b, nv->yy);
            c.nxy_ab = reduce_toeplitz(c.a, c.b, nv->xy);
            c.nxy_ba = reduce_toeplitz(c.b, c.a, nv->xy);
        }
        return c;
    }

    static void check_conditioning(const Eigen::PartialPivLU<CMatrix>& lu) {
        if (lu.rows() > 0 && !(lu.rcond() > 1e-14)) {
            throw ComputationError("singular interface system in the modal recursion");
        }
    }

    static CMatrix apply_w(const Medium& m, const CMatrix& x) {
        return m.identity_w ? x : CMatrix(m.w * x);
    }
    static CVector apply_w_vec(const Medium& m, const CVector& x) {
        return m.identity_w ? x : CVector(m.w * x);
    }
    static CMatrix apply_w_inverse(const Medium& m, const CMatrix& x) {
        return m.identity_w ? x : CMatrix(m.w_lu.solve(x));
    }

    // Q for an isotropic uniform medium, rows [Hx(b); Hy(a)], columns [Ex(a); Ey(b)].
    CMatrix uniform_q(const Channel& ch, cd eps_r, double wl) const {
        const int na = ch.a.size(), nb = ch.b.size();
        const double w2 = wl * wl;
        CMatrix q(na + nb, na + nb);
        q.topLeftCorner(nb, na) = w2 * ch.kxky_ba;
        q.topRightCorner(nb, nb) = eps_r * CMatrix::Identity(nb, nb) - w2 * ch.kx2_bb;
        q.bottomLeftCorner(na, na) = w2 * ch.ky2_aa - eps_r * CMatrix::Identity(na, na);
        q.bottomRightCorner(na, nb) = -w2 * ch.kykx_ab;
        return q;
    }

    // Same operator with E and H roles swapped: rows [Ex(a); Ey(b)], columns [Hx(b); Hy(a)].
    CMatrix uniform_q_swapped(const Channel& ch, cd eps_r, double wl) const {
        const int na = ch.a.size(), nb = ch.b.size();
        const double w2 = wl * wl;
        CMatrix q(na + nb, na + nb);
        q.topLeftCorner(na, nb) = w2 * ch.kykx_ab;
        q.topRightCorner(na, na) = eps_r * CMatrix::Identity(na, na) - w2 * ch.kx2_aa;
        q.bottomLeftCorner(nb, nb) = w2 * ch.ky2_bb - eps_r * CMatrix::Identity(nb, nb);
        q.bottomRightCorner(nb, na) = -w2 * ch.kxky_ba;
        return q;
    }

    // Normalized k_z of a plane wave with transverse |k|^2 = kt2. An order
    // exactly at grazing (Rayleigh anomaly) is nudged to a tiny evanescent
    // value so it carries no flux; R is continuous there.
    static cd order_kz(cd eps_phys, double kt2) {
        cd kz = std::conj(std::sqrt(eps_phys - kt2));
        if (std::abs(kz) < kGrazing) kz = cd(0.0, -kGrazing);
        return kz;
    }
    static constexpr double kGrazing = 1e-10;

    static CVector uniform_roots(const std::vector<double>& k2, cd eps_phys, double wl) {
        CVector g(static_cast<Eigen::Index>(k2.size()));
        for (std::size_t i = 0; i < k2.size(); ++i) {
            g[static_cast<Eigen::Index>(i)] = cd(0.0, 1.0) * order_kz(eps_phys, wl * wl * k2[i]);
        }
        return g;
    }

    Medium uniform_medium(const Channel& ch, cd eps_phys, double thickness, double wl) const {
        const double k0 = 2.0 * std::numbers::pi / wl;
        const cd eps_r = std::conj(eps_phys);
        CVector g = uniform_roots(ch.k2_e, eps_phys, wl);
        Medium med;
        med.v = uniform_q(ch, eps_r, wl) * g.cwiseInverse().asDiagonal();
        // Q^2 = eps gamma^2 order by order, so V^-1 = Q gamma^-1 / eps in closed
        // form; this stays exact at grazing orders where an LU would not.
        med.v_inv = uniform_q_swapped(ch, eps_r, wl) *
                    uniform_roots(ch.k2_h, eps_phys, wl).cwiseInverse().asDiagonal() / eps_r;
        med.x = (-g * k0 * thickness).array().exp();
        return med;
    }

    Medium patterned_medium(const Channel& ch, const PatternedLayer& layer, double wl) const {
        const int na = ch.a.size(), nb = ch.b.size(), nz = ch.z.size();
        const int m = na + nb;
        const double w2 = wl * wl;
        const double k0 = 2.0 * std::numbers::pi / wl;
        const cd ed = std::conj(layer.disc.nk(wl).permittivity());
        const cd eh = std::conj(layer.host.nk(wl).permittivity());
        auto conv = [](cd host, cd disc, const CMatrix& chi) {
            CMatrix e = (disc - host) * chi;
            e.diagonal().array() += host;
            return e;
        };
        CMatrix eps_a = conv(eh, ed, ch.chi_a);
        CMatrix eps_b = conv(eh, ed, ch.chi_b);
        Eigen::PartialPivLU<CMatrix> ez_lu(conv(eh, ed, ch.chi_z));
        check_conditioning(ez_lu);

        CMatrix exx = eps_a, eyy = eps_b;
        CMatrix exy = CMatrix::Zero(na, nb), eyx = CMatrix::Zero(nb, na);
        if (ch.nxx_a.size() > 0) {
            CMatrix da = eps_a - conv(1.0 / eh, 1.0 / ed, ch.chi_a).inverse();
            CMatrix db = eps_b - conv(1.0 / eh, 1.0 / ed, ch.chi_b).inverse();
            exx -= 0.5 * (da * ch.nxx_a + ch.nxx_a * da);
            eyy -= 0.5 * (db * ch.nyy_b + ch.nyy_b * db);
            exy = -0.5 * (da * ch.nxy_ab + ch.nxy_ab * db);
            eyx = -0.5 * (db * ch.nxy_ba + ch.nxy_ba * da);
        }

        // Ez^-1 applied to the Kx and Ky columns once.
        CMatrix ez_kx = ez_lu.solve(ch.kx_za);
        CMatrix ez_ky = ez_lu.solve(ch.ky_zb);
        (void)nz;

        // P maps [Hx(b); Hy(a)] to d/dz [Ex(a); Ey(b)].
        CMatrix p(m, m);
        p.topLeftCorner(na, nb) = w2 * ch.kx_az * ez_ky;
        p.topRightCorner(na, na) = CMatrix::Identity(na, na) - w2 * ch.kx_az * ez_kx;
        p.bottomLeftCorner(nb, nb) = w2 * ch.ky_bz * ez_ky - CMatrix::Identity(nb, nb);
        p.bottomRightCorner(nb, na) = -w2 * ch.ky_bz * ez_kx;

        CMatrix q(m, m);
        q.topLeftCorner(nb, na) = w2 * ch.kxky_ba + eyx;
        q.topRightCorner(nb, nb) = eyy - w2 * ch.kx2_bb;
        q.bottomLeftCorner(na, na) = w2 * ch.ky2_aa - exx;
        q.bottomRightCorner(na, nb) = -w2 * ch.kykx_ab - exy;

        auto eig = retina::detail::eigen_decompose(p * q);
        CVector g(m);
        for (int i = 0; i < m; ++i) g[i] = detail::principal_root(eig.values[i]);

        Medium med;
        med.identity_w = false;
        med.w = std::move(eig.vectors);
        med.w_lu.compute(med.w);
        check_conditioning(med.w_lu);
        med.v = q * med.w * g.cwiseInverse().asDiagonal();
        Eigen::PartialPivLU<CMatrix> v_lu(med.v);
        check_conditioning(v_lu);
        med.v_inv = v_lu.inverse();
        med.x = (-g * k0 * layer.thickness_nm).array().exp();
        return med;
    }

    std::vector<OrderEfficiency> order_efficiencies(const Channel& ch, const CVector& amp,
                                                    cd eps, double n_amb, double wl) const {
        const int na = ch.a.size(), nb = ch.b.size();
        CVector ex = ch.a.expand(amp.head(na));
        CVector ey = ch.b.expand(amp.tail(nb));
        std::vector<OrderEfficiency> out(orders_.size());
        for (int i = 0; i < orders_.size(); ++i) {
            int p = orders_.p(i), q = orders_.q(i);
            double kx = wl * p / cell_.period_x_nm;
            double ky = wl * q / cell_.period_y_nm;
            cd kz = order_kz(eps, kx * kx + ky * ky);
            double value = 0.0;
            if (kz.real() > 0.0 && std::abs(kz.imag()) < 1e-12) {
                cd ez = (kx * ex[i] + ky * ey[i]) / kz;
                value = kz.real() / n_amb * (std::norm(ex[i]) + std::norm(ey[i]) + std::norm(ez));
            }
            out[i] = {p, q, value};
        }
        return out;
    }

    LayerStack stack_;
    SolverOptions options_;
    UnitCell cell_;
    OrderSet orders_;
    std::size_t patterned_index_ = 0;
    bool homogeneous_ = true;
    bool eigen_path_ = false;
    bool c4_ = false;
    std::array<Channel, 2> channels_;
};

inline DiffractionResult rcwa_reflectance(const LayerStack& stack, double wavelength_nm,
                                          int harmonics = 7) {
    SolverOptions o;
    o.harmonics = harmonics;
    return Solver(stack, o).solve(wavelength_nm);
}

// total_R over a wavelength grid. Wavelengths are shared out over worker
// threads; each solve is single-threaded and the output does not depend on
// the thread count.
inline Spectrum spectrum_sweep(const Solver& solver, std::span<const double> grid,
                               unsigned threads = 0) {
    for (double w : grid) {
        if (!solver.stack().covers(w)) {
            throw ValidationError("wavelength " + std::to_string(w) +
                                      " nm outside the material tables",
                                  "grid");
        }
    }
    std::vector<double> values(grid.size());
    retina::detail::parallel_for(grid.size(), threads,
                                 [&](std::size_t i) { values[i] = solver.solve(grid[i]).total_R; });
    return {std::vector<double>(grid.begin(), grid.end()), std::move(values)};
}

inline Spectrum spectrum_sweep(const LayerStack& stack, std::span<const double> grid,
                               SolverOptions options = {}) {
    return spectrum_sweep(Solver(stack, options), grid);
}

struct AbsorptionBalance {
    double total = 0.0;
    // Stack layers top to bottom, then the substrate.
    std::vector<double> per_layer;
    std::vector<std::string> labels;
};

inline AbsorptionBalance absorption_balance(const LayerStack& stack, double wavelength_nm,
                                            SolverOptions options = {}) {
    if (!stack.opaque_substrate()) {
        throw ValidationError("absorption balance requires an opaque substrate", "substrate");
    }
    auto r = Solver(stack, options).solve(wavelength_nm);
    AbsorptionBalance b;
    b.total = 1.0 - r.total_R;
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        b.per_layer.push_back(r.layer_absorption[i]);
        if (auto u = std::get_if<UniformLayer>(&stack.layers[i])) {
            b.labels.push_back(u->material.name());
        } else {
            b.labels.push_back("patterned:" + std::get<PatternedLayer>(stack.layers[i]).disc.name());
        }
    }
    b.per_layer.push_back(r.substrate_absorption);
    b.labels.push_back(std::holds_alternative<PerfectConductor>(stack.substrate)
                           ? std::string("perfect conductor")
                           : std::get<MaterialModel>(stack.substrate).name());
    return b;
}

// Subpixel columns side by side along X, one disc per column per Y period.
// `spacings_nm[i]` is the edge gap after column i (the last wraps around).
// The Y period is the largest column lattice period.
inline UnitCell supercell(std::span<const MetaPixelGeometry> columns,
                          std::span<const double> spacings_nm) {
    if (columns.empty()) throw ValidationError("supercell needs at least one column", "entries");
    if (spacings_nm.size() != columns.size()) {
        throw ValidationError("need one spacing per column", "T");
    }
    UnitCell c;
    double x = 0.0;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        columns[i].validate();
        if (columns[i].thickness_nm != columns[0].thickness_nm) {
            throw ValidationError("supercell columns must share one film thickness", "t");
        }
        if (!(spacings_nm[i] >= 0.0)) throw ValidationError("spacings must be >= 0 nm", "T");
        c.period_y_nm = std::max(c.period_y_nm, columns[i].period_nm());
        double d = columns[i].disc_diameter_nm;
        if (i > 0) x += 0.5 * d;
        c.discs.push_back({x, 0.0, d});
        x += 0.5 * d + spacings_nm[i];
    }
    c.period_x_nm = x + 0.5 * columns[0].disc_diameter_nm;
    c.discs.erase(std::remove_if(c.discs.begin(), c.discs.end(),
                                 [](const DiscSite& s) { return s.diameter_nm <= 0.0; }),
                  c.discs.end());
    if (!(c.period_x_nm > 0.0)) throw ValidationError("supercell period must be positive", "T");
    return c;
}

inline LayerStack supercell_stack(std::span<const MetaPixelGeometry> columns,
                                  std::span<const double> spacings_nm,
                                  const MaterialModel& ambient, RedoxState state) {
    UnitCell cell = supercell(columns, spacings_nm);
    LayerStack s = mirror_stack(ambient);
    s.layers.insert(s.layers.begin(),
                    PatternedLayer{wo3(state), ambient, columns[0].thickness_nm, std::move(cell)});
    return s;
}

// Harmonics scaled with the period so the reciprocal-space cutoff matches
// a single cell solved at `options.harmonics`.
inline SolverOptions supercell_options(const UnitCell& cell, SolverOptions options) {
    if (options.harmonics_x == 0) {
        options.harmonics_x = std::max(
            1, static_cast<int>(std::lround(options.harmonics * cell.period_x_nm / cell.period_y_nm)));
    }
    if (options.harmonics_y == 0) options.harmonics_y = options.harmonics;
    return options;
}

inline DiffractionResult supercell_reflectance(std::span<const MetaPixelGeometry> columns,
                                               std::span<const double> spacings_nm,
                                               const MaterialModel& ambient, RedoxState state,
                                               double wavelength_nm, SolverOptions options = {}) {
    LayerStack s = supercell_stack(columns, spacings_nm, ambient, state);
    const auto& cell = std::get<PatternedLayer>(s.layers.front()).cell;
    return Solver(s, supercell_options(cell, options)).solve(wavelength_nm);
}

}  // namespace retina::rcwa
