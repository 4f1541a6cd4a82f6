#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retina/error.hpp"
#include "retina/stack.hpp"

namespace retina::rcwa {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Diffraction orders (p, q) with |p| <= nx, |q| <= ny.
struct OrderSet {
    int nx = 0;
    int ny = 0;

    int size() const noexcept { return (2 * nx + 1) * (2 * ny + 1); }
    int index(int p, int q) const noexcept { return (p + nx) * (2 * ny + 1) + (q + ny); }
    int p(int i) const noexcept { return i / (2 * ny + 1) - nx; }
    int q(int i) const noexcept { return i % (2 * ny + 1) - ny; }
};

// Fourier coefficients c(dp, dq) for |dp| <= mx, |dq| <= my.
class FourierTable {
public:
    FourierTable() = default;
    FourierTable(int mx, int my) : mx_(mx), my_(my), data_((2 * mx + 1) * (2 * my + 1)) {}

    int mx() const noexcept { return mx_; }
    int my() const noexcept { return my_; }
    cd operator()(int dp, int dq) const { return data_[(dp + mx_) * (2 * my_ + 1) + dq + my_]; }
    cd& at(int dp, int dq) { return data_[(dp + mx_) * (2 * my_ + 1) + dq + my_]; }

private:
    int mx_ = 0;
    int my_ = 0;
    std::vector<cd> data_;
};

// Indicator function of the disc set: sum over discs of
// (pi R^2 / A) * 2 J1(|G| R) / (|G| R) * exp(-i G.c).
inline FourierTable disc_coefficients(const UnitCell& cell, int mx, int my) {
    FourierTable t(mx, my);
    const double area = cell.area_nm2();
    for (int p = -mx; p <= mx; ++p) {
        for (int q = -my; q <= my; ++q) {
            double gx = 2.0 * std::numbers::pi * p / cell.period_x_nm;
            double gy = 2.0 * std::numbers::pi * q / cell.period_y_nm;
            double g = std::hypot(gx, gy);
            cd sum = 0.0;
            for (const auto& d : cell.discs) {
                double r = 0.5 * d.diameter_nm;
                if (r <= 0.0) continue;
                double a = std::numbers::pi * r * r / area;
                double x = g * r;
                double shape = x < 1e-12 ? 1.0 : 2.0 * std::cyl_bessel_j(1.0, x) / x;
                sum += a * shape * std::polar(1.0, -(gx * d.x_nm + gy * d.y_nm));
            }
            t.at(p, q) = sum;
        }
    }
    return t;
}

// Fourier coefficients of n_x n_x, n_y n_y and n_x n_y, where n is the
// outward normal of the nearest disc edge (periodic images included).
struct NormalVectorTables {
    FourierTable xx;
    FourierTable yy;
    FourierTable xy;
};

namespace detail {

inline std::shared_ptr<const NormalVectorTables> compute_normal_vector_tables(
    const UnitCell& cell, int mx, int my) {
    const double px = cell.period_x_nm;
    const double py = cell.period_y_nm;
    // Roughly 512 x 512 samples for a square cell; at least 8 per finest fringe.
    const double h = std::sqrt(px * py / (512.0 * 512.0));
    auto even_at_least = [](double v, int floor_count) {
        int n = std::max(floor_count, static_cast<int>(std::ceil(v)));
        return n + (n % 2);
    };
    const int nx = even_at_least(px / h, 8 * mx + 16);
    const int ny = even_at_least(py / h, 8 * my + 16);

    std::vector<double> xs(nx), ys(ny);
    for (int i = 0; i < nx; ++i) xs[i] = -0.5 * px + (i + 0.5) * px / nx;
    for (int j = 0; j < ny; ++j) ys[j] = -0.5 * py + (j + 0.5) * py / ny;

    std::vector<cd> ex((2 * mx + 1) * nx), ey((2 * my + 1) * ny);
    for (int p = -mx; p <= mx; ++p) {
        for (int i = 0; i < nx; ++i) {
            ex[(p + mx) * nx + i] = std::polar(1.0, -2.0 * std::numbers::pi * p * xs[i] / px);
        }
    }
    for (int q = -my; q <= my; ++q) {
        for (int j = 0; j < ny; ++j) {
            ey[(q + my) * ny + j] = std::polar(1.0, -2.0 * std::numbers::pi * q * ys[j] / py);
        }
    }

    // Row transforms for the three products.
    const int np = 2 * mx + 1;
    std::vector<cd> rxx(static_cast<std::size_t>(ny) * np), ryy(rxx.size()), rxy(rxx.size());
    std::vector<double> fxx(nx), fyy(nx), fxy(nx);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            double best = std::numeric_limits<double>::infinity();
            double nxv = 1.0, nyv = 0.0;
            for (const auto& d : cell.discs) {
                double dx = std::remainder(xs[i] - d.x_nm, px);
                double dy = std::remainder(ys[j] - d.y_nm, py);
                double rr = std::hypot(dx, dy);
                double edge = rr - 0.5 * d.diameter_nm;
                if (edge < best && rr > 0.0) {
                    best = edge;
                    nxv = dx / rr;
                    nyv = dy / rr;
                }
            }
            fxx[i] = nxv * nxv;
            fyy[i] = nyv * nyv;
            fxy[i] = nxv * nyv;
        }
        for (int p = 0; p < np; ++p) {
            cd sxx = 0.0, syy = 0.0, sxy = 0.0;
            const cd* e = &ex[static_cast<std::size_t>(p) * nx];
            for (int i = 0; i < nx; ++i) {
                sxx += fxx[i] * e[i];
                syy += fyy[i] * e[i];
                sxy += fxy[i] * e[i];
            }
            rxx[static_cast<std::size_t>(j) * np + p] = sxx;
            ryy[static_cast<std::size_t>(j) * np + p] = syy;
            rxy[static_cast<std::size_t>(j) * np + p] = sxy;
        }
    }

    auto out = std::make_shared<NormalVectorTables>(
        NormalVectorTables{FourierTable(mx, my), FourierTable(mx, my), FourierTable(mx, my)});
    const double norm = 1.0 / (static_cast<double>(nx) * ny);
    for (int p = -mx; p <= mx; ++p) {
        for (int q = -my; q <= my; ++q) {
            cd sxx = 0.0, syy = 0.0, sxy = 0.0;
            const cd* e = &ey[static_cast<std::size_t>(q + my) * ny];
            for (int j = 0; j < ny; ++j) {
                std::size_t k = static_cast<std::size_t>(j) * np + (p + mx);
                sxx += rxx[k] * e[j];
                syy += ryy[k] * e[j];
                sxy += rxy[k] * e[j];
            }
            out->xx.at(p, q) = sxx * norm;
            out->yy.at(p, q) = syy * norm;
            out->xy.at(p, q) = sxy * norm;
        }
    }
    return out;
}

}  // namespace detail

// Cached per cell shape; a lone disc gives the same field for every radius.
inline std::shared_ptr<const NormalVectorTables> normal_vector_tables(const UnitCell& cell, int mx,
                                                                      int my) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const NormalVectorTables>> cache;

    std::ostringstream key;
    key.precision(15);
    key << mx << ':' << my << ':' << cell.period_y_nm / cell.period_x_nm;
    const bool single = cell.discs.size() == 1;
    for (const auto& d : cell.discs) {
        key << ':' << std::remainder(d.x_nm - cell.discs[0].x_nm, cell.period_x_nm) / cell.period_x_nm
            << ',' << std::remainder(d.y_nm - cell.discs[0].y_nm, cell.period_y_nm) / cell.period_x_nm
            << ',' << (single ? 0.0 : d.diameter_nm / cell.period_x_nm);
    }
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
    }
    // Coordinates relative to the first disc so mirror symmetries about it hold on the grid.
    UnitCell shifted = cell;
    for (auto& d : shifted.discs) {
        d.x_nm -= cell.discs[0].x_nm;
        d.y_nm -= cell.discs[0].y_nm;
    }
    auto tables = detail::compute_normal_vector_tables(shifted, mx, my);
    std::lock_guard lock(mutex);
    return cache.emplace(key.str(), std::move(tables)).first->second;
}

// Mirror symmetry of the disc set about the first disc's axis.
inline bool mirror_symmetric_x(const UnitCell& cell) {
    if (cell.discs.empty()) return true;
    const auto& o = cell.discs[0];
    for (const auto& a : cell.discs) {
        bool found = false;
        for (const auto& b : cell.discs) {
            double dx = std::remainder((a.x_nm - o.x_nm) + (b.x_nm - o.x_nm), cell.period_x_nm);
            double dy = std::remainder(a.y_nm - b.y_nm, cell.period_y_nm);
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

inline bool mirror_symmetric_y(const UnitCell& cell) {
    UnitCell t{cell.period_y_nm, cell.period_x_nm, {}};
    for (const auto& d : cell.discs) t.discs.push_back({d.y_nm, d.x_nm, d.diameter_nm});
    return mirror_symmetric_x(t);
}

// Parity of a Fourier-space field under a mirror; `none` when the mirror is
// not exploited.
enum class Parity : int { none = 0, even = 1, odd = -1 };

struct Sector {
    Parity x = Parity::none;
    Parity y = Parity::none;
};

inline Parity flip(Parity p) {
    return p == Parity::none ? p : (p == Parity::even ? Parity::odd : Parity::even);
}

// Orthonormal basis of the fields with a given parity. Each element groups
// the orders (+-p, +-q) it mixes.
class SectorBasis {
public:
    struct Element {
        int count = 0;
        std::array<int, 4> order{};
        std::array<double, 4> coef{};
    };

    SectorBasis() = default;

    SectorBasis(const OrderSet& orders, Sector sector) : orders_(orders) {
        owner_.assign(orders.size(), -1);
        owner_coef_.assign(orders.size(), 0.0);
        auto range = [](Parity par, int n) {
            if (par == Parity::none) return std::pair{-n, n};
            return std::pair{par == Parity::odd ? 1 : 0, n};
        };
        auto [p0, p1] = range(sector.x, orders.nx);
        auto [q0, q1] = range(sector.y, orders.ny);
        for (int p = p0; p <= p1; ++p) {
            for (int q = q0; q <= q1; ++q) {
                Element e;
                for (int sp : {1, -1}) {
                    if (sp == -1 && (sector.x == Parity::none || p == 0)) continue;
                    for (int sq : {1, -1}) {
                        if (sq == -1 && (sector.y == Parity::none || q == 0)) continue;
                        double c = 1.0;
                        if (sp == -1 && sector.x == Parity::odd) c = -c;
                        if (sq == -1 && sector.y == Parity::odd) c = -c;
                        e.order[e.count] = orders.index(sp * p, sq * q);
                        e.coef[e.count] = c;
                        ++e.count;
                    }
                }
                double s = 1.0 / std::sqrt(static_cast<double>(e.count));
                for (int k = 0; k < e.count; ++k) {
                    e.coef[k] *= s;
                    owner_[e.order[k]] = static_cast<int>(elements_.size());
                    owner_coef_[e.order[k]] = e.coef[k];
                }
                elements_.push_back(e);
            }
        }
    }

    int size() const noexcept { return static_cast<int>(elements_.size()); }
    const std::vector<Element>& elements() const noexcept { return elements_; }
    const OrderSet& orders() const noexcept { return orders_; }

    // Element containing `order`, or -1.
    int owner(int order) const { return owner_[order]; }
    double owner_coef(int order) const { return owner_coef_[order]; }

    // Reduced coordinates -> per-order amplitudes.
    CVector expand(const Eigen::Ref<const CVector>& reduced) const {
        CVector full = CVector::Zero(orders_.size());
        for (int i = 0; i < size(); ++i) {
            const auto& e = elements_[i];
            for (int k = 0; k < e.count; ++k) full[e.order[k]] += e.coef[k] * reduced[i];
        }
        return full;
    }

    // A representative order of element i (the one with p, q >= 0).
    int representative(int i) const { return elements_[i].order[0]; }

private:
    OrderSet orders_;
    std::vector<Element> elements_;
    std::vector<int> owner_;
    std::vector<double> owner_coef_;
};

// <out_i | T | in_j> for the convolution operator T(m, n) = c(p_m - p_n, q_m - q_n).
inline CMatrix reduce_toeplitz(const SectorBasis& out, const SectorBasis& in,
                               const FourierTable& c) {
    const auto& o = out.orders();
    CMatrix m(out.size(), in.size());
    for (int i = 0; i < out.size(); ++i) {
        const auto& a = out.elements()[i];
        for (int j = 0; j < in.size(); ++j) {
            const auto& b = in.elements()[j];
            cd s = 0.0;
            for (int u = 0; u < a.count; ++u) {
                for (int v = 0; v < b.count; ++v) {
                    s += a.coef[u] * b.coef[v] *
                         c(o.p(a.order[u]) - o.p(b.order[v]), o.q(a.order[u]) - o.q(b.order[v]));
                }
            }
            m(i, j) = s;
        }
    }
    return m;
}

// <out_i | D | in_j> for a diagonal operator D(m, m) = d(p_m, q_m).
template <class F>
CMatrix reduce_diagonal(const SectorBasis& out, const SectorBasis& in, F&& d) {
    const auto& o = out.orders();
    CMatrix m = CMatrix::Zero(out.size(), in.size());
    for (int j = 0; j < in.size(); ++j) {
        const auto& b = in.elements()[j];
        for (int v = 0; v < b.count; ++v) {
            int order = b.order[v];
            int i = out.owner(order);
            if (i < 0) continue;
            m(i, j) += out.owner_coef(order) * b.coef[v] * cd(d(o.p(order), o.q(order)));
        }
    }
    return m;
}

}  // namespace retina::rcwa
