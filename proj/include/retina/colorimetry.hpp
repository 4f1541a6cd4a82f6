#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retina/detail/tables.hpp"
#include "retina/error.hpp"
#include "retina/spectrum.hpp"

namespace retina {

struct XYZ {
    double X = 0.0;
    double Y = 0.0;
    double Z = 0.0;

    friend bool operator==(const XYZ&, const XYZ&) = default;
};

struct Chromaticity {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Chromaticity&, const Chromaticity&) = default;
};

// Gamma-encoded sRGB in [0, 1].
struct SRGB {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    bool out_of_gamut = false;
};

struct LinearRGB {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

struct CIEColor {
    XYZ xyz;
    // Empty for black, where chromaticity is undefined.
    std::optional<Chromaticity> xy;
    SRGB srgb;
};

enum class Illuminant { d65, equal_energy };

inline constexpr XYZ kD65White{0.95047, 1.0, 1.08883};
inline constexpr Chromaticity kD65WhitePoint{0.3127, 0.3290};

// --- spectra -------------------------------------------------------------

inline Spectrum normalize_to_reference(const Spectrum& raw, const Spectrum& reference) {
    if (!raw.same_grid(reference)) {
        throw ValidationError("spectrum and reference are on different grids", "grid");
    }
    std::vector<double> v(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!(reference[i] > 0.0)) {
            throw ValidationError("reference must be positive at " +
                                      std::to_string(reference.wavelength(i)) + " nm",
                                  "reference");
        }
        v[i] = raw[i] / reference[i];
    }
    auto w = raw.wavelengths();
    return {std::vector<double>(w.begin(), w.end()), std::move(v)};
}

namespace detail {

struct CmfSample {
    double xbar, ybar, zbar, d65;
};

inline CmfSample cmf_at(double wavelength_nm) {
    const auto& t = kCie1931;
    if (wavelength_nm < t.front().wavelength_nm || wavelength_nm > t.back().wavelength_nm) {
        throw ValidationError("wavelength " + std::to_string(wavelength_nm) +
                                  " nm outside the colour-matching tables",
                              "grid");
    }
    auto hi = std::lower_bound(t.begin(), t.end(), wavelength_nm,
                               [](const CmfRow& r, double w) { return r.wavelength_nm < w; });
    if (hi->wavelength_nm == wavelength_nm) return {hi->xbar, hi->ybar, hi->zbar, hi->d65};
    auto lo = hi - 1;
    double s = (wavelength_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
    auto mix = [s](double a, double b) { return a + s * (b - a); };
    return {mix(lo->xbar, hi->xbar), mix(lo->ybar, hi->ybar), mix(lo->zbar, hi->zbar),
            mix(lo->d65, hi->d65)};
}

// Trapezoid weights times illuminant times CMFs, normalized so a unit
// reflector has Y = 1.
struct Weights {
    std::vector<double> x, y, z;
};

inline Weights integration_weights(std::span<const double> grid, Illuminant illuminant) {
    if (grid.size() < 2 || grid.front() > 400.0 || grid.back() < 700.0) {
        throw ValidationError("spectrum must span at least 400-700 nm", "grid");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] - grid[i - 1] > 20.0 + 1e-9) {
            throw ValidationError("spectrum grid is coarser than 20 nm", "grid");
        }
    }
    const std::size_t n = grid.size();
    Weights w{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dl = 0.0;
        if (i > 0) dl += 0.5 * (grid[i] - grid[i - 1]);
        if (i + 1 < n) dl += 0.5 * (grid[i + 1] - grid[i]);
        auto c = cmf_at(grid[i]);
        double s = illuminant == Illuminant::d65 ? c.d65 : 1.0;
        w.x[i] = dl * s * c.xbar;
        w.y[i] = dl * s * c.ybar;
        w.z[i] = dl * s * c.zbar;
        norm += w.y[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        w.x[i] /= norm;
        w.y[i] /= norm;
        w.z[i] /= norm;
    }
    return w;
}

inline double gamma_encode(double v) {
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline double gamma_decode(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

}  // namespace detail

// --- conversions ------------------------------------------------------------

inline LinearRGB xyz_to_linear_srgb(const XYZ& c) {
    return {3.2404542 * c.X - 1.5371385 * c.Y - 0.4985314 * c.Z,
            -0.9692660 * c.X + 1.8760108 * c.Y + 0.0415560 * c.Z,
            0.0556434 * c.X - 0.2040259 * c.Y + 1.0572252 * c.Z};
}

inline XYZ linear_srgb_to_xyz(const LinearRGB& c) {
    return {0.4124564 * c.r + 0.3575761 * c.g + 0.1804375 * c.b,
            0.2126729 * c.r + 0.7151522 * c.g + 0.0721750 * c.b,
            0.0193339 * c.r + 0.1191920 * c.g + 0.9503041 * c.b};
}

// Per-channel clamp to [0, 1]; the flag records whether clamping happened.
inline SRGB xyz_to_srgb(const XYZ& c) {
    LinearRGB l = xyz_to_linear_srgb(c);
    SRGB out;
    auto encode = [&out](double v) {
        constexpr double tol = 1e-6;  // the 7-digit matrix overshoots by ~1e-7 at white
        if (v < -tol || v > 1.0 + tol) out.out_of_gamut = true;
        return detail::gamma_encode(std::clamp(v, 0.0, 1.0));
    };
    out.r = encode(l.r);
    out.g = encode(l.g);
    out.b = encode(l.b);
    return out;
}

inline LinearRGB srgb_to_linear(const SRGB& c) {
    return {detail::gamma_decode(c.r), detail::gamma_decode(c.g), detail::gamma_decode(c.b)};
}

inline XYZ srgb_to_xyz(const SRGB& c) { return linear_srgb_to_xyz(srgb_to_linear(c)); }

inline XYZ xyY_to_xyz(const Chromaticity& c, double Y) {
    if (!(c.y > 0.0)) throw ValidationError("chromaticity y must be positive", "xy");
    return {c.x * Y / c.y, Y, (1.0 - c.x - c.y) * Y / c.y};
}

inline std::optional<Chromaticity> chromaticity(const XYZ& c) {
    double s = c.X + c.Y + c.Z;
    if (!(s > 0.0)) return std::nullopt;
    return Chromaticity{c.X / s, c.Y / s};
}

// The sRGB triple is derived from (xy, Y) so that anything holding xy and Y
// can reproduce the swatch exactly.
inline CIEColor make_color(const XYZ& c) {
    CIEColor out{c, chromaticity(c), {}};
    out.srgb = out.xy ? xyz_to_srgb(xyY_to_xyz(*out.xy, c.Y)) : xyz_to_srgb(c);
    return out;
}

inline CIEColor spectrum_to_xyz(const Spectrum& s, Illuminant illuminant = Illuminant::d65) {
    auto w = detail::integration_weights(s.wavelengths(), illuminant);
    XYZ c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        c.X += w.x[i] * s[i];
        c.Y += w.y[i] * s[i];
        c.Z += w.z[i] * s[i];
    }
    return make_color(c);
}

inline std::string srgb_hex(const SRGB& c) {
    auto q = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", q(c.r), q(c.g), q(c.b));
    return buf;
}

inline SRGB parse_srgb_hex(std::string_view hex) {
    if (!hex.empty() && hex.front() == '#') hex.remove_prefix(1);
    if (hex.size() != 6 || hex.find_first_not_of("0123456789abcdefABCDEF") != hex.npos) {
        throw ValidationError("expected a colour like #rrggbb", "srgb_hex");
    }
    auto byte = [&](std::size_t i) {
        return std::stoi(std::string(hex.substr(i, 2)), nullptr, 16) / 255.0;
    };
    return {byte(0), byte(2), byte(4), false};
}

inline CIEColor color_from_hex(std::string_view hex) {
    return make_color(srgb_to_xyz(parse_srgb_hex(hex)));
}

// --- L*a*b* -----------------------------------------------------------------

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

inline Lab xyz_to_lab(const XYZ& c, const XYZ& white = kD65White) {
    double fx = detail::lab_f(c.X / white.X);
    double fy = detail::lab_f(c.Y / white.Y);
    double fz = detail::lab_f(c.Z / white.Z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Hue angle in degrees, [0, 360).
inline double hue_angle_deg(const Lab& c) {
    double h = std::atan2(c.b, c.a) * 180.0 / std::numbers::pi;
    return h < 0.0 ? h + 360.0 : h;
}

// CIE76. Black (Y = 0) is a valid endpoint; negative luminance is not.
inline double delta_e(const CIEColor& c1, const CIEColor& c2) {
    if (c1.xyz.Y < 0.0 || c2.xyz.Y < 0.0) {
        throw ValidationError("delta E needs nonnegative luminance", "Y");
    }
    Lab a = xyz_to_lab(c1.xyz), b = xyz_to_lab(c2.xyz);
    return std::sqrt((a.L - b.L) * (a.L - b.L) + (a.a - b.a) * (a.a - b.a) +
                     (a.b - b.b) * (a.b - b.b));
}

struct LuminanceContrast {
    double delta_Y = 0.0;
    double max_delta_R = 0.0;
    double max_delta_R_wavelength_nm = 0.0;
};

inline LuminanceContrast luminance_contrast(const Spectrum& on, const Spectrum& off) {
    if (!on.same_grid(off)) throw ValidationError("on/off spectra differ in grid", "grid");
    LuminanceContrast c;
    c.delta_Y = spectrum_to_xyz(on).xyz.Y - spectrum_to_xyz(off).xyz.Y;
    for (std::size_t i = 0; i < on.size(); ++i) {
        double d = on[i] - off[i];
        if (i == 0 || d > c.max_delta_R) {
            c.max_delta_R = d;
            c.max_delta_R_wavelength_nm = on.wavelength(i);
        }
    }
    return c;
}

// --- gamut ------------------------------------------------------------------

inline constexpr std::array<Chromaticity, 3> kSrgbPrimaries{{{0.64, 0.33}, {0.30, 0.60}, {0.15, 0.06}}};

namespace detail {

inline double cross(const Chromaticity& o, const Chromaticity& a, const Chromaticity& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double polygon_area(const std::vector<Chromaticity>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& a = p[i];
        const auto& b = p[(i + 1) % p.size()];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(s);
}

// Clip `subject` against the convex counter-clockwise polygon `clip`.
inline std::vector<Chromaticity> clip_convex(std::vector<Chromaticity> subject,
                                             const std::vector<Chromaticity>& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const auto& a = clip[e];
        const auto& b = clip[(e + 1) % clip.size()];
        std::vector<Chromaticity> out;
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const auto& p = subject[i];
            const auto& q = subject[(i + 1) % subject.size()];
            double dp = cross(a, b, p), dq = cross(a, b, q);
            if (dp >= 0.0) out.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        subject = std::move(out);
    }
    return subject;
}

}  // namespace detail

// Counter-clockwise hull without collinear points (monotone chain).
inline std::vector<Chromaticity> convex_hull(std::vector<Chromaticity> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Chromaticity> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && detail::cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && detail::cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

struct GamutReport {
    std::vector<Chromaticity> points;
    std::vector<Chromaticity> hull;
    double hull_area = 0.0;
    double srgb_coverage = 0.0;
};

inline GamutReport gamut_area(std::vector<Chromaticity> points) {
    if (points.empty()) throw ValidationError("gamut needs at least one point", "points");
    GamutReport r;
    r.points = std::move(points);
    r.hull = convex_hull(r.points);
    if (r.hull.size() >= 3) {
        r.hull_area = detail::polygon_area(r.hull);
        std::vector<Chromaticity> tri(kSrgbPrimaries.rbegin(), kSrgbPrimaries.rend());
        if (detail::cross(tri[0], tri[1], tri[2]) < 0.0) std::reverse(tri.begin(), tri.end());
        r.srgb_coverage =
            detail::polygon_area(detail::clip_convex(r.hull, tri)) / detail::polygon_area(tri);
    }
    return r;
}

// --- dominant wavelength --------------------------------------------------

struct DominantWavelength {
    double wavelength_nm = 0.0;
    // True when the ray hits the purple line; wavelength is then the complementary one.
    bool complementary = false;
};

inline std::optional<DominantWavelength> dominant_wavelength(
    const Chromaticity& c, const Chromaticity& white = kD65WhitePoint) {
    double dx = c.x - white.x, dy = c.y - white.y;
    if (std::hypot(dx, dy) < 1e-12) return std::nullopt;
    const auto& t = detail::kCie1931;
    auto locus = [&](std::size_t i) {
        double s = t[i].xbar + t[i].ybar + t[i].zbar;
        return Chromaticity{t[i].xbar / s, t[i].ybar / s};
    };
    // Nearest forward hit of the ray white + s (dx, dy) with a locus segment.
    auto hit = [&](double sx, double sy) -> std::optional<double> {
        std::optional<double> best;
        double best_s = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            auto a = locus(i), b = locus(i + 1);
            double ex = b.x - a.x, ey = b.y - a.y;
            double den = sx * ey - sy * ex;
            if (std::abs(den) < 1e-15) continue;
            double s = ((a.x - white.x) * ey - (a.y - white.y) * ex) / den;
            double u = ((a.x - white.x) * sy - (a.y - white.y) * sx) / den;
            if (s > 0.0 && u >= 0.0 && u <= 1.0 && s < best_s) {
                best_s = s;
                best = t[i].wavelength_nm + u * (t[i + 1].wavelength_nm - t[i].wavelength_nm);
            }
        }
        return best;
    };
    if (auto w = hit(dx, dy)) return DominantWavelength{*w, false};
    if (auto w = hit(-dx, -dy)) return DominantWavelength{*w, true};
    return std::nullopt;
}

}  // namespace retina
