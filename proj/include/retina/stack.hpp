#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "retina/error.hpp"
#include "retina/materials.hpp"

namespace retina {

// Square lattice of WO3 nanodiscs. `gap_nm` is the edge-to-edge spacing,
// so the lattice period is D + W.
struct MetaPixelGeometry {
    double disc_diameter_nm = 0.0;
    double gap_nm = 0.0;
    double thickness_nm = 110.0;

    double period_nm() const noexcept { return disc_diameter_nm + gap_nm; }

    double fill_factor() const noexcept {
        double p = period_nm();
        return std::numbers::pi * disc_diameter_nm * disc_diameter_nm / (4.0 * p * p);
    }

    void validate() const {
        if (!(disc_diameter_nm >= 0.0) || !std::isfinite(disc_diameter_nm)) {
            throw ValidationError("disc diameter must be >= 0 nm", "d");
        }
        if (!(gap_nm >= 0.0) || !std::isfinite(gap_nm)) {
            throw ValidationError("gap must be >= 0 nm", "w");
        }
        if (!(thickness_nm > 0.0) || !std::isfinite(thickness_nm)) {
            throw ValidationError("thickness must be > 0 nm", "t");
        }
        if (!(period_nm() > 0.0)) throw ValidationError("lattice period must be > 0 nm", "w");
    }

    friend bool operator==(const MetaPixelGeometry&, const MetaPixelGeometry&) = default;
};

struct DiscSite {
    double x_nm = 0.0;
    double y_nm = 0.0;
    double diameter_nm = 0.0;
};

// Rectangular periodic cell holding one or more discs.
struct UnitCell {
    double period_x_nm = 0.0;
    double period_y_nm = 0.0;
    std::vector<DiscSite> discs;

    static UnitCell square(const MetaPixelGeometry& g) {
        UnitCell c{g.period_nm(), g.period_nm(), {}};
        if (g.disc_diameter_nm > 0.0) c.discs.push_back({0.0, 0.0, g.disc_diameter_nm});
        return c;
    }

    double area_nm2() const noexcept { return period_x_nm * period_y_nm; }

    double fill_factor() const noexcept {
        double a = 0.0;
        for (const auto& d : discs) a += std::numbers::pi * d.diameter_nm * d.diameter_nm / 4.0;
        return a / area_nm2();
    }

    void validate() const {
        if (!(period_x_nm > 0.0) || !(period_y_nm > 0.0)) {
            throw ValidationError("cell periods must be positive", "period");
        }
        for (std::size_t i = 0; i < discs.size(); ++i) {
            const auto& a = discs[i];
            if (!(a.diameter_nm >= 0.0)) throw ValidationError("disc diameter must be >= 0", "d");
            if (a.diameter_nm > period_x_nm * (1 + 1e-12) ||
                a.diameter_nm > period_y_nm * (1 + 1e-12)) {
                throw ValidationError("disc larger than its cell", "d");
            }
            for (std::size_t j = i + 1; j < discs.size(); ++j) {
                const auto& b = discs[j];
                double dx = std::remainder(a.x_nm - b.x_nm, period_x_nm);
                double dy = std::remainder(a.y_nm - b.y_nm, period_y_nm);
                double need = 0.5 * (a.diameter_nm + b.diameter_nm);
                if (std::hypot(dx, dy) < need * (1 - 1e-12)) {
                    throw ValidationError("discs overlap inside the cell", "cell");
                }
            }
        }
    }
};

struct UniformLayer {
    MaterialModel material;
    double thickness_nm;
};

// Discs of `disc` material embedded in `host`.
struct PatternedLayer {
    MaterialModel disc;
    MaterialModel host;
    double thickness_nm;
    UnitCell cell;
};

using Layer = std::variant<UniformLayer, PatternedLayer>;

// Ideal mirror boundary (tangential E vanishes).
struct PerfectConductor {};

using Substrate = std::variant<MaterialModel, PerfectConductor>;

// Ambient (top, semi-infinite), layers top to bottom, substrate (semi-infinite).
struct LayerStack {
    MaterialModel ambient;
    std::vector<Layer> layers;
    Substrate substrate;

    int patterned_count() const {
        int n = 0;
        for (const auto& l : layers) n += std::holds_alternative<PatternedLayer>(l) ? 1 : 0;
        return n;
    }

    bool is_planar() const { return patterned_count() == 0; }

    const PatternedLayer* patterned_layer() const {
        for (const auto& l : layers) {
            if (auto p = std::get_if<PatternedLayer>(&l)) return p;
        }
        return nullptr;
    }

    bool opaque_substrate() const {
        if (std::holds_alternative<PerfectConductor>(substrate)) return true;
        const auto& m = std::get<MaterialModel>(substrate);
        return !m.is_lossless();
    }

    void validate() const {
        if (patterned_count() > 1) {
            throw ValidationError("at most one patterned layer is supported", "stack");
        }
        for (const auto& l : layers) {
            double t = std::visit([](const auto& x) { return x.thickness_nm; }, l);
            if (!(t > 0.0)) throw ValidationError("layer thickness must be > 0 nm", "thickness");
            if (auto p = std::get_if<PatternedLayer>(&l)) p->cell.validate();
        }
        if (!ambient.is_lossless()) {
            throw ValidationError("ambient medium must be lossless", "ambient");
        }
    }

    // Every material referenced by the stack covers `wavelength_nm`.
    bool covers(double wavelength_nm) const {
        auto ok = ambient.covers(wavelength_nm);
        for (const auto& l : layers) {
            if (auto u = std::get_if<UniformLayer>(&l)) ok = ok && u->material.covers(wavelength_nm);
            if (auto p = std::get_if<PatternedLayer>(&l)) {
                ok = ok && p->disc.covers(wavelength_nm) && p->host.covers(wavelength_nm);
            }
        }
        if (auto m = std::get_if<MaterialModel>(&substrate)) ok = ok && m->covers(wavelength_nm);
        return ok;
    }
};

inline constexpr double kPlatinumThicknessNm = 20.0;

// Ambient over 20 nm Pt on opaque Al: the bare reflective layer.
inline LayerStack mirror_stack(const MaterialModel& ambient) {
    return {ambient,
            {UniformLayer{builtin_material("pt"), kPlatinumThicknessNm}},
            builtin_material("al")};
}

// WO3 nanodisc array (host = ambient) on the Pt/Al mirror.
inline LayerStack metapixel_stack(const MetaPixelGeometry& g, const MaterialModel& ambient,
                                  RedoxState state) {
    g.validate();
    LayerStack s = mirror_stack(ambient);
    s.layers.insert(s.layers.begin(),
                    PatternedLayer{wo3(state), ambient, g.thickness_nm, UnitCell::square(g)});
    return s;
}

}  // namespace retina
