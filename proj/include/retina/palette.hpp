#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retina/colorimetry.hpp"
#include "retina/detail/parallel.hpp"
#include "retina/error.hpp"
#include "retina/materials.hpp"
#include "retina/rcwa.hpp"
#include "retina/spectrum.hpp"
#include "retina/stack.hpp"
#include "retina/tmm.hpp"

namespace retina {

inline constexpr const char* kGeneratedBy = "retina 0.1.0";

// "D220_W200"
inline std::string palette_key(double d_nm, double w_nm) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "D%g_W%g", d_nm, w_nm);
    return buf;
}

struct SweepRange {
    double lo_nm = 0.0;
    double hi_nm = 0.0;
    double step_nm = 20.0;

    std::vector<double> values() const {
        if (!(hi_nm >= lo_nm) || !std::isfinite(lo_nm) || !std::isfinite(hi_nm)) {
            throw ValidationError("sweep range is empty", "range");
        }
        if (!(step_nm > 0.0)) throw ValidationError("sweep step must be positive", "step");
        std::vector<double> v;
        for (int i = 0;; ++i) {
            double x = lo_nm + i * step_nm;
            if (x > hi_nm + 1e-9) break;
            v.push_back(x);
        }
        return v;
    }

    friend bool operator==(const SweepRange&, const SweepRange&) = default;
};

struct PaletteMetadata {
    SweepRange d{220.0, 320.0, 20.0};
    SweepRange w{100.0, 200.0, 20.0};
    double thickness_nm = 110.0;
    std::string ambient = "air";
    RedoxState state = RedoxState::colored;
    int harmonics = 7;
    std::vector<double> grid = default_wavelength_grid();
    // (D, W) points outside the sweep that are included as well.
    std::vector<std::array<double, 2>> extra;

    friend bool operator==(const PaletteMetadata&, const PaletteMetadata&) = default;
};

struct PaletteEntry {
    MetaPixelGeometry geometry;
    std::string ambient;
    RedoxState state = RedoxState::colored;
    // Mirror-normalized reflectance.
    Spectrum spectrum;
    CIEColor color;
    // Non-empty when the solve failed; spectrum and color are then unset.
    std::string error;

    bool ok() const noexcept { return error.empty(); }
    std::string key() const { return palette_key(geometry.disc_diameter_nm, geometry.gap_nm); }
};

class Palette {
public:
    Palette() = default;
    explicit Palette(PaletteMetadata meta) : meta_(std::move(meta)) {}

    const PaletteMetadata& metadata() const noexcept { return meta_; }
    const std::vector<PaletteEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    void add(PaletteEntry e) {
        if (e.ok() && e.spectrum.wavelengths().size() != meta_.grid.size()) {
            throw ValidationError("entry spectrum is not on the palette grid", "spectrum");
        }
        if (index_.count(e.key())) throw ValidationError("duplicate palette key " + e.key(), "D");
        index_.emplace(e.key(), entries_.size());
        entries_.push_back(std::move(e));
    }

    const PaletteEntry* find(const std::string& key) const {
        auto it = index_.find(key);
        return it == index_.end() ? nullptr : &entries_[it->second];
    }

    const PaletteEntry* find(double d_nm, double w_nm) const { return find(palette_key(d_nm, w_nm)); }

    const PaletteEntry& at(const std::string& key) const {
        if (auto e = find(key)) return *e;
        throw ValidationError("palette has no entry " + key, "keys");
    }

private:
    PaletteMetadata meta_;
    std::vector<PaletteEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

// Bare Pt/Al reflectance on `grid`.
inline Spectrum mirror_reference(const MaterialModel& ambient, std::span<const double> grid) {
    LayerStack s = mirror_stack(ambient);
    std::vector<double> v;
    for (double w : grid) v.push_back(tmm::reflectance(s, w));
    return {std::vector<double>(grid.begin(), grid.end()), std::move(v)};
}

inline PaletteEntry simulate_entry(const MetaPixelGeometry& g, const std::string& ambient,
                                   RedoxState state, std::span<const double> grid,
                                   rcwa::SolverOptions options = {}, unsigned threads = 1) {
    PaletteEntry e{g, ambient, state, {}, {}, {}};
    const auto& amb = ambient_material(ambient);
    rcwa::Solver solver(metapixel_stack(g, amb, state), options);
    Spectrum raw = rcwa::spectrum_sweep(solver, grid, threads);
    e.spectrum = normalize_to_reference(raw, mirror_reference(amb, grid));
    e.color = spectrum_to_xyz(e.spectrum);
    return e;
}

// One entry per (D, W) grid point, then the extra points not already on the
// grid. Solver failures are stored on the entry.
inline Palette build_palette(const PaletteMetadata& meta, unsigned threads = 0) {
    auto ds = meta.d.values();
    auto ws = meta.w.values();
    if (ds.empty()) throw ValidationError("D range is empty", "d");
    if (ws.empty()) throw ValidationError("W range is empty", "w");
    ambient_material(meta.ambient);
    if (meta.state == RedoxState::none) throw ValidationError("state must be colored or dark", "state");
    rcwa::SolverOptions opt;
    opt.harmonics = meta.harmonics;

    std::vector<std::array<double, 2>> points;
    for (double d : ds) {
        for (double w : ws) points.push_back({d, w});
    }
    for (const auto& e : meta.extra) {
        auto key = palette_key(e[0], e[1]);
        bool dup = std::any_of(points.begin(), points.end(),
                               [&](const auto& q) { return palette_key(q[0], q[1]) == key; });
        if (!dup) points.push_back(e);
    }

    std::vector<PaletteEntry> out(points.size());
    detail::parallel_for(out.size(), threads, [&](std::size_t i) {
        MetaPixelGeometry g{points[i][0], points[i][1], meta.thickness_nm};
        try {
            g.validate();
            out[i] = simulate_entry(g, meta.ambient, meta.state, meta.grid, opt);
        } catch (const Error& ex) {
            out[i] = PaletteEntry{g, meta.ambient, meta.state, {}, {}, ex.what()};
        }
    });
    Palette p(meta);
    for (auto& e : out) p.add(std::move(e));
    return p;
}

struct MatchResult {
    const PaletteEntry* entry = nullptr;
    double delta_e = 0.0;
};

// Minimum CIE76 distance; ties go to smaller D, then smaller W.
inline MatchResult match_color(const CIEColor& target, const Palette& palette) {
    MatchResult best;
    for (const auto& e : palette.entries()) {
        if (!e.ok()) continue;
        double d = delta_e(target, e.color);
        bool better = !best.entry || d < best.delta_e;
        if (!better && d == best.delta_e) {
            const auto& a = e.geometry;
            const auto& b = best.entry->geometry;
            better = a.disc_diameter_nm < b.disc_diameter_nm ||
                     (a.disc_diameter_nm == b.disc_diameter_nm && a.gap_nm < b.gap_nm);
        }
        if (better) best = {&e, d};
    }
    if (!best.entry) throw ValidationError("palette has no usable entries", "palette");
    return best;
}

// --- hybrids ------------------------------------------------------------------

enum class HybridModel { incoherent, supercell };

inline HybridModel parse_hybrid_model(std::string_view s) {
    if (s == "incoherent") return HybridModel::incoherent;
    if (s == "supercell") return HybridModel::supercell;
    throw ValidationError("model must be 'incoherent' or 'supercell'", "model");
}

// Columns ordered along X; spacings_nm[i] is the gap after column i (the
// last wraps around to the first).
struct SubpixelGroup {
    std::vector<const PaletteEntry*> entries;
    std::vector<double> spacings_nm;

    void validate() const {
        if (entries.empty()) throw ValidationError("hybrid needs at least one entry", "entries");
        if (spacings_nm.size() != entries.size()) {
            throw ValidationError("need one spacing per entry", "T");
        }
        for (double t : spacings_nm) {
            if (!(t >= 0.0)) throw ValidationError("spacings must be >= 0 nm", "T");
        }
        for (const auto* e : entries) {
            if (!e || !e->ok()) throw ValidationError("hybrid entry is missing or failed", "entries");
            const auto* f = entries.front();
            if (e->ambient != f->ambient || e->state != f->state ||
                e->geometry.thickness_nm != f->geometry.thickness_nm ||
                !e->spectrum.same_grid(f->spectrum)) {
                throw ValidationError("hybrid entries must share ambient, state, thickness and grid",
                                      "entries");
            }
        }
    }
};

// Incoherent: column-width weighted mean of the constituent spectra, one
// lattice period per column. Supercell: full solve of the joined columns.
inline Spectrum hybrid_spectrum(const SubpixelGroup& group, HybridModel model,
                                rcwa::SolverOptions options = {}, unsigned threads = 0) {
    group.validate();
    const auto& grid = group.entries.front()->spectrum.wavelengths();
    std::vector<double> v(grid.size(), 0.0);
    if (model == HybridModel::incoherent) {
        double total = 0.0;
        for (const auto* e : group.entries) total += e->geometry.period_nm();
        // Offsets from the first spectrum, so identical columns come back exactly.
        const auto& s0 = group.entries.front()->spectrum;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = s0[i];
        for (const auto* e : group.entries) {
            double w = e->geometry.period_nm() / total;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * (e->spectrum[i] - s0[i]);
        }
        return {std::vector<double>(grid.begin(), grid.end()), std::move(v)};
    }
    std::vector<MetaPixelGeometry> cols;
    for (const auto* e : group.entries) cols.push_back(e->geometry);
    const auto& f = *group.entries.front();
    const auto& amb = ambient_material(f.ambient);
    LayerStack s = rcwa::supercell_stack(cols, group.spacings_nm, amb, f.state);
    const auto& cell = std::get<PatternedLayer>(s.layers.front()).cell;
    rcwa::Solver solver(s, rcwa::supercell_options(cell, options));
    Spectrum raw = rcwa::spectrum_sweep(solver, grid, threads);
    return normalize_to_reference(raw, mirror_reference(amb, grid));
}

struct HueSector {
    const char* name;
    double lo_deg;
    double hi_deg;

    bool contains(double h) const { return h >= lo_deg && h <= hi_deg; }
};

inline constexpr HueSector kYellowSector{"yellow", 70.0, 110.0};
inline constexpr HueSector kMagentaSector{"magenta", 300.0, 350.0};
inline constexpr HueSector kCyanSector{"cyan", 180.0, 240.0};

struct MixingCheck {
    std::string pair;      // e.g. "R+G"
    std::string expected;  // e.g. "yellow"
    double spacing_nm = 0.0;
    double hue_deg = 0.0;
    Chromaticity xy;
    bool pass = false;
};

struct AdditiveMixingReport {
    std::vector<MixingCheck> checks;
    bool all_pass() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
    }
};

// R+G -> yellow, B+R -> magenta, G+B -> cyan. `spacings_nm` holds the
// red-green, blue-red and green-blue spacings; each pair is a two-column
// hybrid with that spacing on both sides.
inline AdditiveMixingReport verify_additive_mixing(const PaletteEntry& r, const PaletteEntry& g,
                                                   const PaletteEntry& b,
                                                   std::array<double, 3> spacings_nm,
                                                   HybridModel model = HybridModel::supercell,
                                                   rcwa::SolverOptions options = {},
                                                   unsigned threads = 0) {
    struct Pair {
        const PaletteEntry* p;
        const PaletteEntry* q;
        const char* name;
        HueSector sector;
        double t;
    };
    const Pair pairs[] = {{&r, &g, "R+G", kYellowSector, spacings_nm[0]},
                          {&b, &r, "B+R", kMagentaSector, spacings_nm[1]},
                          {&g, &b, "G+B", kCyanSector, spacings_nm[2]}};
    AdditiveMixingReport rep;
    for (const auto& pr : pairs) {
        SubpixelGroup grp{{pr.p, pr.q}, {pr.t, pr.t}};
        auto c = spectrum_to_xyz(hybrid_spectrum(grp, model, options, threads));
        MixingCheck m;
        m.pair = pr.name;
        m.expected = pr.sector.name;
        m.spacing_nm = pr.t;
        m.hue_deg = hue_angle_deg(xyz_to_lab(c.xyz));
        m.xy = c.xy.value_or(Chromaticity{});
        m.pass = c.xy.has_value() && pr.sector.contains(m.hue_deg);
        rep.checks.push_back(m);
    }
    return rep;
}

}  // namespace retina
