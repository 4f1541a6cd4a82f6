#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "retina/colorimetry.hpp"
#include "retina/dynamics.hpp"
#include "retina/error.hpp"
#include "retina/palette.hpp"
#include "retina/spectrum.hpp"

namespace retina::io {

using nlohmann::json;

inline json to_json(const Chromaticity& c) { return json::array({c.x, c.y}); }

// Swatch fields: the hex is always accompanied by the xy and Y it came from.
inline void put_color(json& j, const CIEColor& c) {
    j["xy"] = c.xy ? to_json(*c.xy) : json(nullptr);
    j["Y"] = c.xyz.Y;
    j["XYZ"] = {c.xyz.X, c.xyz.Y, c.xyz.Z};
    j["srgb_hex"] = srgb_hex(c.srgb);
    j["out_of_gamut"] = c.srgb.out_of_gamut;
}

inline json spectrum_json(const Spectrum& s) {
    return {{"wavelength_nm", s.wavelengths()}, {"values", s.values()}};
}

inline json sweep_json(const SweepRange& r) { return {{"lo", r.lo_nm}, {"hi", r.hi_nm}, {"step", r.step_nm}}; }

inline SweepRange sweep_from_json(const json& j) {
    return {j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("step").get<double>()};
}

inline json metadata_json(const PaletteMetadata& m) {
    return {{"D", sweep_json(m.d)},
            {"W", sweep_json(m.w)},
            {"thickness_nm", m.thickness_nm},
            {"ambient", m.ambient},
            {"state", to_string(m.state)},
            {"harmonics", m.harmonics},
            {"grid_nm", m.grid},
            {"extra", m.extra}};
}

inline json entry_json(const PaletteEntry& e) {
    json j{{"key", e.key()}, {"D", e.geometry.disc_diameter_nm}, {"W", e.geometry.gap_nm}};
    if (!e.ok()) {
        j["error"] = e.error;
        return j;
    }
    j["spectrum"] = e.spectrum.values();
    put_color(j, e.color);
    return j;
}

inline json palette_json(const Palette& p) {
    json entries = json::array();
    for (const auto& e : p.entries()) entries.push_back(entry_json(e));
    return {{"generated_by", kGeneratedBy}, {"metadata", metadata_json(p.metadata())}, {"entries", entries}};
}

inline void write_palette(std::ostream& out, const Palette& p) {
    out << palette_json(p).dump(1) << '\n';
    if (!out) throw Error("failed writing palette");
}

// Colors are recomputed from the stored spectra; a stored xy or hex that
// disagrees is rejected.
inline Palette palette_from_json(const json& j) {
    try {
        const auto& m = j.at("metadata");
        PaletteMetadata meta;
        meta.d = sweep_from_json(m.at("D"));
        meta.w = sweep_from_json(m.at("W"));
        meta.thickness_nm = m.at("thickness_nm").get<double>();
        meta.ambient = m.at("ambient").get<std::string>();
        meta.state = parse_redox_state(m.at("state").get<std::string>());
        meta.harmonics = m.value("harmonics", 7);
        meta.grid = m.at("grid_nm").get<std::vector<double>>();
        if (m.contains("extra")) meta.extra = m.at("extra").get<std::vector<std::array<double, 2>>>();
        ambient_material(meta.ambient);
        Palette p(meta);
        for (const auto& e : j.at("entries")) {
            MetaPixelGeometry g{e.at("D").get<double>(), e.at("W").get<double>(), meta.thickness_nm};
            g.validate();
            PaletteEntry pe{g, meta.ambient, meta.state, {}, {}, {}};
            if (e.contains("key") && e.at("key").get<std::string>() != pe.key()) {
                throw ValidationError("entry key " + e.at("key").get<std::string>() +
                                          " does not match its geometry", "key");
            }
            if (e.contains("error")) {
                pe.error = e.at("error").get<std::string>();
                if (pe.error.empty()) throw ValidationError("empty error string", "error");
                p.add(std::move(pe));
                continue;
            }
            pe.spectrum = Spectrum(meta.grid, e.at("spectrum").get<std::vector<double>>());
            pe.color = spectrum_to_xyz(pe.spectrum);
            if (e.contains("srgb_hex") && e.at("srgb_hex").get<std::string>() != srgb_hex(pe.color.srgb)) {
                throw ValidationError("entry " + pe.key() + " hex disagrees with its spectrum", "srgb_hex");
            }
            if (e.contains("xy") && !e.at("xy").is_null() && pe.color.xy) {
                auto xy = e.at("xy").get<std::vector<double>>();
                if (xy.size() != 2 || std::abs(xy[0] - pe.color.xy->x) > 1e-9 ||
                    std::abs(xy[1] - pe.color.xy->y) > 1e-9) {
                    throw ValidationError("entry " + pe.key() + " xy disagrees with its spectrum", "xy");
                }
            }
            p.add(std::move(pe));
        }
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("palette JSON: ") + e.what(), "palette");
    }
}

inline Palette read_palette(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("palette JSON: ") + e.what(), "palette");
    }
    return palette_from_json(j);
}

inline Palette read_palette(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open palette " + path.string(), "palette");
    return read_palette(in);
}

inline json gamut_json(const GamutReport& g) {
    json pts = json::array(), hull = json::array();
    for (const auto& p : g.points) pts.push_back(to_json(p));
    for (const auto& p : g.hull) hull.push_back(to_json(p));
    return {{"points", pts}, {"hull", hull}, {"hull_area", g.hull_area}, {"srgb_coverage", g.srgb_coverage}};
}

// [{"v": 4, "ms": 40}, ...]
inline dynamics::Waveform waveform_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("waveform must be a JSON array", "waveform");
    dynamics::Waveform w;
    try {
        for (const auto& s : j) w.segments.push_back({s.at("v").get<double>(), s.at("ms").get<double>()});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("waveform: ") + e.what(), "waveform");
    }
    w.validate();
    return w;
}

}  // namespace retina::io
