#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <semaphore>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "retina/colorimetry.hpp"
#include "retina/error.hpp"
#include "retina/io.hpp"
#include "retina/layout.hpp"
#include "retina/palette.hpp"

// After Eigen: <resolv.h> defines a _res macro that clashes with Eigen parameter names.
#include "httplib.h"

namespace retina::service {

using nlohmann::json;

struct Bounds {
    double min = 0.0;
    double max = 0.0;
    double step = 1.0;
};

struct ServiceConfig {
    int harmonics = 5;
    std::vector<double> grid = default_wavelength_grid();
    // Geometry accepted by /api/simulate.
    Bounds d{20.0, 600.0, 1.0};
    Bounds w{0.0, 600.0, 1.0};
    Bounds t{10.0, 400.0, 1.0};
    int max_compile_side = 256;
    std::size_t max_body_bytes = 16u << 20;
    // Fresh solves run at most this many at a time.
    std::ptrdiff_t solve_slots = 2;
    unsigned solve_threads = 1;
};

// Sweep box plus the selected primaries for the ambient, so that compiles and
// matches work out of the box.
inline PaletteMetadata default_palette_metadata(const std::string& ambient, RedoxState state,
                                                const ServiceConfig& cfg) {
    PaletteMetadata m;
    m.d = {220.0, 320.0, 20.0};
    m.w = {100.0, 200.0, 20.0};
    m.ambient = ambient;
    m.state = state;
    m.harmonics = cfg.harmonics;
    m.grid = cfg.grid;
    for (auto model : {ColorModel::subtractive_cmy, ColorModel::additive_rgb}) {
        for (const auto& k : default_primaries(model, ambient).keys) {
            double d = 0.0, w = 0.0;
            std::sscanf(k.c_str(), "D%lf_W%lf", &d, &w);
            m.extra.push_back({d, w});
        }
    }
    return m;
}

// Immutable snapshot keyed by (ambient, state).
using PaletteSet = std::map<std::pair<std::string, RedoxState>, std::shared_ptr<const Palette>>;

inline PaletteSet precompute_palettes(const ServiceConfig& cfg, unsigned threads = 0) {
    PaletteSet set;
    for (std::string amb : {"air", "electrolyte"}) {
        for (auto st : {RedoxState::colored, RedoxState::dark}) {
            set[{amb, st}] =
                std::make_shared<const Palette>(build_palette(default_palette_metadata(amb, st, cfg), threads));
        }
    }
    return set;
}

struct Response {
    int status = 200;
    json body;
};

class Service {
public:
    Service(PaletteSet palettes, ServiceConfig cfg = {})
        : palettes_(std::move(palettes)), cfg_(std::move(cfg)), slots_(std::max<std::ptrdiff_t>(1, cfg_.solve_slots)) {}

    const ServiceConfig& config() const noexcept { return cfg_; }

    void mount(httplib::Server& server) {
        server.set_payload_max_length(cfg_.max_body_bytes);
        auto wrap = [this](Response (Service::*fn)(const httplib::Request&)) {
            return [this, fn](const httplib::Request& req, httplib::Response& res) {
                Response r = guarded([&] { return (this->*fn)(req); });
                res.status = r.status;
                res.set_content(r.body.dump(), "application/json; charset=utf-8");
            };
        };
        server.Get("/api/health", wrap(&Service::health));
        server.Get("/api/capabilities", wrap(&Service::capabilities));
        server.Get("/api/palette", wrap(&Service::palette));
        server.Post("/api/simulate", wrap(&Service::simulate));
        server.Post("/api/hybrid", wrap(&Service::hybrid));
        server.Post("/api/match", wrap(&Service::match));
        server.Post("/api/compile", wrap(&Service::compile));
    }

    Response health(const httplib::Request&) { return {200, {{"status", "ok"}}}; }

    Response capabilities(const httplib::Request&) {
        auto b = [](const Bounds& x) { return json{{"min", x.min}, {"max", x.max}, {"step", x.step}}; };
        json pals = json::array();
        for (const auto& [k, p] : palettes_) {
            pals.push_back({{"ambient", k.first},
                            {"state", to_string(k.second)},
                            {"entries", p->size()},
                            {"sweep", io::metadata_json(p->metadata())}});
        }
        return {200,
                {{"generated_by", kGeneratedBy},
                 {"bounds", {{"d", b(cfg_.d)}, {"w", b(cfg_.w)}, {"t", b(cfg_.t)}}},
                 {"default_t", 110.0},
                 {"ambients", {"air", "electrolyte"}},
                 {"states", {"colored", "dark"}},
                 {"hybrid_models", {"incoherent", "supercell"}},
                 {"color_models", {"subtractive_cmy", "additive_rgb"}},
                 {"harmonics", cfg_.harmonics},
                 {"grid_nm", cfg_.grid},
                 {"max_compile_side", cfg_.max_compile_side},
                 {"palettes", pals}}};
    }

    Response palette(const httplib::Request& req) {
        std::string amb = req.has_param("ambient") ? req.get_param_value("ambient") : "air";
        std::string st = req.has_param("state") ? req.get_param_value("state") : "colored";
        return {200, io::palette_json(*lookup(amb, st))};
    }

    Response simulate(const httplib::Request& req) {
        json b = parse_body(req);
        double d = number(b, "d"), w = number(b, "w");
        double t = b.contains("t") ? number(b, "t") : 110.0;
        check_bound(d, cfg_.d, "d");
        check_bound(w, cfg_.w, "w");
        check_bound(t, cfg_.t, "t");
        std::string amb = text(b, "ambient", "air");
        std::string st = text(b, "state", "colored");
        auto pal = lookup(amb, st);
        MetaPixelGeometry g{d, w, t};
        json out{{"key", palette_key(d, w)}, {"D", d}, {"W", w}, {"t", t}, {"ambient", amb}, {"state", st}};
        const PaletteEntry* hit = t == pal->metadata().thickness_nm ? pal->find(d, w) : nullptr;
        PaletteEntry fresh;
        if (hit && hit->ok()) {
            out["cached"] = true;
        } else {
            rcwa::SolverOptions opt;
            opt.harmonics = cfg_.harmonics;
            SolveSlot slot(slots_);
            fresh = simulate_entry(g, amb, pal->metadata().state, pal->metadata().grid, opt, cfg_.solve_threads);
            hit = &fresh;
            out["cached"] = false;
        }
        out["wavelength_nm"] = hit->spectrum.wavelengths();
        out["spectrum"] = hit->spectrum.values();
        io::put_color(out, hit->color);
        return {200, out};
    }

    Response hybrid(const httplib::Request& req) {
        json b = parse_body(req);
        auto pal = lookup(text(b, "ambient", "air"), text(b, "state", "colored"));
        if (!b.contains("entries") || !b["entries"].is_array()) {
            throw ValidationError("entries must be an array of palette keys", "entries");
        }
        SubpixelGroup grp;
        for (const auto& k : b["entries"]) {
            if (!k.is_string()) throw ValidationError("entries must be palette keys", "entries");
            const auto* e = pal->find(k.get<std::string>());
            if (!e) throw ValidationError("unknown palette key " + k.get<std::string>(), "entries");
            grp.entries.push_back(e);
        }
        if (!b.contains("T") || !b["T"].is_array()) throw ValidationError("T must be an array", "T");
        for (const auto& t : b["T"]) {
            if (!t.is_number()) throw ValidationError("T must hold numbers", "T");
            grp.spacings_nm.push_back(t.get<double>());
        }
        auto model = parse_hybrid_model(text(b, "model", "incoherent"));
        grp.validate();
        rcwa::SolverOptions opt;
        opt.harmonics = cfg_.harmonics;
        Spectrum s;
        if (model == HybridModel::supercell) {
            SolveSlot slot(slots_);
            s = hybrid_spectrum(grp, model, opt, cfg_.solve_threads);
        } else {
            s = hybrid_spectrum(grp, model, opt, 1);
        }
        json out{{"model", to_string(model)}, {"wavelength_nm", s.wavelengths()}, {"spectrum", s.values()}};
        io::put_color(out, spectrum_to_xyz(s));
        return {200, out};
    }

    Response match(const httplib::Request& req) {
        json b = parse_body(req);
        auto target = color_from_hex(text(b, "srgb_hex", ""));
        auto pal = lookup(text(b, "ambient", "air"), text(b, "state", "colored"));
        auto m = match_color(target, *pal);
        json out = io::entry_json(*m.entry);
        out.erase("spectrum");
        out["delta_e"] = m.delta_e;
        out["target"] = json::object();
        io::put_color(out["target"], target);
        if (m.entry->color.xy) {
            if (auto dw = dominant_wavelength(*m.entry->color.xy)) {
                out["dominant_wavelength_nm"] = dw->wavelength_nm;
                out["complementary"] = dw->complementary;
            }
        }
        return {200, out};
    }

    // Body: {"width", "height", "pixels": ["#rrggbb", ...] row-major, options...}
    Response compile(const httplib::Request& req) {
        json b = parse_body(req);
        int w = integer(b, "width"), h = integer(b, "height");
        RenderOptions opt;
        opt.columns = b.contains("columns") ? integer(b, "columns") : 0;
        opt.rows = b.contains("rows") ? integer(b, "rows") : 0;
        const int cap = cfg_.max_compile_side;
        if (w > cap || h > cap || opt.columns > cap || opt.rows > cap) {
            return {413, {{"error", "image larger than " + std::to_string(cap) + " pixels per side; use the CLI"},
                          {"field", "pixels"}}};
        }
        if (w <= 0 || h <= 0) throw ValidationError("width and height must be positive", "width");
        if (!b.contains("pixels") || !b["pixels"].is_array() ||
            b["pixels"].size() != static_cast<std::size_t>(w) * h) {
            throw ValidationError("pixels must hold width*height hex colours", "pixels");
        }
        Image img(w, h);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const auto& p = b["pixels"][i];
            if (!p.is_string()) throw ValidationError("pixels must be hex strings", "pixels");
            auto c = parse_srgb_hex(p.get<std::string>());
            img.pixels[i] = {static_cast<std::uint8_t>(std::lround(c.r * 255)),
                             static_cast<std::uint8_t>(std::lround(c.g * 255)),
                             static_cast<std::uint8_t>(std::lround(c.b * 255))};
        }
        opt.model = parse_color_model(text(b, "model", "subtractive_cmy"));
        opt.dither = parse_dither(text(b, "dither", "none"));
        std::string amb = text(b, "ambient", "air");
        opt.palette_ref = amb + "/colored";
        if (b.contains("primaries")) {
            auto keys = b["primaries"];
            if (!keys.is_array() || keys.size() != 3) throw ValidationError("primaries needs 3 keys", "primaries");
            for (int i = 0; i < 3; ++i) opt.primaries[i] = keys[i].get<std::string>();
        }
        if (b.contains("T")) {
            auto t = b["T"];
            if (!t.is_array() || t.size() != 3) throw ValidationError("T needs 3 spacings", "T");
            opt.spacings_nm = std::array<double, 3>{t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
        }
        auto compiled = compile_image(img, *lookup(amb, "colored"), opt, 1);
        std::ostringstream js;
        emit_layout_json(js, compiled.document);
        auto st = layout_stats(compiled.document);
        json out{{"layout", json::parse(js.str())},
                 {"stats",
                  {{"pixel_count", st.pixel_count},
                   {"disc_count", st.disc_count},
                   {"ppi_mean", st.ppi_mean},
                   {"extent_mm", {st.extent_x_mm, st.extent_y_mm}}}}};
        return {200, out};
    }

private:
    struct SolveSlot {
        explicit SolveSlot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
        ~SolveSlot() { sem.release(); }
        std::counting_semaphore<>& sem;
    };

    template <class F>
    static Response guarded(F&& f) {
        try {
            return f();
        } catch (const ValidationError& e) {
            return {400, {{"error", e.what()}, {"field", e.field()}, {"fields", {{{"field", e.field()}, {"message", e.what()}}}}}};
        } catch (const ComputationError& e) {
            return {422, {{"error", e.what()}}};
        } catch (const json::exception& e) {
            return {400, {{"error", e.what()}, {"field", "body"}}};
        } catch (const std::exception& e) {
            return {500, {{"error", e.what()}}};
        }
    }

    static json parse_body(const httplib::Request& req) {
        json b = json::parse(req.body, nullptr, false);
        if (b.is_discarded() || !b.is_object()) throw ValidationError("body must be a JSON object", "body");
        return b;
    }

    static double number(const json& b, const char* field) {
        if (!b.contains(field) || !b[field].is_number()) {
            throw ValidationError(std::string(field) + " must be a number", field);
        }
        return b[field].get<double>();
    }

    static int integer(const json& b, const char* field) {
        if (!b.contains(field) || !b[field].is_number_integer()) {
            throw ValidationError(std::string(field) + " must be an integer", field);
        }
        return b[field].get<int>();
    }

    static std::string text(const json& b, const char* field, const char* fallback) {
        if (!b.contains(field)) return fallback;
        if (!b[field].is_string()) throw ValidationError(std::string(field) + " must be a string", field);
        return b[field].get<std::string>();
    }

    static void check_bound(double v, const Bounds& bd, const char* field) {
        if (!(v >= bd.min && v <= bd.max)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%s must lie in [%g, %g]", field, bd.min, bd.max);
            throw ValidationError(buf, field);
        }
    }

    std::shared_ptr<const Palette> lookup(const std::string& ambient, const std::string& state) const {
        if (ambient != "air" && ambient != "electrolyte") {
            throw ValidationError("ambient must be air or electrolyte", "ambient");
        }
        RedoxState s;
        try {
            s = parse_redox_state(state);
        } catch (const ValidationError&) {
            throw ValidationError("state must be colored or dark", "state");
        }
        auto it = palettes_.find({ambient, s});
        if (it == palettes_.end()) {
            throw ValidationError("no palette loaded for " + ambient + "/" + state, "ambient");
        }
        return it->second;
    }

    static std::string_view to_string(HybridModel m) {
        return m == HybridModel::incoherent ? "incoherent" : "supercell";
    }
    static std::string_view to_string(RedoxState s) { return retina::to_string(s); }

    const PaletteSet palettes_;
    const ServiceConfig cfg_;
    std::counting_semaphore<> slots_;
};

// Port from RETINA_PORT, else `fallback`.
inline int port_from_env(int fallback = 8080) {
    if (const char* p = std::getenv("RETINA_PORT")) {
        try {
            int v = std::stoi(p);
            if (v > 0 && v < 65536) return v;
        } catch (const std::exception&) {
        }
        throw ValidationError("RETINA_PORT must be a port number", "port");
    }
    return fallback;
}

}  // namespace retina::service
