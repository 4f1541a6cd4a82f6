// Command-line front end: spectra, palettes, matching, gamut, layout
// compilation, switching traces and the HTTP service.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "retina/colorimetry.hpp"
#include "retina/dynamics.hpp"
#include "retina/io.hpp"
#include "retina/layout.hpp"
#include "retina/palette.hpp"
#include "retina/service.hpp"

namespace {

using namespace retina;
using nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kComputation = 3 };

// Writes to `path`, or stdout for "" / "-".
class Output {
public:
    explicit Output(const std::string& path, bool binary = false) {
        if (path.empty() || path == "-") return;
        file_ = std::make_unique<std::ofstream>(path, binary ? std::ios::binary : std::ios::out);
        if (!*file_) throw ValidationError("cannot write " + path, "output");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

SweepRange parse_range(const std::string& s, const char* field) {
    SweepRange r;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> r.lo_nm >> c1 >> r.hi_nm) || c1 != ':') {
        throw ValidationError(std::string(field) + " range must look like lo:hi[:step]", field);
    }
    if (in >> c2) {
        if (c2 != ':' || !(in >> r.step_nm)) throw ValidationError("bad range step", field);
    }
    return r;
}

template <std::size_t N>
std::array<double, N> parse_list(const std::string& s, const char* field) {
    std::array<double, N> out{};
    std::istringstream in(s);
    for (std::size_t i = 0; i < N; ++i) {
        if (i && in.get() != ',') throw ValidationError(std::string(field) + " needs " + std::to_string(N) + " comma-separated values", field);
        if (!(in >> out[i])) throw ValidationError(std::string(field) + " has a bad number", field);
    }
    if (in.peek() != EOF) throw ValidationError(std::string(field) + " has trailing text", field);
    return out;
}

std::array<std::string, 3> parse_keys(const std::string& s) {
    std::array<std::string, 3> k;
    std::istringstream in(s);
    for (auto& x : k) {
        if (!std::getline(in, x, ',') || x.empty()) throw ValidationError("primaries needs 3 keys", "primaries");
    }
    return k;
}

std::vector<double> grid_from(double lo, double hi, double step) { return wavelength_grid(lo, hi, step); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nanodisc meta-pixel display toolchain"};
    app.set_config("--config", "", "TOML config file; flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    int harmonics = 7;
    unsigned threads = 0;
    app.add_option("--harmonics,-N", harmonics, "Fourier harmonics per axis")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads (0 = all cores)");

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "geometry -> reflectance spectrum CSV");
    double d = 220, w = 200, t = 110, lo = 400, hi = 700, step = 5;
    std::string ambient = "air", state = "colored", out_path;
    bool raw = false;
    spec->add_option("--d", d, "disc diameter (nm)")->required();
    spec->add_option("--w", w, "edge gap (nm)")->required();
    spec->add_option("--t", t, "film thickness (nm)");
    spec->add_option("--ambient", ambient);
    spec->add_option("--state", state);
    spec->add_option("--lo", lo, "grid start (nm)");
    spec->add_option("--hi", hi, "grid end (nm)");
    spec->add_option("--step", step, "grid step (nm)");
    spec->add_flag("--raw", raw, "absolute reflectance instead of mirror-normalized");
    spec->add_option("-o,--output", out_path);

    // palette
    auto* pal = app.add_subcommand("palette", "sweep geometries -> palette JSON");
    std::string d_range = "220:320:20", w_range = "100:200:20";
    std::vector<std::string> extras;
    pal->add_option("--d-range", d_range, "lo:hi:step (nm)");
    pal->add_option("--w-range", w_range, "lo:hi:step (nm)");
    pal->add_option("--t", t);
    pal->add_option("--ambient", ambient);
    pal->add_option("--state", state);
    pal->add_option("--extra", extras, "additional D,W points");
    pal->add_option("--lo", lo);
    pal->add_option("--hi", hi);
    pal->add_option("--step", step);
    pal->add_option("-o,--output", out_path);

    // match
    auto* mat = app.add_subcommand("match", "target colour -> nearest palette entry");
    std::string hex, palette_path;
    mat->add_option("--hex", hex, "#rrggbb")->required();
    mat->add_option("--palette", palette_path)->required();

    // gamut
    auto* gam = app.add_subcommand("gamut", "palettes -> gamut report JSON");
    std::vector<std::string> palette_paths;
    std::vector<std::string> keys_filter;
    gam->add_option("--palette", palette_paths)->required();
    gam->add_option("--keys", keys_filter, "restrict every palette to these keys");
    gam->add_option("-o,--output", out_path);

    // compile
    auto* cmp = app.add_subcommand("compile", "image + palette -> layout");
    std::string image_path, model = "subtractive_cmy", dither = "none", format = "json", primaries, spacings;
    int columns = 0, rows = 0;
    std::optional<double> pitch_x, pitch_y;
    std::string report_path;
    cmp->add_option("--image", image_path, "PPM (P3/P6)")->required();
    cmp->add_option("--palette", palette_path)->required();
    cmp->add_option("--model", model);
    cmp->add_option("--dither", dither);
    cmp->add_option("--columns", columns, "target grid columns (0 = image width)");
    cmp->add_option("--rows", rows, "target grid rows (0 = image height)");
    cmp->add_option("--pitch-x", pitch_x, "pixel pitch X (nm)");
    cmp->add_option("--pitch-y", pitch_y, "pixel pitch Y (nm)");
    cmp->add_option("--primaries", primaries, "k1,k2,k3 in column order");
    cmp->add_option("--spacings", spacings, "T1,T2,T3 (nm)");
    cmp->add_option("--format", format);
    cmp->add_option("-o,--output", out_path)->required();
    cmp->add_option("--report", report_path, "write stats + verification JSON here");

    // switch
    auto* sw = app.add_subcommand("switch", "drive waveform -> contrast (or current) trace CSV");
    std::string waveform_path;
    double pulse_v = 4.0, pulse_ms = 40.0, dt = 1.0, r_min = 0.0, r_max = 1.0;
    int cycles = 10;
    bool current = false;
    sw->add_option("--waveform", waveform_path, "JSON [{v, ms}, ...]");
    sw->add_option("--pulse-v", pulse_v);
    sw->add_option("--pulse-ms", pulse_ms);
    sw->add_option("--cycles", cycles);
    sw->add_option("--dt", dt, "sample step (ms)");
    sw->add_option("--r-min", r_min);
    sw->add_option("--r-max", r_max);
    sw->add_flag("--current", current, "emit the normalized current instead");
    sw->add_option("-o,--output", out_path);

    // video
    auto* vid = app.add_subcommand("video", "per-frame contrast targets -> residual report");
    std::string targets_path;
    double frame_rate = 25.0;
    vid->add_option("--targets", targets_path, "JSON [[C per pixel] per frame]")->required();
    vid->add_option("--frame-rate", frame_rate, "Hz");
    vid->add_option("-o,--output", out_path);

    // retina-limit
    auto* rl = app.add_subcommand("retina-limit", "pupil size + receptor count -> pixel size");
    double pupil_mm = 8.0, receptors = 120e6;
    rl->add_option("--pupil-mm", pupil_mm);
    rl->add_option("--receptors", receptors);

    // serve
    auto* srv = app.add_subcommand("serve", "start the HTTP service");
    int port = 0;
    std::string host = "127.0.0.1", palette_dir;
    int service_harmonics = 5;
    srv->add_option("--port", port, "default: $RETINA_PORT or 8080");
    srv->add_option("--host", host);
    srv->add_option("--palette-dir", palette_dir, "load <ambient>_<state>.json from here when present");
    srv->add_option("--service-harmonics", service_harmonics, "harmonics for cached and fresh solves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*spec) {
            MetaPixelGeometry g{d, w, t};
            g.validate();
            auto grid = grid_from(lo, hi, step);
            rcwa::SolverOptions opt;
            opt.harmonics = harmonics;
            Spectrum s;
            if (raw) {
                rcwa::Solver solver(metapixel_stack(g, ambient_material(ambient), parse_redox_state(state)), opt);
                s = rcwa::spectrum_sweep(solver, grid, threads);
            } else {
                s = simulate_entry(g, ambient, parse_redox_state(state), grid, opt, threads).spectrum;
            }
            Output out(out_path);
            write_spectrum_csv(out.stream(), s);
        } else if (*pal) {
            PaletteMetadata m;
            m.d = parse_range(d_range, "d");
            m.w = parse_range(w_range, "w");
            m.thickness_nm = t;
            m.ambient = ambient;
            m.state = parse_redox_state(state);
            m.harmonics = harmonics;
            m.grid = grid_from(lo, hi, step);
            for (const auto& e : extras) {
                auto v = parse_list<2>(e, "extra");
                m.extra.push_back(v);
            }
            auto p = build_palette(m, threads);
            std::size_t failed = 0;
            for (const auto& e : p.entries()) failed += !e.ok();
            Output out(out_path);
            io::write_palette(out.stream(), p);
            if (failed) std::cerr << failed << " of " << p.size() << " entries failed; see their error fields\n";
        } else if (*mat) {
            auto p = io::read_palette(palette_path);
            auto target = color_from_hex(hex);
            auto m = match_color(target, p);
            json j = io::entry_json(*m.entry);
            j.erase("spectrum");
            j["delta_e"] = m.delta_e;
            if (m.entry->color.xy) {
                if (auto dw = dominant_wavelength(*m.entry->color.xy)) {
                    j["dominant_wavelength_nm"] = dw->wavelength_nm;
                    j["complementary"] = dw->complementary;
                }
            }
            std::cout << j.dump(2) << '\n';
        } else if (*gam) {
            json reports = json::array();
            for (const auto& path : palette_paths) {
                auto p = io::read_palette(path);
                std::vector<Chromaticity> pts;
                for (const auto& e : p.entries()) {
                    if (!e.ok() || !e.color.xy) continue;
                    if (!keys_filter.empty() &&
                        std::find(keys_filter.begin(), keys_filter.end(), e.key()) == keys_filter.end()) {
                        continue;
                    }
                    pts.push_back(*e.color.xy);
                }
                auto g = gamut_area(pts);
                json r = io::gamut_json(g);
                r["palette"] = path;
                r["ambient"] = p.metadata().ambient;
                r["state"] = to_string(p.metadata().state);
                r["source"] = "simulated";
                reports.push_back(r);
            }
            std::vector<Chromaticity> srgb(kSrgbPrimaries.begin(), kSrgbPrimaries.end());
            json j{{"generated_by", kGeneratedBy}, {"srgb", io::gamut_json(gamut_area(srgb))}, {"palettes", reports}};
            Output out(out_path);
            out.stream() << j.dump(2) << '\n';
        } else if (*cmp) {
            auto p = io::read_palette(palette_path);
            auto img = read_ppm(image_path);
            auto fmt = parse_layout_format(format);
            RenderOptions o;
            o.model = parse_color_model(model);
            o.dither = parse_dither(dither);
            o.columns = columns;
            o.rows = rows;
            o.pitch_x_nm = pitch_x;
            o.pitch_y_nm = pitch_y;
            o.palette_ref = palette_path;
            if (!primaries.empty()) o.primaries = parse_keys(primaries);
            if (!spacings.empty()) o.spacings_nm = parse_list<3>(spacings, "spacings");
            auto compiled = compile_image(img, p, o, threads);
            {
                Output out(out_path, fmt == LayoutFormat::gdsii);
                emit_layout(out.stream(), compiled.document, fmt);
            }
            auto st = layout_stats(compiled.document);
            auto rep = verify_layout(compiled.document);
            json r{{"pixel_count", st.pixel_count},
                   {"grid", {st.columns, st.rows}},
                   {"pitch_nm", {st.pitch_x_nm, st.pitch_y_nm}},
                   {"ppi", {{"x", st.ppi_x}, {"y", st.ppi_y}, {"mean", st.ppi_mean}}},
                   {"disc_count", st.disc_count},
                   {"extent_mm", {st.extent_x_mm, st.extent_y_mm}},
                   {"verify",
                    {{"pass", rep.pass()},
                     {"overlaps", rep.overlap_count},
                     {"min_gap_violations", rep.gap_violation_count},
                     {"pixels_below_four_discs", rep.pixels_below_four_discs}}}};
            if (!report_path.empty()) {
                Output out(report_path);
                out.stream() << r.dump(2) << '\n';
            }
            std::cerr << st.columns << "x" << st.rows << " pixels, " << st.disc_count << " discs, "
                      << static_cast<long>(st.ppi_mean) << " PPI\n";
        } else if (*sw) {
            dynamics::Waveform wf;
            if (!waveform_path.empty()) {
                std::ifstream in(waveform_path);
                json j = json::parse(in, nullptr, false);
                if (j.is_discarded()) throw ValidationError("waveform is not valid JSON", "waveform");
                wf = io::waveform_from_json(j);
            } else {
                wf = dynamics::square_wave(pulse_v, pulse_ms, cycles);
            }
            dynamics::KineticParams kp;
            Output out(out_path);
            if (current) {
                dynamics::write_current_csv(out.stream(), dynamics::current_trace(wf, kp, dt));
            } else {
                dynamics::write_trace_csv(out.stream(), dynamics::contrast_trace(wf, kp, dt, r_min, r_max));
            }
        } else if (*vid) {
            std::ifstream in(targets_path);
            json j = json::parse(in, nullptr, false);
            if (j.is_discarded() || !j.is_array()) throw ValidationError("targets must be a JSON array", "targets");
            std::vector<std::vector<double>> targets;
            try {
                targets = j.get<std::vector<std::vector<double>>>();
            } catch (const json::exception&) {
                throw ValidationError("targets must be [[C, ...], ...]", "targets");
            }
            dynamics::VideoOptions vo;
            vo.frame_rate_hz = frame_rate;
            auto res = dynamics::simulate_video(targets, {}, vo);
            json frames = json::array();
            for (const auto& f : res) frames.push_back({{"frame", f.frame}, {"max", f.max_abs}, {"mean", f.mean_abs}});
            Output out(out_path);
            out.stream() << json{{"frame_rate_hz", frame_rate}, {"frames", frames}}.dump(2) << '\n';
        } else if (*rl) {
            auto r = retina_limit(pupil_mm, receptors);
            std::printf("pixel size: %.1f nm\nresolution: %.0f PPI\n", r.pixel_size_nm, r.ppi);
        } else if (*srv) {
            service::ServiceConfig cfg;
            cfg.harmonics = service_harmonics;
            service::PaletteSet set;
            for (std::string amb : {"air", "electrolyte"}) {
                for (auto st : {RedoxState::colored, RedoxState::dark}) {
                    std::string file = palette_dir.empty()
                                           ? std::string{}
                                           : palette_dir + "/" + amb + "_" + std::string(to_string(st)) + ".json";
                    if (!file.empty() && std::ifstream(file)) {
                        set[{amb, st}] = std::make_shared<const Palette>(io::read_palette(file));
                        std::cerr << "loaded " << file << '\n';
                    } else {
                        std::cerr << "computing " << amb << "/" << to_string(st) << " palette...\n";
                        set[{amb, st}] = std::make_shared<const Palette>(
                            build_palette(service::default_palette_metadata(amb, st, cfg), threads));
                    }
                }
            }
            service::Service svc(std::move(set), cfg);
            httplib::Server server;
            svc.mount(server);
            int p = port ? port : service::port_from_env();
            std::cerr << "listening on " << host << ":" << p << '\n';
            if (!server.listen(host, p)) throw Error("cannot listen on " + host + ":" + std::to_string(p));
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what();
        if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
        std::cerr << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kComputation;
    }
    return kOk;
}
