#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "retina/colorimetry.hpp"
#include "retina/detail/parallel.hpp"
#include "retina/error.hpp"
#include "retina/image.hpp"
#include "retina/palette.hpp"

namespace retina {

// --- retina limit -------------------------------------------------------------

struct RetinaLimit {
    double pupil_diameter_mm = 0.0;
    double photoreceptor_count = 0.0;
    double pixel_size_nm = 0.0;
    double ppi = 0.0;
};

// Pupil disc area shared equally among the photoreceptors.
inline RetinaLimit retina_limit(double pupil_diameter_mm, double photoreceptor_count) {
    if (!(pupil_diameter_mm > 0.0) || !std::isfinite(pupil_diameter_mm)) {
        throw ValidationError("pupil diameter must be positive", "pupil_mm");
    }
    if (!(photoreceptor_count > 0.0) || !std::isfinite(photoreceptor_count)) {
        throw ValidationError("photoreceptor count must be positive", "receptors");
    }
    double r = pupil_diameter_mm / 2.0;
    double pixel_mm = std::sqrt(std::numbers::pi * r * r / photoreceptor_count);
    return {pupil_diameter_mm, photoreceptor_count, pixel_mm * 1e6, 25.4 / pixel_mm};
}

// --- document -----------------------------------------------------------------

enum class ColorModel { subtractive_cmy, additive_rgb };
enum class Dither { none, error_diffusion };

inline std::string_view to_string(ColorModel m) {
    return m == ColorModel::subtractive_cmy ? "subtractive_cmy" : "additive_rgb";
}

inline ColorModel parse_color_model(std::string_view s) {
    if (s == "subtractive_cmy" || s == "subtractive" || s == "cmy") return ColorModel::subtractive_cmy;
    if (s == "additive_rgb" || s == "additive" || s == "rgb") return ColorModel::additive_rgb;
    throw ValidationError("color model must be subtractive_cmy or additive_rgb", "model");
}

inline std::string_view to_string(Dither d) { return d == Dither::none ? "none" : "error_diffusion"; }

inline Dither parse_dither(std::string_view s) {
    if (s == "none" || s == "off") return Dither::none;
    if (s == "error_diffusion" || s == "floyd-steinberg" || s == "fs") return Dither::error_diffusion;
    throw ValidationError("dither must be none or error_diffusion", "dither");
}

// Key of an empty column slot (bare mirror or black background).
inline constexpr std::string_view kEmptyColumn = "none";

struct ColumnGeometry {
    double diameter_nm = 0.0;
    double gap_nm = 0.0;

    double period_nm() const noexcept { return diameter_nm + gap_nm; }
    friend bool operator==(const ColumnGeometry&, const ColumnGeometry&) = default;
};

// Three subpixel columns along X. T[i] is the edge gap after column i; T[2]
// wraps to the next pixel.
struct PixelAssignment {
    std::array<std::string, 3> keys;
    std::array<double, 3> T{};
    friend bool operator==(const PixelAssignment&, const PixelAssignment&) = default;
};

struct Disc {
    double x_nm = 0.0;
    double y_nm = 0.0;
    double diameter_nm = 0.0;
};

class LayoutDocument {
public:
    LayoutDocument() = default;

    LayoutDocument(int columns, int rows, double pitch_x_nm, double pitch_y_nm,
                   std::string palette_ref = {}, ColorModel model = ColorModel::subtractive_cmy)
        : columns_(columns),
          rows_(rows),
          pitch_x_(pitch_x_nm),
          pitch_y_(pitch_y_nm),
          palette_ref_(std::move(palette_ref)),
          model_(model) {
        if (columns <= 0 || rows <= 0) throw ValidationError("layout grid must be nonempty", "grid");
        if (!(pitch_x_nm > 0.0) || !(pitch_y_nm > 0.0) || !std::isfinite(pitch_x_nm) ||
            !std::isfinite(pitch_y_nm)) {
            throw ValidationError("pixel pitch must be positive", "pitch");
        }
        index_.assign(static_cast<std::size_t>(columns) * rows, 0);
    }

    int columns() const noexcept { return columns_; }
    int rows() const noexcept { return rows_; }
    double pitch_x_nm() const noexcept { return pitch_x_; }
    double pitch_y_nm() const noexcept { return pitch_y_; }
    const std::string& palette_ref() const noexcept { return palette_ref_; }
    ColorModel model() const noexcept { return model_; }
    std::size_t pixel_count() const noexcept { return index_.size(); }

    const std::map<std::string, ColumnGeometry, std::less<>>& geometries() const noexcept {
        return geometries_;
    }
    void define_geometry(const std::string& key, ColumnGeometry g) {
        if (key == kEmptyColumn) throw ValidationError("'none' is reserved", "keys");
        if (!(g.diameter_nm > 0.0) || !(g.gap_nm >= 0.0)) {
            throw ValidationError("geometry " + key + " needs D > 0 and W >= 0", "geometries");
        }
        geometries_[key] = g;
    }

    const std::vector<PixelAssignment>& assignments() const noexcept { return table_; }
    // Swatch hex per assignment ("" when unknown).
    const std::vector<std::string>& swatches() const noexcept { return swatches_; }

    // Index of `a` in the assignment table, appending it if new.
    std::uint32_t intern(const PixelAssignment& a, std::string hex = {}) {
        for (std::size_t i = 0; i < table_.size(); ++i) {
            if (table_[i] == a) return static_cast<std::uint32_t>(i);
        }
        table_.push_back(a);
        swatches_.push_back(std::move(hex));
        return static_cast<std::uint32_t>(table_.size() - 1);
    }

    void set_index(int col, int row, std::uint32_t idx) {
        if (idx >= table_.size()) throw ValidationError("assignment index out of range", "pixels");
        index_.at(flat(col, row)) = idx;
    }
    void set(int col, int row, const PixelAssignment& a) { set_index(col, row, intern(a)); }

    std::uint32_t index(int col, int row) const { return index_.at(flat(col, row)); }
    const PixelAssignment& pixel(int col, int row) const { return table_.at(index(col, row)); }
    const std::vector<std::uint32_t>& indices() const noexcept { return index_; }

    ColumnGeometry column_geometry(const std::string& key) const {
        auto it = geometries_.find(key);
        if (it == geometries_.end()) throw ValidationError("layout references unknown key " + key, "keys");
        return it->second;
    }

    // Columns placed edge to edge with gaps T, centred in the pixel; each
    // column repeats its disc along Y at its lattice period.
    std::vector<Disc> assignment_discs(std::uint32_t idx) const {
        const auto& a = table_.at(idx);
        std::array<ColumnGeometry, 3> g{};
        double width = a.T[0] + a.T[1];
        for (int i = 0; i < 3; ++i) {
            if (a.keys[i] != kEmptyColumn) g[i] = column_geometry(a.keys[i]);
            width += g[i].diameter_nm;
        }
        std::vector<Disc> out;
        double x = (pitch_x_ - width) / 2.0;
        for (int i = 0; i < 3; ++i) {
            if (a.keys[i] != kEmptyColumn) {
                int n = discs_per_column(g[i]);
                double cx = x + g[i].diameter_nm / 2.0;
                for (int j = 0; j < n; ++j) {
                    double cy = pitch_y_ / 2.0 + (j - (n - 1) / 2.0) * g[i].period_nm();
                    out.push_back({cx, cy, g[i].diameter_nm});
                }
            }
            x += g[i].diameter_nm + a.T[i];
        }
        return out;
    }

    int discs_per_column(const ColumnGeometry& g) const {
        return std::max(1, static_cast<int>(std::floor(pitch_y_ / g.period_nm() + 1e-9)));
    }

    // Lower-left corner of a pixel; row 0 is the top of the image, so it sits highest.
    std::pair<double, double> pixel_origin(int col, int row) const {
        return {col * pitch_x_, (rows_ - 1 - row) * pitch_y_};
    }

    void validate() const {
        if (index_.empty()) throw ValidationError("layout has no pixels", "grid");
        if (table_.empty()) throw ValidationError("layout has no pixel assignments", "pixels");
        for (const auto& a : table_) {
            for (int i = 0; i < 3; ++i) {
                if (a.keys[i] != kEmptyColumn) column_geometry(a.keys[i]);
                if (!(a.T[i] >= 0.0) || !std::isfinite(a.T[i])) {
                    throw ValidationError("spacings T must be >= 0", "T");
                }
            }
        }
    }

    friend bool operator==(const LayoutDocument&, const LayoutDocument&) = default;

private:
    std::size_t flat(int col, int row) const {
        if (col < 0 || row < 0 || col >= columns_ || row >= rows_) {
            throw ValidationError("pixel outside the layout grid", "grid");
        }
        return static_cast<std::size_t>(row) * columns_ + col;
    }

    int columns_ = 0;
    int rows_ = 0;
    double pitch_x_ = 0.0;
    double pitch_y_ = 0.0;
    std::string palette_ref_;
    ColorModel model_ = ColorModel::subtractive_cmy;
    std::map<std::string, ColumnGeometry, std::less<>> geometries_;
    std::vector<PixelAssignment> table_;
    std::vector<std::string> swatches_;
    std::vector<std::uint32_t> index_;
};

// --- stats --------------------------------------------------------------------

struct LayoutStats {
    std::size_t pixel_count = 0;
    int columns = 0;
    int rows = 0;
    double pitch_x_nm = 0.0;
    double pitch_y_nm = 0.0;
    double mean_pitch_nm = 0.0;  // geometric mean
    double ppi_x = 0.0;
    double ppi_y = 0.0;
    double ppi_mean = 0.0;
    std::size_t disc_count = 0;
    double extent_x_mm = 0.0;
    double extent_y_mm = 0.0;
};

inline LayoutStats layout_stats(const LayoutDocument& doc) {
    LayoutStats s;
    s.pixel_count = doc.pixel_count();
    s.columns = doc.columns();
    s.rows = doc.rows();
    s.pitch_x_nm = doc.pitch_x_nm();
    s.pitch_y_nm = doc.pitch_y_nm();
    s.mean_pitch_nm = std::sqrt(s.pitch_x_nm * s.pitch_y_nm);
    s.ppi_x = 25.4e6 / s.pitch_x_nm;
    s.ppi_y = 25.4e6 / s.pitch_y_nm;
    s.ppi_mean = 25.4e6 / s.mean_pitch_nm;
    s.extent_x_mm = doc.columns() * doc.pitch_x_nm() * 1e-6;
    s.extent_y_mm = doc.rows() * doc.pitch_y_nm() * 1e-6;
    std::vector<std::size_t> uses(doc.assignments().size(), 0);
    for (auto i : doc.indices()) ++uses[i];
    for (std::size_t i = 0; i < uses.size(); ++i) {
        if (uses[i]) s.disc_count += uses[i] * doc.assignment_discs(static_cast<std::uint32_t>(i)).size();
    }
    return s;
}

// --- verification -------------------------------------------------------------

struct LayoutIssue {
    enum class Kind { overlap, min_gap } kind = Kind::overlap;
    int column = 0;
    int row = 0;
    Disc a;
    Disc b;
    double gap_nm = 0.0;
};

struct VerifyOptions {
    double min_gap_nm = 20.0;
    std::size_t max_issues = 100;
};

struct LayoutReport {
    double min_gap_nm = 20.0;
    std::size_t overlap_count = 0;
    std::size_t gap_violation_count = 0;
    double smallest_gap_nm = std::numeric_limits<double>::infinity();
    // Listed issues are capped; the counts are not.
    std::vector<LayoutIssue> issues;
    // Columns with fewer than four discs. Recorded, never failing.
    std::size_t sparse_columns = 0;
    std::size_t pixels_below_four_discs = 0;

    bool overlap_free() const noexcept { return overlap_count == 0; }
    bool min_gap_ok() const noexcept { return gap_violation_count == 0; }
    bool pass() const noexcept { return overlap_free() && min_gap_ok(); }
};

// Pairs are checked within each pixel and against the four forward
// neighbours. Results depend only on (assignment, assignment, offset), so
// each distinct combination is evaluated once.
inline LayoutReport verify_layout(const LayoutDocument& doc, VerifyOptions opt = {}) {
    doc.validate();
    LayoutReport rep;
    rep.min_gap_nm = opt.min_gap_nm;
    const std::size_t n = doc.assignments().size();
    std::vector<std::vector<Disc>> local(n);
    for (std::size_t i = 0; i < n; ++i) local[i] = doc.assignment_discs(static_cast<std::uint32_t>(i));

    struct PairHit {
        Disc a, b;
        double gap;
    };
    const std::array<std::pair<int, int>, 5> offsets{{{0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
    const double px = doc.pitch_x_nm(), py = doc.pitch_y_nm();
    // cache[(i * n + j) * 5 + k] = violating pairs, in the frame of the first pixel.
    std::vector<std::optional<std::vector<PairHit>>> cache(n * n * offsets.size());
    auto pairs = [&](std::size_t i, std::size_t j, std::size_t k) -> const std::vector<PairHit>& {
        auto& slot = cache[(i * n + j) * offsets.size() + k];
        if (slot) return *slot;
        slot.emplace();
        auto [dc, dr] = offsets[k];
        // +row is downwards in the image, i.e. -y.
        double ox = dc * px, oy = -dr * py;
        for (std::size_t p = 0; p < local[i].size(); ++p) {
            for (std::size_t q = (k == 0 ? p + 1 : 0); q < local[j].size(); ++q) {
                Disc a = local[i][p], b = local[j][q];
                b.x_nm += ox;
                b.y_nm += oy;
                double gap = std::hypot(a.x_nm - b.x_nm, a.y_nm - b.y_nm) -
                             (a.diameter_nm + b.diameter_nm) / 2.0;
                if (gap < opt.min_gap_nm) slot->push_back({a, b, gap});
                rep.smallest_gap_nm = std::min(rep.smallest_gap_nm, gap);
            }
        }
        return *slot;
    };

    std::vector<char> sparse(n, 0);
    std::vector<std::size_t> sparse_cols(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = doc.assignments()[i];
        for (const auto& key : a.keys) {
            if (key == kEmptyColumn) continue;
            if (doc.discs_per_column(doc.column_geometry(key)) < 4) {
                sparse[i] = 1;
                ++sparse_cols[i];
            }
        }
    }

    for (int r = 0; r < doc.rows(); ++r) {
        for (int c = 0; c < doc.columns(); ++c) {
            std::size_t i = doc.index(c, r);
            if (sparse[i]) {
                ++rep.pixels_below_four_discs;
                rep.sparse_columns += sparse_cols[i];
            }
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                int c2 = c + offsets[k].first, r2 = r + offsets[k].second;
                if (c2 < 0 || r2 < 0 || c2 >= doc.columns() || r2 >= doc.rows()) continue;
                for (const auto& h : pairs(i, doc.index(c2, r2), k)) {
                    bool overlap = h.gap < 0.0;
                    (overlap ? rep.overlap_count : rep.gap_violation_count)++;
                    if (rep.issues.size() < opt.max_issues) {
                        auto [x0, y0] = doc.pixel_origin(c, r);
                        LayoutIssue is{overlap ? LayoutIssue::Kind::overlap : LayoutIssue::Kind::min_gap,
                                       c, r, h.a, h.b, h.gap};
                        is.a.x_nm += x0;
                        is.a.y_nm += y0;
                        is.b.x_nm += x0;
                        is.b.y_nm += y0;
                        rep.issues.push_back(is);
                    }
                }
            }
        }
    }
    return rep;
}

// --- compilation --------------------------------------------------------------

struct RenderOptions {
    ColorModel model = ColorModel::subtractive_cmy;
    Dither dither = Dither::none;
    // Empty keys select the defaults for the model and the palette ambient.
    std::array<std::string, 3> primaries;
    std::optional<std::array<double, 3>> spacings_nm;
    // Target grid; 0 keeps the image size.
    int columns = 0;
    int rows = 0;
    std::optional<double> pitch_x_nm;
    std::optional<double> pitch_y_nm;
    std::string palette_ref;
};

struct PrimarySet {
    std::array<std::string, 3> keys;
    std::array<double, 3> spacings_nm;
};

// Selected geometries: C/M/Y (or R/G/B) in column order with the spacing
// after each column.
inline PrimarySet default_primaries(ColorModel model, std::string_view ambient) {
    bool air = ambient == "air";
    if (model == ColorModel::subtractive_cmy) {
        return air ? PrimarySet{{"D260_W160", "D240_W100", "D180_W180"}, {100, 60, 60}}
                   : PrimarySet{{"D280_W20", "D220_W80", "D220_W80"}, {40, 300, 60}};
    }
    // R-G 300, G-B 100, B-R 80. No electrolyte spacings are published; the
    // air values are reused.
    return air ? PrimarySet{{"D220_W200", "D260_W200", "D260_W140"}, {300, 100, 80}}
               : PrimarySet{{"D300_W120", "D280_W80", "D260_W40"}, {300, 100, 80}};
}

struct Combination {
    std::array<bool, 3> present{};
    PixelAssignment assignment;
    Spectrum spectrum;
    CIEColor color;
};

// Every subset of the three primaries. An empty slot keeps its column width
// but reflects like the background: the bare mirror (normalized 1) in the
// subtractive model, black (0) in the additive one.
inline std::vector<Combination> enumerate_combinations(
    const std::array<const PaletteEntry*, 3>& primaries, const std::array<double, 3>& spacings_nm,
    ColorModel model) {
    for (const auto* e : primaries) {
        if (!e || !e->ok()) throw ValidationError("palette lacks a usable primary", "primaries");
    }
    const auto& grid = primaries[0]->spectrum.wavelengths();
    for (const auto* e : primaries) {
        if (!e->spectrum.same_grid(primaries[0]->spectrum)) {
            throw ValidationError("primaries differ in wavelength grid", "primaries");
        }
    }
    double background = model == ColorModel::subtractive_cmy ? 1.0 : 0.0;
    double total = 0.0;
    for (const auto* e : primaries) total += e->geometry.period_nm();

    std::vector<Combination> out;
    for (int mask = 0; mask < 8; ++mask) {
        Combination c;
        std::vector<double> v(grid.size(), 0.0);
        for (int i = 0; i < 3; ++i) {
            c.present[i] = (mask >> i) & 1;
            c.assignment.keys[i] = c.present[i] ? primaries[i]->key() : std::string(kEmptyColumn);
            c.assignment.T[i] = spacings_nm[i];
            double w = primaries[i]->geometry.period_nm() / total;
            for (std::size_t k = 0; k < v.size(); ++k) {
                v[k] += w * (c.present[i] ? primaries[i]->spectrum[k] : background);
            }
        }
        c.spectrum = Spectrum(std::vector<double>(grid.begin(), grid.end()), std::move(v));
        c.color = spectrum_to_xyz(c.spectrum);
        out.push_back(std::move(c));
    }
    return out;
}

namespace detail {

inline std::size_t nearest_combination(const std::vector<Lab>& labs, const Lab& t) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < labs.size(); ++i) {
        double d = (labs[i].L - t.L) * (labs[i].L - t.L) + (labs[i].a - t.a) * (labs[i].a - t.a) +
                   (labs[i].b - t.b) * (labs[i].b - t.b);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// Box-filtered resample in linear light.
inline std::vector<LinearRGB> resample_linear(const Image& img, int cols, int rows) {
    std::array<double, 256> lut{};
    for (int i = 0; i < 256; ++i) lut[i] = gamma_decode(i / 255.0);
    std::vector<LinearRGB> out(static_cast<std::size_t>(cols) * rows);
    for (int ty = 0; ty < rows; ++ty) {
        int y0 = static_cast<int>(std::floor(static_cast<double>(ty) * img.height / rows));
        int y1 = std::max(y0 + 1, static_cast<int>(std::ceil(static_cast<double>(ty + 1) * img.height / rows)));
        y1 = std::min(y1, img.height);
        for (int tx = 0; tx < cols; ++tx) {
            int x0 = static_cast<int>(std::floor(static_cast<double>(tx) * img.width / cols));
            int x1 = std::max(x0 + 1, static_cast<int>(std::ceil(static_cast<double>(tx + 1) * img.width / cols)));
            x1 = std::min(x1, img.width);
            LinearRGB acc;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const auto& p = img.at(x, y);
                    acc.r += lut[p[0]];
                    acc.g += lut[p[1]];
                    acc.b += lut[p[2]];
                }
            }
            double n = static_cast<double>((y1 - y0) * (x1 - x0));
            out[static_cast<std::size_t>(ty) * cols + tx] = {acc.r / n, acc.g / n, acc.b / n};
        }
    }
    return out;
}

}  // namespace detail

struct CompiledLayout {
    LayoutDocument document;
    std::vector<Combination> combinations;
};

inline CompiledLayout compile_image(const Image& image, const Palette& palette, const RenderOptions& opt,
                                    unsigned threads = 0) {
    if (image.empty()) throw ValidationError("image is empty", "image");
    if (opt.columns < 0 || opt.rows < 0) throw ValidationError("grid size must be >= 0", "grid");
    PrimarySet ps = default_primaries(opt.model, palette.metadata().ambient);
    for (int i = 0; i < 3; ++i) {
        if (!opt.primaries[i].empty()) ps.keys[i] = opt.primaries[i];
    }
    if (opt.spacings_nm) ps.spacings_nm = *opt.spacings_nm;
    for (double t : ps.spacings_nm) {
        if (!(t >= 0.0)) throw ValidationError("spacings must be >= 0 nm", "T");
    }
    std::array<const PaletteEntry*, 3> prim{};
    for (int i = 0; i < 3; ++i) {
        prim[i] = palette.find(ps.keys[i]);
        if (!prim[i] || !prim[i]->ok()) {
            throw ValidationError("palette lacks required primary " + ps.keys[i], "primaries");
        }
    }

    double natural_x = ps.spacings_nm[0] + ps.spacings_nm[1] + ps.spacings_nm[2];
    double natural_y = 0.0;
    for (const auto* e : prim) {
        natural_x += e->geometry.disc_diameter_nm;
        natural_y = std::max(natural_y, e->geometry.period_nm());
    }
    double px = opt.pitch_x_nm.value_or(natural_x);
    double py = opt.pitch_y_nm.value_or(natural_y);
    if (px < natural_x - 1e-9 || py < natural_y - 1e-9) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "pitch (%g, %g) nm is smaller than the smallest realizable pixel (%g, %g) nm", px,
                      py, natural_x, natural_y);
        throw ValidationError(buf, "pitch");
    }

    int cols = opt.columns ? opt.columns : image.width;
    int rows = opt.rows ? opt.rows : image.height;
    auto combos = enumerate_combinations(prim, ps.spacings_nm, opt.model);
    std::vector<Lab> labs;
    std::vector<LinearRGB> lin;
    for (const auto& c : combos) {
        labs.push_back(xyz_to_lab(c.color.xyz));
        lin.push_back(xyz_to_linear_srgb(c.color.xyz));
    }

    auto target = detail::resample_linear(image, cols, rows);
    std::vector<std::uint8_t> choice(target.size());
    auto lab_of = [](const LinearRGB& c) {
        LinearRGB k{std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
        return xyz_to_lab(linear_srgb_to_xyz(k));
    };
    if (opt.dither == Dither::none) {
        detail::parallel_for(static_cast<std::size_t>(rows), threads, [&](std::size_t r) {
            for (int c = 0; c < cols; ++c) {
                std::size_t i = r * cols + c;
                choice[i] = static_cast<std::uint8_t>(detail::nearest_combination(labs, lab_of(target[i])));
            }
        });
    } else {
        // Floyd-Steinberg, serpentine-free, residual in linear RGB.
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                std::size_t i = static_cast<std::size_t>(r) * cols + c;
                auto k = detail::nearest_combination(labs, lab_of(target[i]));
                choice[i] = static_cast<std::uint8_t>(k);
                LinearRGB e{target[i].r - lin[k].r, target[i].g - lin[k].g, target[i].b - lin[k].b};
                auto push = [&](int dc, int dr, double w) {
                    int c2 = c + dc, r2 = r + dr;
                    if (c2 < 0 || c2 >= cols || r2 >= rows) return;
                    auto& t = target[static_cast<std::size_t>(r2) * cols + c2];
                    t.r += w * e.r;
                    t.g += w * e.g;
                    t.b += w * e.b;
                };
                push(1, 0, 7.0 / 16);
                push(-1, 1, 3.0 / 16);
                push(0, 1, 5.0 / 16);
                push(1, 1, 1.0 / 16);
            }
        }
    }

    LayoutDocument doc(cols, rows, px, py, opt.palette_ref, opt.model);
    for (const auto* e : prim) {
        doc.define_geometry(e->key(), {e->geometry.disc_diameter_nm, e->geometry.gap_nm});
    }
    std::array<int, 8> remap;
    remap.fill(-1);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto k = choice[static_cast<std::size_t>(r) * cols + c];
            if (remap[k] < 0) {
                remap[k] = static_cast<int>(doc.intern(combos[k].assignment, srgb_hex(combos[k].color.srgb)));
            }
            doc.set_index(c, r, static_cast<std::uint32_t>(remap[k]));
        }
    }
    return {std::move(doc), std::move(combos)};
}

// --- emission -----------------------------------------------------------------

enum class LayoutFormat { json, svg, gdsii };

inline LayoutFormat parse_layout_format(std::string_view s) {
    if (s == "json") return LayoutFormat::json;
    if (s == "svg") return LayoutFormat::svg;
    if (s == "gdsii" || s == "gds") return LayoutFormat::gdsii;
    throw ValidationError("format must be json, svg or gdsii", "format");
}

namespace detail {

inline nlohmann::json assignment_json(const PixelAssignment& a) {
    return {{"keys", a.keys}, {"T", a.T}};
}

inline PixelAssignment assignment_from_json(const nlohmann::json& j) {
    PixelAssignment a;
    const auto& k = j.at("keys");
    const auto& t = j.at("T");
    if (!k.is_array() || k.size() != 3 || !t.is_array() || t.size() != 3) {
        throw ValidationError("pixel needs three keys and three spacings", "pixels");
    }
    for (int i = 0; i < 3; ++i) {
        a.keys[i] = k[i].get<std::string>();
        a.T[i] = t[i].get<double>();
    }
    return a;
}

}  // namespace detail

// Pixels are written row by row; memory stays proportional to the
// assignment table, not the grid.
inline void emit_layout_json(std::ostream& out, const LayoutDocument& doc) {
    doc.validate();
    nlohmann::json head;
    head["generated_by"] = kGeneratedBy;
    head["model"] = to_string(doc.model());
    head["grid"] = {doc.columns(), doc.rows()};
    head["pitch_nm"] = {doc.pitch_x_nm(), doc.pitch_y_nm()};
    head["palette_ref"] = doc.palette_ref();
    auto& geo = head["geometries"] = nlohmann::json::object();
    for (const auto& [k, g] : doc.geometries()) geo[k] = {{"D", g.diameter_nm}, {"W", g.gap_nm}};
    auto& sw = head["swatches"] = nlohmann::json::array();
    for (std::size_t i = 0; i < doc.assignments().size(); ++i) {
        auto j = detail::assignment_json(doc.assignments()[i]);
        j["hex"] = doc.swatches()[i];
        sw.push_back(std::move(j));
    }
    std::string h = head.dump();
    h.pop_back();  // reopen the object
    out << h << ",\"pixels\":[";
    std::vector<std::string> cached;
    for (const auto& a : doc.assignments()) cached.push_back(detail::assignment_json(a).dump());
    bool first = true;
    for (auto i : doc.indices()) {
        if (!first) out.put(',');
        first = false;
        out << cached[i];
    }
    out << "]}\n";
    if (!out) throw Error("failed writing layout JSON");
}

inline LayoutDocument parse_layout_json(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("layout JSON: ") + e.what(), "layout");
    }
    try {
        const auto& grid = j.at("grid");
        const auto& pitch = j.at("pitch_nm");
        LayoutDocument doc(grid.at(0).get<int>(), grid.at(1).get<int>(), pitch.at(0).get<double>(),
                           pitch.at(1).get<double>(), j.value("palette_ref", std::string{}),
                           parse_color_model(j.value("model", std::string("subtractive_cmy"))));
        if (j.contains("geometries")) {
            for (const auto& [k, g] : j.at("geometries").items()) {
                doc.define_geometry(k, {g.at("D").get<double>(), g.at("W").get<double>()});
            }
        }
        if (j.contains("swatches")) {
            for (const auto& s : j.at("swatches")) {
                doc.intern(detail::assignment_from_json(s), s.value("hex", std::string{}));
            }
        }
        const auto& px = j.at("pixels");
        if (px.size() != doc.pixel_count()) {
            throw ValidationError("pixel count does not match the grid", "pixels");
        }
        for (std::size_t i = 0; i < px.size(); ++i) {
            int c = static_cast<int>(i % doc.columns()), r = static_cast<int>(i / doc.columns());
            doc.set(c, r, detail::assignment_from_json(px[i]));
        }
        doc.validate();
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("layout JSON: ") + e.what(), "layout");
    }
}

inline constexpr std::size_t kSvgDiscLimit = 100000;

inline void emit_layout_svg(std::ostream& out, const LayoutDocument& doc) {
    doc.validate();
    const double w = doc.columns() * doc.pitch_x_nm(), h = doc.rows() * doc.pitch_y_nm();
    const bool discs = doc.pixel_count() <= kSvgDiscLimit;
    char buf[256];
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.3f %.3f\" width=\"%d\" "
                  "height=\"%d\">\n",
                  w, h, std::min(doc.columns() * 8, 4096),
                  static_cast<int>(std::lround(std::min(doc.columns() * 8, 4096) * h / w)));
    out << buf;
    out << "<!-- " << doc.columns() << "x" << doc.rows() << " pixels, units nm -->\n";
    if (!discs) {
        out << "<!-- discs omitted: " << doc.pixel_count() << " pixels exceeds " << kSvgDiscLimit
            << " -->\n";
    }
    std::vector<std::vector<Disc>> local;
    if (discs) {
        for (std::size_t i = 0; i < doc.assignments().size(); ++i) {
            local.push_back(doc.assignment_discs(static_cast<std::uint32_t>(i)));
        }
    }
    for (int r = 0; r < doc.rows(); ++r) {
        for (int c = 0; c < doc.columns(); ++c) {
            auto i = doc.index(c, r);
            const auto& hex = doc.swatches()[i];
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\" fill=\"%s\"/>\n",
                          c * doc.pitch_x_nm(), r * doc.pitch_y_nm(), doc.pitch_x_nm(), doc.pitch_y_nm(),
                          hex.empty() ? "#808080" : hex.c_str());
            out << buf;
            if (!discs) continue;
            auto [x0, y0] = doc.pixel_origin(c, r);
            for (const auto& d : local[i]) {
                std::snprintf(buf, sizeof buf,
                              "<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.3f\" fill=\"#202020\" "
                              "fill-opacity=\"0.3\"/>\n",
                              x0 + d.x_nm, h - (y0 + d.y_nm), d.diameter_nm / 2.0);
                out << buf;
            }
        }
    }
    out << "</svg>\n";
    if (!out) throw Error("failed writing layout SVG");
}

namespace gds {

enum Record : std::uint16_t {
    HEADER = 0x0002,
    BGNLIB = 0x0102,
    LIBNAME = 0x0206,
    UNITS = 0x0305,
    ENDLIB = 0x0400,
    BGNSTR = 0x0502,
    STRNAME = 0x0606,
    ENDSTR = 0x0700,
    BOUNDARY = 0x0800,
    LAYER = 0x0D02,
    DATATYPE = 0x0E02,
    XY = 0x1003,
    ENDEL = 0x1100,
};

inline constexpr int kPolygonSides = 32;

// Excess-64 base-16 real, 8 bytes big-endian.
inline std::uint64_t encode_real(double v) {
    if (v == 0.0) return 0;
    std::uint64_t sign = 0;
    if (v < 0) {
        sign = 1ull << 63;
        v = -v;
    }
    int e = 64;
    while (v >= 1.0) {
        v /= 16.0;
        ++e;
    }
    while (v < 1.0 / 16.0) {
        v *= 16.0;
        --e;
    }
    auto m = static_cast<std::uint64_t>(std::llround(std::ldexp(v, 56)));
    if (m >> 56) {  // rounding carried into a new hex digit
        m >>= 4;
        ++e;
    }
    return sign | (static_cast<std::uint64_t>(e) << 56) | m;
}

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void record(Record r, const std::vector<std::uint8_t>& payload = {}) {
        std::size_t len = 4 + payload.size();
        if (len > 0xFFFF) throw Error("GDSII record too long");
        put16(static_cast<std::uint16_t>(len));
        put16(r);
        out_.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    }

    void int2(Record r, std::initializer_list<std::int16_t> v) {
        std::vector<std::uint8_t> p;
        for (auto x : v) append(p, static_cast<std::uint16_t>(x), 2);
        record(r, p);
    }

    void ascii(Record r, std::string s) {
        if (s.size() % 2) s.push_back('\0');
        record(r, std::vector<std::uint8_t>(s.begin(), s.end()));
    }

    void reals(Record r, std::initializer_list<double> v) {
        std::vector<std::uint8_t> p;
        for (double x : v) append(p, encode_real(x), 8);
        record(r, p);
    }

    void xy(const std::vector<std::pair<std::int32_t, std::int32_t>>& pts) {
        std::vector<std::uint8_t> p;
        for (auto [x, y] : pts) {
            append(p, static_cast<std::uint32_t>(x), 4);
            append(p, static_cast<std::uint32_t>(y), 4);
        }
        record(XY, p);
    }

private:
    static void append(std::vector<std::uint8_t>& p, std::uint64_t v, int bytes) {
        for (int i = bytes - 1; i >= 0; --i) p.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put16(std::uint16_t v) {
        out_.put(static_cast<char>(v >> 8));
        out_.put(static_cast<char>(v & 0xFF));
    }

    std::ostream& out_;
};

// Closed 32-gon, vertices rounded to the 1 nm database grid.
inline std::vector<std::pair<std::int32_t, std::int32_t>> disc_polygon(const Disc& d) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pts;
    double r = d.diameter_nm / 2.0;
    for (int k = 0; k <= kPolygonSides; ++k) {
        double a = 2.0 * std::numbers::pi * (k % kPolygonSides) / kPolygonSides;
        pts.emplace_back(static_cast<std::int32_t>(std::llround(d.x_nm + r * std::cos(a))),
                         static_cast<std::int32_t>(std::llround(d.y_nm + r * std::sin(a))));
    }
    return pts;
}

}  // namespace gds

// One structure, one BOUNDARY per disc on layer 1. Dates are fixed so output
// is reproducible.
inline std::size_t emit_layout_gdsii(std::ostream& out, const LayoutDocument& doc,
                                     std::string structure = "METAPIXELS") {
    doc.validate();
    if (doc.columns() * doc.pitch_x_nm() > 2.1e9 || doc.rows() * doc.pitch_y_nm() > 2.1e9) {
        throw ValidationError("layout exceeds the 32-bit GDSII coordinate range", "grid");
    }
    gds::Writer w(out);
    const std::initializer_list<std::int16_t> date{2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0};
    w.int2(gds::HEADER, {600});
    w.int2(gds::BGNLIB, date);
    w.ascii(gds::LIBNAME, "RETINA.DB");
    w.reals(gds::UNITS, {1e-3, 1e-9});
    w.int2(gds::BGNSTR, date);
    w.ascii(gds::STRNAME, std::move(structure));
    std::vector<std::vector<Disc>> local;
    for (std::size_t i = 0; i < doc.assignments().size(); ++i) {
        local.push_back(doc.assignment_discs(static_cast<std::uint32_t>(i)));
    }
    std::size_t count = 0;
    for (int r = 0; r < doc.rows(); ++r) {
        for (int c = 0; c < doc.columns(); ++c) {
            auto [x0, y0] = doc.pixel_origin(c, r);
            for (Disc d : local[doc.index(c, r)]) {
                d.x_nm += x0;
                d.y_nm += y0;
                w.record(gds::BOUNDARY);
                w.int2(gds::LAYER, {1});
                w.int2(gds::DATATYPE, {0});
                w.xy(gds::disc_polygon(d));
                w.record(gds::ENDEL);
                ++count;
            }
        }
    }
    w.record(gds::ENDSTR);
    w.record(gds::ENDLIB);
    if (!out) throw Error("failed writing GDSII stream");
    return count;
}

inline void emit_layout(std::ostream& out, const LayoutDocument& doc, LayoutFormat format) {
    switch (format) {
        case LayoutFormat::json: emit_layout_json(out, doc); break;
        case LayoutFormat::svg: emit_layout_svg(out, doc); break;
        case LayoutFormat::gdsii: emit_layout_gdsii(out, doc); break;
    }
}

}  // namespace retina
