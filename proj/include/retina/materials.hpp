#pragma once

#include <algorithm>
#include <cctype>
#include <complex>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "retina/detail/tables.hpp"
#include "retina/error.hpp"

namespace retina {

enum class RedoxState { colored, dark, none };

inline std::string_view to_string(RedoxState s) {
    switch (s) {
        case RedoxState::colored: return "colored";
        case RedoxState::dark: return "dark";
        case RedoxState::none: return "n/a";
    }
    return "n/a";
}

inline RedoxState parse_redox_state(std::string_view s) {
    if (s == "colored") return RedoxState::colored;
    if (s == "dark") return RedoxState::dark;
    if (s == "n/a" || s == "none") return RedoxState::none;
    throw ValidationError("unknown redox state '" + std::string(s) + "'", "state");
}

// Complex refractive index n + ik (k >= 0 is absorption).
struct NK {
    double n = 1.0;
    double k = 0.0;

    std::complex<double> index() const { return {n, k}; }
    std::complex<double> permittivity() const { return index() * index(); }
};

struct DispersionSample {
    double wavelength_nm;
    double n;
    double k;
};

// Tabulated (n, k) dispersion of one material in one redox state.
// Immutable after construction; every query is const.
class MaterialModel {
public:
    MaterialModel(std::string name, RedoxState state, std::vector<DispersionSample> samples)
        : name_(std::move(name)), state_(state), samples_(std::move(samples)) {
        if (samples_.size() < 2) {
            throw ValidationError("material '" + name_ + "' needs at least 2 samples");
        }
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto& s = samples_[i];
            if (!(s.n > 0.0)) {
                throw ValidationError("material '" + name_ + "': n must be positive at " +
                                      std::to_string(s.wavelength_nm) + " nm");
            }
            if (!(s.k >= 0.0)) {
                throw ValidationError("material '" + name_ + "': k must be nonnegative at " +
                                      std::to_string(s.wavelength_nm) + " nm");
            }
            if (i > 0 && !(s.wavelength_nm > samples_[i - 1].wavelength_nm)) {
                throw ValidationError("material '" + name_ +
                                      "': wavelengths must be strictly increasing");
            }
        }
    }

    const std::string& name() const noexcept { return name_; }
    RedoxState state() const noexcept { return state_; }
    std::span<const DispersionSample> samples() const noexcept { return samples_; }
    double min_wavelength_nm() const noexcept { return samples_.front().wavelength_nm; }
    double max_wavelength_nm() const noexcept { return samples_.back().wavelength_nm; }

    bool covers(double wavelength_nm) const noexcept {
        return wavelength_nm >= min_wavelength_nm() && wavelength_nm <= max_wavelength_nm();
    }

    // Linear interpolation; sample points are returned exactly.
    NK nk(double wavelength_nm) const {
        if (!covers(wavelength_nm)) {
            std::ostringstream os;
            os << "wavelength " << wavelength_nm << " nm outside table span ["
               << min_wavelength_nm() << ", " << max_wavelength_nm() << "] of '" << name_ << "'";
            throw ValidationError(os.str(), "wavelength");
        }
        auto hi = std::lower_bound(
            samples_.begin(), samples_.end(), wavelength_nm,
            [](const DispersionSample& s, double w) { return s.wavelength_nm < w; });
        if (hi->wavelength_nm == wavelength_nm) return {hi->n, hi->k};
        auto lo = hi - 1;
        double t = (wavelength_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
        return {lo->n + t * (hi->n - lo->n), lo->k + t * (hi->k - lo->k)};
    }

    bool is_lossless() const noexcept {
        return std::all_of(samples_.begin(), samples_.end(),
                           [](const DispersionSample& s) { return s.k == 0.0; });
    }

    // Copy with every k forced to zero.
    MaterialModel lossless() const {
        auto s = samples_;
        for (auto& x : s) x.k = 0.0;
        return MaterialModel(name_ + "/lossless", state_, std::move(s));
    }

    // Non-dispersive material over [lo, hi] nm.
    static MaterialModel constant(std::string name, NK value, double lo_nm = 300.0,
                                  double hi_nm = 1000.0) {
        return MaterialModel(std::move(name), RedoxState::none,
                             {{lo_nm, value.n, value.k}, {hi_nm, value.n, value.k}});
    }

private:
    std::string name_;
    RedoxState state_;
    std::vector<DispersionSample> samples_;
};

struct RelativeIndex {
    std::complex<double> m;
};

// m = (n_p + i k_p) / (n_env + i k_env)
inline RelativeIndex relative_index(const MaterialModel& particle, const MaterialModel& ambient,
                                    double wavelength_nm) {
    auto p = particle.nk(wavelength_nm).index();
    auto e = ambient.nk(wavelength_nm).index();
    if (std::abs(e) == 0.0) {
        throw ValidationError("ambient index is zero for '" + ambient.name() + "'");
    }
    return {p / e};
}

// Parse a `wavelength_nm,n,k` CSV table.
inline MaterialModel load_dispersion_table(std::istream& in, std::string name,
                                           RedoxState state = RedoxState::none) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty dispersion table '" + name + "'");
    auto strip = [](std::string s) {
        s.erase(std::remove_if(s.begin(), s.end(),
                               [](unsigned char c) { return std::isspace(c) != 0; }),
                s.end());
        return s;
    };
    if (strip(line) != "wavelength_nm,n,k") {
        throw ValidationError("dispersion table '" + name +
                              "' must start with header wavelength_nm,n,k");
    }
    std::vector<DispersionSample> samples;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip(line);
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw ValidationError("dispersion table '" + name + "' line " +
                                  std::to_string(line_no) + ": expected 3 columns");
        }
        try {
            std::size_t pa = 0, pb = 0, pc = 0;
            DispersionSample s{std::stod(a, &pa), std::stod(b, &pb), std::stod(c, &pc)};
            if (pa != a.size() || pb != b.size() || pc != c.size()) throw std::invalid_argument(line);
            samples.push_back(s);
        } catch (const std::logic_error&) {
            throw ValidationError("dispersion table '" + name + "' line " +
                                  std::to_string(line_no) + ": not a number");
        }
    }
    return MaterialModel(std::move(name), state, std::move(samples));
}

inline MaterialModel load_dispersion_table(const std::filesystem::path& path,
                                           RedoxState state = RedoxState::none) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dispersion table " + path.string());
    return load_dispersion_table(in, path.stem().string(), state);
}

namespace detail {

template <std::size_t N>
MaterialModel from_table(const char* name, RedoxState state,
                         const std::array<MaterialRow, N>& rows) {
    std::vector<DispersionSample> s;
    s.reserve(N);
    for (const auto& r : rows) s.push_back({r.wavelength_nm, r.n, r.k});
    return MaterialModel(name, state, std::move(s));
}

inline const std::map<std::string, MaterialModel, std::less<>>& builtin_library() {
    static const std::map<std::string, MaterialModel, std::less<>> lib = [] {
        std::map<std::string, MaterialModel, std::less<>> m;
        m.emplace("wo3_colored", from_table("wo3_colored", RedoxState::colored, k_wo3_colored));
        m.emplace("wo3_dark", from_table("wo3_dark", RedoxState::dark, k_wo3_dark));
        m.emplace("air", from_table("air", RedoxState::none, k_air));
        m.emplace("electrolyte", from_table("electrolyte", RedoxState::none, k_electrolyte));
        m.emplace("al", from_table("al", RedoxState::none, k_al));
        m.emplace("pt", from_table("pt", RedoxState::none, k_pt));
        return m;
    }();
    return lib;
}

}  // namespace detail

// Built-in tables: wo3_colored, wo3_dark, air, electrolyte, al, pt.
inline const MaterialModel& builtin_material(std::string_view key) {
    const auto& lib = detail::builtin_library();
    auto it = lib.find(key);
    if (it == lib.end()) {
        throw ValidationError("unknown material '" + std::string(key) + "'", "material");
    }
    return it->second;
}

inline std::vector<std::string> builtin_material_names() {
    std::vector<std::string> names;
    for (const auto& [k, _] : detail::builtin_library()) names.push_back(k);
    return names;
}

inline const MaterialModel& wo3(RedoxState state) {
    if (state == RedoxState::none) {
        throw ValidationError("WO3 requires a redox state (colored or dark)", "state");
    }
    return builtin_material(state == RedoxState::colored ? "wo3_colored" : "wo3_dark");
}

// Ambient selectors used across the toolchain: "air" or "electrolyte".
inline const MaterialModel& ambient_material(std::string_view ambient) {
    if (ambient != "air" && ambient != "electrolyte") {
        throw ValidationError("ambient must be 'air' or 'electrolyte', got '" +
                                  std::string(ambient) + "'",
                              "ambient");
    }
    return builtin_material(ambient);
}

}  // namespace retina
