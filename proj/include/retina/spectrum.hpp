#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "retina/error.hpp"

namespace retina {

// Per-wavelength values on a strictly increasing wavelength grid (nm).
class Spectrum {
public:
    Spectrum() = default;

    Spectrum(std::vector<double> wavelengths_nm, std::vector<double> values)
        : wavelengths_(std::move(wavelengths_nm)), values_(std::move(values)) {
        if (wavelengths_.size() != values_.size()) {
            throw ValidationError("spectrum grid and values differ in length");
        }
        for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
            if (!(wavelengths_[i] > wavelengths_[i - 1])) {
                throw ValidationError("spectrum wavelengths must be strictly increasing");
            }
        }
    }

    static Spectrum constant(std::vector<double> grid, double value) {
        std::vector<double> v(grid.size(), value);
        return {std::move(grid), std::move(v)};
    }

    std::span<const double> wavelengths() const noexcept { return wavelengths_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double wavelength(std::size_t i) const { return wavelengths_.at(i); }
    double operator[](std::size_t i) const { return values_[i]; }

    bool same_grid(const Spectrum& other) const noexcept {
        return wavelengths_ == other.wavelengths_;
    }

    // Index of the largest value (first on ties).
    std::size_t argmax() const {
        if (values_.empty()) throw ValidationError("argmax of an empty spectrum");
        std::size_t best = 0;
        for (std::size_t i = 1; i < values_.size(); ++i) {
            if (values_[i] > values_[best]) best = i;
        }
        return best;
    }

    double peak_wavelength_nm() const { return wavelengths_[argmax()]; }
    double max_value() const { return values_[argmax()]; }

    friend bool operator==(const Spectrum&, const Spectrum&) = default;

private:
    std::vector<double> wavelengths_;
    std::vector<double> values_;
};

// lo, lo + step, ..., hi (inclusive when hi lands on the lattice).
inline std::vector<double> wavelength_grid(double lo_nm = 400.0, double hi_nm = 700.0,
                                           double step_nm = 5.0) {
    if (!(step_nm > 0.0) || !(hi_nm >= lo_nm)) {
        throw ValidationError("invalid wavelength grid", "grid");
    }
    auto count = static_cast<std::size_t>(std::floor((hi_nm - lo_nm) / step_nm + 1e-9)) + 1;
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) g[i] = lo_nm + static_cast<double>(i) * step_nm;
    return g;
}

inline std::vector<double> default_wavelength_grid() { return wavelength_grid(400.0, 700.0, 5.0); }

inline void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
    std::ostringstream os;
    os.precision(17);
    os << "wavelength_nm,value\n";
    for (std::size_t i = 0; i < s.size(); ++i) os << s.wavelength(i) << ',' << s[i] << '\n';
    out << os.str();
}

inline Spectrum read_spectrum_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("wavelength_nm,value", 0) != 0) {
        throw ValidationError("spectrum CSV must start with header wavelength_nm,value");
    }
    std::vector<double> w, v;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ValidationError("malformed spectrum CSV row");
        try {
            w.push_back(std::stod(line.substr(0, comma)));
            v.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw ValidationError("malformed spectrum CSV row: " + line);
        }
    }
    return {std::move(w), std::move(v)};
}

}  // namespace retina
