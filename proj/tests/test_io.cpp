#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "retina/io.hpp"

using namespace retina;
using nlohmann::json;

namespace {

std::vector<double> bump(double centre) {
    std::vector<double> v;
    for (double w : wavelength_grid(400, 700, 20)) v.push_back(0.05 + 0.9 * std::exp(-std::pow((w - centre) / 40, 2)));
    return v;
}

Palette sample() {
    PaletteMetadata m;
    m.grid = wavelength_grid(400, 700, 20);
    m.extra = {{180, 180}};
    Palette p(m);
    for (auto [d, w, c] : {std::tuple{220.0, 200.0, 620.0}, {260.0, 140.0, 540.0}, {180.0, 180.0, 460.0}}) {
        PaletteEntry e{{d, w, 110}, "air", RedoxState::colored, Spectrum(m.grid, bump(c)), {}, {}};
        e.color = spectrum_to_xyz(e.spectrum);
        p.add(std::move(e));
    }
    p.add(PaletteEntry{{300, 100, 110}, "air", RedoxState::colored, {}, {}, "solver diverged"});
    return p;
}

json dumped(const Palette& p) {
    std::stringstream s;
    io::write_palette(s, p);
    return json::parse(s.str());
}

Palette reread(const json& j) {
    std::istringstream in(j.dump());
    return io::read_palette(in);
}

}  // namespace

TEST(PaletteJson, RoundTrip) {
    auto p = sample();
    auto j = dumped(p);
    EXPECT_EQ(j["generated_by"], kGeneratedBy);
    EXPECT_EQ(j["metadata"]["state"], "colored");
    EXPECT_EQ(j["entries"].size(), 4u);
    EXPECT_EQ(j["entries"][3]["error"], "solver diverged");
    EXPECT_FALSE(j["entries"][3].contains("spectrum"));
    auto q = reread(j);
    EXPECT_EQ(q.metadata(), p.metadata());
    ASSERT_EQ(q.entries().size(), 4u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = p.entries()[i];
        const auto& b = q.entries()[i];
        EXPECT_EQ(a.key(), b.key());
        EXPECT_TRUE(std::ranges::equal(a.spectrum.values(), b.spectrum.values()));
        EXPECT_EQ(srgb_hex(a.color.srgb), srgb_hex(b.color.srgb));
        EXPECT_EQ(a.color.xyz.Y, b.color.xyz.Y);
    }
    EXPECT_FALSE(q.entries()[3].ok());
}

TEST(PaletteJson, SwatchFieldsAgree) {
    for (const auto& e : dumped(sample())["entries"]) {
        if (e.contains("error")) continue;
        auto xy = e["xy"].get<std::vector<double>>();
        auto c = make_color(xyY_to_xyz({xy[0], xy[1]}, e["Y"].get<double>()));
        EXPECT_EQ(srgb_hex(c.srgb), e["srgb_hex"].get<std::string>());
    }
}

TEST(PaletteJson, TamperingIsRejected) {
    auto j = dumped(sample());
    auto hex = j;
    hex["entries"][0]["srgb_hex"] = "#000001";
    try {
        reread(hex);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "srgb_hex");
    }
    auto xy = j;
    xy["entries"][1]["xy"][0] = xy["entries"][1]["xy"][0].get<double>() + 1e-6;
    EXPECT_THROW(reread(xy), ValidationError);
    auto key = j;
    key["entries"][0]["key"] = "D221_W200";
    try {
        reread(key);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "key");
    }
    auto grid = j;
    grid["entries"][0]["spectrum"].erase(0);
    EXPECT_THROW(reread(grid), ValidationError);
    auto ambient = j;
    ambient["metadata"]["ambient"] = "vacuum grease";
    EXPECT_THROW(reread(ambient), ValidationError);
    auto missing = j;
    missing.erase("metadata");
    EXPECT_THROW(reread(missing), ValidationError);
    std::istringstream junk("[1,2");
    EXPECT_THROW(io::read_palette(junk), ValidationError);
    EXPECT_THROW(io::read_palette(std::filesystem::path("/nonexistent/palette.json")), ValidationError);
}

TEST(GamutJson, Shape) {
    auto g = gamut_area({{0.64, 0.33}, {0.3, 0.6}, {0.15, 0.06}, {0.3, 0.3}});
    auto j = io::gamut_json(g);
    EXPECT_EQ(j["points"].size(), 4u);
    EXPECT_EQ(j["hull"].size(), 3u);
    EXPECT_NEAR(j["hull_area"].get<double>(), 0.11205, 1e-5);
}

TEST(WaveformJson, ParsesAndValidates) {
    auto w = io::waveform_from_json(json::parse(R"([{"v": 4, "ms": 40}, {"v": -4, "ms": 40}])"));
    ASSERT_EQ(w.segments.size(), 2u);
    EXPECT_EQ(w.segments[1].voltage, -4);
    EXPECT_EQ(w.duration_ms(), 80);
    EXPECT_THROW(io::waveform_from_json(json::parse(R"({"v": 4})")), ValidationError);
    EXPECT_THROW(io::waveform_from_json(json::parse(R"([{"v": 4}])")), ValidationError);
    EXPECT_THROW(io::waveform_from_json(json::parse(R"([{"v": 4, "ms": 0}])")), ValidationError);
    EXPECT_TRUE(io::waveform_from_json(json::array()).segments.empty());
}
