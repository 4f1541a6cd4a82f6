#include <gtest/gtest.h>

#include "retina/palette.hpp"

using namespace retina;

namespace {

PaletteMetadata quick(SweepRange d, SweepRange w, int harmonics = 2) {
    PaletteMetadata m;
    m.d = d;
    m.w = w;
    m.harmonics = harmonics;
    m.grid = wavelength_grid(400, 700, 20);
    return m;
}

PaletteEntry synthetic(double d, double w, std::vector<double> values) {
    auto g = wavelength_grid(400, 700, 20);
    PaletteEntry e{{d, w, 110}, "air", RedoxState::colored, Spectrum(g, std::move(values)), {}, {}};
    e.color = spectrum_to_xyz(e.spectrum);
    return e;
}

std::vector<double> bump(double centre, double width = 40) {
    std::vector<double> v;
    for (double w : wavelength_grid(400, 700, 20)) v.push_back(0.05 + 0.9 * std::exp(-std::pow((w - centre) / width, 2)));
    return v;
}

double cross(Chromaticity o, Chromaticity a, Chromaticity b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

TEST(Palette, KeyFormat) {
    EXPECT_EQ(palette_key(220, 200), "D220_W200");
    EXPECT_EQ(palette_key(222.5, 80), "D222.5_W80");
}

TEST(Palette, SweepRangeValues) {
    EXPECT_EQ((SweepRange{220, 320, 20}.values().size()), 6u);
    EXPECT_EQ((SweepRange{220, 220, 20}.values()), std::vector<double>{220});
    EXPECT_EQ((SweepRange{100, 150, 20}.values()), (std::vector<double>{100, 120, 140}));
    EXPECT_THROW((SweepRange{300, 200, 20}.values()), ValidationError);
    EXPECT_THROW((SweepRange{200, 300, 0}.values()), ValidationError);
}

TEST(Palette, FullSweepBoxHas36Entries) {
    auto p = build_palette(quick({220, 320, 20}, {100, 200, 20}), 1);
    EXPECT_EQ(p.size(), 36u);
    for (const auto& e : p.entries()) {
        EXPECT_TRUE(e.ok()) << e.key();
        EXPECT_EQ(e.geometry.thickness_nm, 110.0);
        EXPECT_EQ(e.spectrum.size(), 16u);
        EXPECT_TRUE(e.color.xy.has_value());
    }
    EXPECT_NE(p.find(320, 200), nullptr);
    EXPECT_EQ(p.find(330, 200), nullptr);
}

TEST(Palette, SinglePoint) {
    auto p = build_palette(quick({220, 220, 20}, {200, 200, 20}), 1);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.entries()[0].key(), "D220_W200");
}

TEST(Palette, EmptyRangeRejected) {
    EXPECT_THROW(build_palette(quick({300, 200, 20}, {100, 100, 20})), ValidationError);
    auto m = quick({220, 220, 20}, {200, 200, 20});
    m.state = RedoxState::none;
    EXPECT_THROW(build_palette(m), ValidationError);
    m = quick({220, 220, 20}, {200, 200, 20});
    m.ambient = "vacuum";
    EXPECT_THROW(build_palette(m), ValidationError);
}

TEST(Palette, ExtrasAreAddedOnceAndFailuresKept) {
    auto m = quick({220, 240, 20}, {200, 200, 20});
    m.extra = {{220, 200}, {260, 140}, {0, 0}};
    auto p = build_palette(m, 1);
    ASSERT_EQ(p.size(), 4u);
    EXPECT_TRUE(p.at("D260_W140").ok());
    const auto* bad = p.find(0, 0);
    ASSERT_NE(bad, nullptr);
    EXPECT_FALSE(bad->ok());
    EXPECT_FALSE(bad->error.empty());
}

TEST(Palette, ThreadCountDoesNotChangeResults) {
    auto a = build_palette(quick({220, 260, 40}, {100, 140, 40}), 1);
    auto b = build_palette(quick({220, 260, 40}, {100, 140, 40}), 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(std::ranges::equal(a.entries()[i].spectrum.values(), b.entries()[i].spectrum.values()));
    }
}

TEST(Palette, DuplicateKeyRejected) {
    Palette p(quick({220, 220, 20}, {200, 200, 20}));
    p.add(synthetic(220, 200, bump(500)));
    EXPECT_THROW(p.add(synthetic(220, 200, bump(600))), ValidationError);
    EXPECT_THROW(p.at("D1_W1"), ValidationError);
}

TEST(Palette, EntryMustBeOnPaletteGrid) {
    auto m = quick({220, 220, 20}, {200, 200, 20});
    m.grid = wavelength_grid(400, 700, 10);
    Palette p(m);
    EXPECT_THROW(p.add(synthetic(220, 200, bump(500))), ValidationError);
}

TEST(Palette, MirrorReferenceIsTmmMirror) {
    auto g = wavelength_grid(400, 700, 50);
    auto ref = mirror_reference(ambient_material("air"), g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(ref[i], tmm::reflectance(mirror_stack(ambient_material("air")), g[i]));
    }
}

TEST(Match, ExistingEntryMatchesExactly) {
    Palette p(quick({220, 220, 20}, {200, 200, 20}));
    p.add(synthetic(220, 200, bump(620)));
    p.add(synthetic(260, 200, bump(540)));
    p.add(synthetic(260, 140, bump(460)));
    for (const auto& e : p.entries()) {
        auto m = match_color(e.color, p);
        EXPECT_EQ(m.entry, &e);
        EXPECT_EQ(m.delta_e, 0.0);
    }
}

TEST(Match, TiesGoToSmallerDThenW) {
    Palette p(quick({220, 220, 20}, {200, 200, 20}));
    p.add(synthetic(300, 100, bump(550)));
    p.add(synthetic(240, 180, bump(550)));
    p.add(synthetic(240, 120, bump(550)));
    auto m = match_color(p.entries()[0].color, p);
    EXPECT_EQ(m.entry->key(), "D240_W120");
}

TEST(Match, SkipsFailedEntriesAndNeedsOne) {
    Palette p(quick({220, 220, 20}, {200, 200, 20}));
    p.add(PaletteEntry{{0, 0, 110}, "air", RedoxState::colored, {}, {}, "failed"});
    EXPECT_THROW(match_color(color_from_hex("#ff0000"), p), ValidationError);
    p.add(synthetic(220, 200, bump(620)));
    EXPECT_EQ(match_color(color_from_hex("#ff0000"), p).entry->key(), "D220_W200");
}

TEST(Match, SaturatedRedPicksLongWavelengthEntry) {
    Palette p(quick({220, 220, 20}, {200, 200, 20}));
    p.add(synthetic(220, 200, bump(640)));
    p.add(synthetic(260, 200, bump(540)));
    p.add(synthetic(260, 140, bump(460)));
    auto m = match_color(color_from_hex("#ff0000"), p);
    auto d = dominant_wavelength(*m.entry->color.xy);
    ASSERT_TRUE(d);
    EXPECT_FALSE(d->complementary);
    EXPECT_GE(d->wavelength_nm, 590);
    EXPECT_LE(d->wavelength_nm, 680);
}

TEST(Hybrid, ParseModel) {
    EXPECT_EQ(parse_hybrid_model("incoherent"), HybridModel::incoherent);
    EXPECT_EQ(parse_hybrid_model("supercell"), HybridModel::supercell);
    EXPECT_THROW(parse_hybrid_model("coherent"), ValidationError);
}

TEST(Hybrid, IdenticalEntriesReproduceConstituent) {
    auto r = synthetic(220, 200, bump(620));
    SubpixelGroup g{{&r, &r, &r}, {50, 300, 120}};
    auto s = hybrid_spectrum(g, HybridModel::incoherent);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], r.spectrum[i]);
}

TEST(Hybrid, PairLiesOnChromaticitySegment) {
    auto r = synthetic(220, 200, bump(630)), g = synthetic(260, 200, bump(540));
    SubpixelGroup grp{{&r, &g}, {300, 300}};
    auto c = spectrum_to_xyz(hybrid_spectrum(grp, HybridModel::incoherent));
    auto a = *r.color.xy, b = *g.color.xy, m = *c.xy;
    EXPECT_NEAR(cross(a, b, m), 0.0, 1e-12);
    EXPECT_GE(m.x, std::min(a.x, b.x));
    EXPECT_LE(m.x, std::max(a.x, b.x));
}

TEST(Hybrid, IncoherentWeightsByPeriod) {
    auto r = synthetic(220, 200, std::vector<double>(16, 1.0));
    auto g = synthetic(300, 160, std::vector<double>(16, 0.0));
    SubpixelGroup grp{{&r, &g}, {100, 100}};
    auto s = hybrid_spectrum(grp, HybridModel::incoherent);
    EXPECT_NEAR(s[0], 420.0 / (420.0 + 460.0), 1e-15);
}

TEST(Hybrid, GroupValidation) {
    auto r = synthetic(220, 200, bump(620));
    auto other = r;
    other.ambient = "electrolyte";
    EXPECT_THROW(hybrid_spectrum({{&r, &other}, {100, 100}}, HybridModel::incoherent), ValidationError);
    EXPECT_THROW(hybrid_spectrum({{&r, &r}, {100}}, HybridModel::incoherent), ValidationError);
    EXPECT_THROW(hybrid_spectrum({{&r}, {-1}}, HybridModel::incoherent), ValidationError);
    EXPECT_THROW(hybrid_spectrum({{}, {}}, HybridModel::incoherent), ValidationError);
}

TEST(Hybrid, SupercellOfIdenticalColumnsMatchesEntry) {
    rcwa::SolverOptions o;
    o.harmonics = 3;
    auto grid = wavelength_grid(400, 700, 20);
    auto e = simulate_entry({220, 200, 110}, "air", RedoxState::colored, grid, o);
    SubpixelGroup g{{&e, &e, &e}, {200, 200, 200}};
    auto s = hybrid_spectrum(g, HybridModel::supercell, o, 1);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], e.spectrum[i], 1e-6) << grid[i];
}

TEST(Hybrid, NoDiscColumnsGiveBareFilmOverMirror) {
    rcwa::SolverOptions o;
    o.harmonics = 2;
    auto grid = wavelength_grid(400, 700, 20);
    auto e = simulate_entry({0, 300, 110}, "air", RedoxState::colored, grid, o);
    // Empty cells are ambient over the mirror, so the normalized spectrum is 1.
    for (double v : e.spectrum.values()) EXPECT_NEAR(v, 1.0, 1e-8);
    SubpixelGroup g{{&e, &e}, {100, 100}};
    auto s = hybrid_spectrum(g, HybridModel::supercell, o, 1);
    for (double v : s.values()) EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(Mixing, ReportNamesEveryPair) {
    auto r = synthetic(220, 200, bump(630)), g = synthetic(260, 200, bump(535)), b = synthetic(260, 140, bump(450));
    auto rep = verify_additive_mixing(r, g, b, {300, 80, 100}, HybridModel::incoherent);
    ASSERT_EQ(rep.checks.size(), 3u);
    EXPECT_EQ(rep.checks[0].pair, "R+G");
    EXPECT_EQ(rep.checks[0].expected, "yellow");
    EXPECT_EQ(rep.checks[0].spacing_nm, 300);
    EXPECT_EQ(rep.checks[1].pair, "B+R");
    EXPECT_EQ(rep.checks[1].expected, "magenta");
    EXPECT_EQ(rep.checks[1].spacing_nm, 80);
    EXPECT_EQ(rep.checks[2].pair, "G+B");
    EXPECT_EQ(rep.checks[2].expected, "cyan");
    EXPECT_EQ(rep.checks[2].spacing_nm, 100);
    for (const auto& c : rep.checks) {
        EXPECT_EQ(c.pass, (c.expected == std::string("yellow") ? kYellowSector
                           : c.expected == std::string("magenta") ? kMagentaSector
                                                                   : kCyanSector)
                              .contains(c.hue_deg));
    }
}

TEST(Mixing, IdealPrimariesPass) {
    // Broad Gaussian primaries behave additively by construction.
    auto r = synthetic(220, 200, bump(640, 50)), g = synthetic(260, 200, bump(540, 50)), b = synthetic(260, 140, bump(440, 50));
    auto rep = verify_additive_mixing(r, g, b, {300, 80, 100}, HybridModel::incoherent);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.pair << " hue " << c.hue_deg;
}

TEST(Mixing, RedWithItselfFails) {
    auto r = synthetic(220, 200, bump(640, 50));
    auto rep = verify_additive_mixing(r, r, r, {300, 80, 100}, HybridModel::incoherent);
    EXPECT_FALSE(rep.all_pass());
    EXPECT_FALSE(rep.checks[0].pass);
}
