#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "retina/rcwa.hpp"
#include "retina/tmm.hpp"

using namespace retina;
using rcwa::Polarization;
using rcwa::Solver;
using rcwa::SolverOptions;

namespace {

MaterialModel constant(double n, double k = 0.0) { return MaterialModel::constant("c", {n, k}); }

LayerStack with_host(MetaPixelGeometry g, const MaterialModel& ambient, const MaterialModel& host) {
    LayerStack s = mirror_stack(ambient);
    s.layers.insert(s.layers.begin(), PatternedLayer{wo3(RedoxState::colored), host, g.thickness_nm, UnitCell::square(g)});
    return s;
}

LayerStack planar(const MaterialModel& ambient, const MaterialModel& film, double t) {
    LayerStack s = mirror_stack(ambient);
    s.layers.insert(s.layers.begin(), UniformLayer{film, t});
    return s;
}

SolverOptions harmonics(int n) {
    SolverOptions o;
    o.harmonics = n;
    return o;
}

}  // namespace

TEST(Rcwa, NoDiscsEqualsTmm) {
    const auto& air = builtin_material("air");
    auto s = metapixel_stack({0, 300, 110}, air, RedoxState::colored);
    auto ref = planar(air, air, 110);
    for (double wl : {400.0, 550.0, 700.0}) {
        EXPECT_NEAR(Solver(s, harmonics(5)).solve(wl).total_R, tmm::reflectance(ref, wl), 1e-8) << wl;
    }
}

TEST(Rcwa, DiscMaterialHostEqualsTmm) {
    // Full coverage: host and disc are the same WO3 film.
    const auto& air = builtin_material("air");
    const auto& w = wo3(RedoxState::colored);
    auto s = with_host({220, 200, 110}, air, w);
    auto ref = planar(air, w, 110);
    for (bool force : {false, true}) {
        SolverOptions o = harmonics(4);
        o.force_eigenmodes = force;
        for (double wl : {420.0, 610.0}) {
            EXPECT_NEAR(Solver(s, o).solve(wl).total_R, tmm::reflectance(ref, wl), 1e-8) << wl << " " << force;
        }
    }
}

TEST(Rcwa, SweepOnEmptyCellEqualsTmmPointwise) {
    const auto& el = builtin_material("electrolyte");
    auto s = metapixel_stack({0, 400, 110}, el, RedoxState::dark);
    auto ref = planar(el, el, 110);
    auto grid = wavelength_grid(400, 700, 10);
    auto sp = rcwa::spectrum_sweep(Solver(s, harmonics(3)), grid, 1);
    ASSERT_EQ(sp.size(), 31u);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(sp.values()[i], tmm::reflectance(ref, grid[i]), 1e-8) << grid[i];
    }
}

TEST(Rcwa, DeterministicBitForBit) {
    auto s = metapixel_stack({220, 200, 110}, builtin_material("air"), RedoxState::colored);
    auto grid = wavelength_grid(400, 700, 30);
    auto a = rcwa::spectrum_sweep(Solver(s, harmonics(3)), grid, 1);
    auto b = rcwa::spectrum_sweep(Solver(s, harmonics(3)), grid, 2);
    EXPECT_TRUE(std::ranges::equal(a.values(), b.values()));
}

TEST(Rcwa, SymmetryReductionIsExact) {
    auto s = metapixel_stack({260, 140, 110}, builtin_material("air"), RedoxState::colored);
    SolverOptions full = harmonics(4);
    full.use_symmetry = false;
    for (double wl : {450.0, 560.0, 680.0}) {
        for (auto pol : {Polarization::x, Polarization::y}) {
            EXPECT_NEAR(Solver(s, harmonics(4)).solve(wl, pol).total_R, Solver(s, full).solve(wl, pol).total_R, 1e-10);
        }
    }
}

TEST(Rcwa, SquareCellIsPolarizationIndependent) {
    auto s = metapixel_stack({240, 160, 110}, builtin_material("air"), RedoxState::colored);
    SolverOptions o = harmonics(4);
    o.use_symmetry = false;
    Solver solver(s, o);
    EXPECT_NEAR(solver.solve(530, Polarization::x).total_R, solver.solve(530, Polarization::y).total_R, 1e-10);
}

TEST(Rcwa, EnergyConservationLossless) {
    // Lossless discs in a lossless host over a transparent substrate.
    LayerStack s{constant(1.0), {}, constant(1.5)};
    UnitCell cell{400, 400, {{0, 0, 250}}};
    s.layers.push_back(PatternedLayer{constant(2.3), constant(1.0), 110, cell});
    s.layers.push_back(UniformLayer{constant(1.7), 60});
    Solver solver(s, harmonics(4));
    for (double wl = 400; wl <= 700; wl += 50) {
        auto r = solver.solve(wl);
        EXPECT_NEAR(r.total_R + r.total_T, 1.0, 1e-9) << wl;
        EXPECT_NEAR(r.flux_R, r.total_R, 1e-9) << wl;
        // Below the first diffraction cutoff in glass some light is diffracted.
        EXPECT_GE(r.reflected.size(), 1u);
    }
}

TEST(Rcwa, DiffractedOrdersAppearAbovePeriodCutoff) {
    LayerStack s{constant(1.0), {}, constant(1.5)};
    s.layers.push_back(PatternedLayer{constant(2.3), constant(1.0), 110, UnitCell{600, 600, {{0, 0, 300}}}});
    auto r = Solver(s, harmonics(3)).solve(500);
    double diffracted = 0;
    for (const auto& o : r.transmitted) {
        if (o.mx != 0 || o.my != 0) diffracted += o.value;
    }
    EXPECT_GT(diffracted, 1e-4);
    EXPECT_NEAR(r.total_R + r.total_T, 1.0, 1e-9);
}

TEST(Rcwa, LosslessOverPerfectReflectorAbsorbsNothing) {
    LayerStack s{constant(1.0), {PatternedLayer{constant(2.2), constant(1.0), 110, UnitCell{420, 420, {{0, 0, 220}}}}},
                 PerfectConductor{}};
    auto b = rcwa::absorption_balance(s, 550, harmonics(4));
    EXPECT_NEAR(b.total, 0.0, 1e-9);
    for (double a : b.per_layer) EXPECT_NEAR(a, 0.0, 1e-9);
}

TEST(Rcwa, BareMirrorAbsorbsOnlyInMetal) {
    auto b = rcwa::absorption_balance(mirror_stack(builtin_material("air")), 550);
    ASSERT_EQ(b.per_layer.size(), 2u);
    EXPECT_EQ(b.labels[0], "pt");
    EXPECT_EQ(b.labels[1], "al");
    EXPECT_NEAR(b.per_layer[0] + b.per_layer[1], b.total, 1e-10);
    EXPECT_GT(b.per_layer[0], 0.0);
}

TEST(Rcwa, LayerAbsorptionBalances) {
    auto s = metapixel_stack({220, 200, 110}, builtin_material("air"), RedoxState::dark);
    auto b = rcwa::absorption_balance(s, 650, harmonics(4));
    double sum = 0;
    for (double a : b.per_layer) sum += a;
    EXPECT_NEAR(sum, b.total, 1e-8);
}

TEST(Rcwa, DarkStateAbsorbsMoreInDiscs) {
    const auto& air = builtin_material("air");
    auto colored = rcwa::absorption_balance(metapixel_stack({220, 200, 110}, air, RedoxState::colored), 650, harmonics(5));
    auto dark = rcwa::absorption_balance(metapixel_stack({220, 200, 110}, air, RedoxState::dark), 650, harmonics(5));
    EXPECT_GE(dark.per_layer[0], 3.0 * colored.per_layer[0]);
}

TEST(Rcwa, LaurentRuleConvergesToSameLimit) {
    // Both factorizations agree to within truncation error.
    auto s = metapixel_stack({260, 160, 110}, builtin_material("air"), RedoxState::colored);
    SolverOptions laurent = harmonics(6);
    laurent.inverse_rule = false;
    EXPECT_NEAR(Solver(s, harmonics(6)).solve(550).total_R, Solver(s, laurent).solve(550).total_R, 0.03);
}

TEST(Rcwa, ConvergesWithHarmonics) {
    auto s = metapixel_stack({220, 200, 110}, builtin_material("air"), RedoxState::colored);
    double r6 = Solver(s, harmonics(6)).solve(550).total_R;
    double r8 = Solver(s, harmonics(8)).solve(550).total_R;
    EXPECT_LT(std::abs(r8 - r6), 0.02);
}

TEST(Rcwa, CrossCheckAgainstIndependentSolver) {
    // grcwa 0.1.2, 401 orders, 800x800 permittivity grid, Laurent products,
    // same tables and stack.
    auto s = metapixel_stack({220, 200, 110}, builtin_material("air"), RedoxState::colored);
    SolverOptions o = harmonics(10);
    o.inverse_rule = false;
    Solver solver(s, o);
    EXPECT_NEAR(solver.solve(450).total_R, 0.2597, 0.003);
    EXPECT_NEAR(solver.solve(550).total_R, 0.3056, 0.003);
    EXPECT_NEAR(solver.solve(650).total_R, 0.1112, 0.003);
}

TEST(Rcwa, GrazingOrderConservesEnergy) {
    // Rayleigh anomalies exactly on the sample wavelength, in air and in glass.
    LayerStack s{constant(1.0), {}, constant(1.5)};
    s.layers.push_back(PatternedLayer{constant(2.3), constant(1.0), 110, UnitCell{400, 400, {{0, 0, 250}}}});
    Solver solver(s, harmonics(4));
    for (double wl : {400.0, 600.0}) {
        auto r = solver.solve(wl);
        EXPECT_NEAR(r.total_R + r.total_T, 1.0, 1e-12) << wl;
        EXPECT_NEAR(r.total_R, solver.solve(wl + 1e-6).total_R, 1e-3) << wl;
    }
}

TEST(Rcwa, SupercellOfIdenticalColumnsEqualsSingleCell) {
    MetaPixelGeometry g{220, 200, 110};
    std::array<MetaPixelGeometry, 3> cols{g, g, g};
    std::array<double, 3> T{200, 200, 200};
    const auto& air = builtin_material("air");
    auto single = Solver(metapixel_stack(g, air, RedoxState::colored), harmonics(4)).solve(600).total_R;
    auto super = rcwa::supercell_reflectance(cols, T, air, RedoxState::colored, 600, harmonics(4));
    EXPECT_NEAR(super.total_R, single, 1e-6);
}

TEST(Rcwa, SupercellWithoutDiscsIsTmm) {
    std::array<MetaPixelGeometry, 3> cols{MetaPixelGeometry{0, 300, 110}, {0, 200, 110}, {0, 250, 110}};
    std::array<double, 3> T{100, 100, 100};
    const auto& air = builtin_material("air");
    auto r = rcwa::supercell_reflectance(cols, T, air, RedoxState::colored, 520, harmonics(3));
    EXPECT_NEAR(r.total_R, tmm::reflectance(planar(air, air, 110), 520), 1e-8);
}

TEST(Rcwa, SupercellGeometry) {
    std::array<MetaPixelGeometry, 3> cols{MetaPixelGeometry{220, 200, 110}, {260, 200, 110}, {260, 140, 110}};
    std::array<double, 3> T{300, 100, 80};
    auto c = rcwa::supercell(cols, T);
    EXPECT_NEAR(c.period_x_nm, 220 + 260 + 260 + 300 + 100 + 80, 1e-12);
    EXPECT_EQ(c.period_y_nm, 460);
    ASSERT_EQ(c.discs.size(), 3u);
    EXPECT_NEAR(c.discs[1].x_nm - c.discs[0].x_nm, 110 + 300 + 130, 1e-12);
    std::array<double, 2> short_T{1, 2};
    EXPECT_THROW(rcwa::supercell(cols, short_T), ValidationError);
}

TEST(Rcwa, RejectsBadOptions) {
    auto s = metapixel_stack({220, 200, 110}, builtin_material("air"), RedoxState::colored);
    EXPECT_THROW(Solver(s, harmonics(0)), ValidationError);
    SolverOptions tiny = harmonics(20);
    tiny.memory_budget_bytes = 1 << 20;
    EXPECT_THROW(Solver(s, tiny), ComputationError);
    SolverOptions small_period = harmonics(2);
    small_period.max_period_nm = 100;
    EXPECT_THROW(Solver(s, small_period), ValidationError);
    EXPECT_THROW(Solver(s, harmonics(2)).solve(-1), ValidationError);
    std::vector<double> grid{300};
    EXPECT_THROW(rcwa::spectrum_sweep(Solver(s, harmonics(2)), grid), ValidationError);
}

TEST(Rcwa, ReflectanceStaysPhysical) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(0, 320), w(20, 300), wl(400, 700);
    for (int i = 0; i < 6; ++i) {
        auto s = metapixel_stack({d(rng), w(rng), 110}, builtin_material("electrolyte"), RedoxState::colored);
        auto r = Solver(s, harmonics(3)).solve(wl(rng));
        EXPECT_GE(r.total_R, 0.0);
        EXPECT_LE(r.total_R, 1.0);
        EXPECT_GE(r.absorbed, -1e-9);
    }
}
