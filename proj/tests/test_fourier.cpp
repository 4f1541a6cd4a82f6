#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "retina/fourier.hpp"

using namespace retina;
using namespace retina::rcwa;

namespace {

// Midpoint-rule transform of the indicator function; independent of the
// Bessel closed form.
cd quadrature_coefficient(const UnitCell& cell, int p, int q, int n = 1200) {
    cd sum = 0.0;
    double hx = cell.period_x_nm / n, hy = cell.period_y_nm / n;
    for (int i = 0; i < n; ++i) {
        double x = (i + 0.5) * hx;
        for (int j = 0; j < n; ++j) {
            double y = (j + 0.5) * hy;
            bool inside = false;
            for (const auto& d : cell.discs) {
                double dx = std::remainder(x - d.x_nm, cell.period_x_nm);
                double dy = std::remainder(y - d.y_nm, cell.period_y_nm);
                inside = inside || dx * dx + dy * dy < 0.25 * d.diameter_nm * d.diameter_nm;
            }
            if (inside) {
                sum += std::polar(1.0, -2 * std::numbers::pi * (p * x / cell.period_x_nm + q * y / cell.period_y_nm));
            }
        }
    }
    return sum / static_cast<double>(n) / static_cast<double>(n);
}

}  // namespace

TEST(Fourier, ZeroOrderIsFillFactor) {
    auto cell = UnitCell::square({220, 200, 110});
    auto t = disc_coefficients(cell, 3, 3);
    EXPECT_NEAR(t(0, 0).real(), cell.fill_factor(), 1e-15);
    EXPECT_EQ(t(0, 0).imag(), 0.0);
}

TEST(Fourier, ClosedFormMatchesQuadrature) {
    UnitCell cell{900, 420, {{0, 0, 220}, {340, 0, 260}, {640, 0, 180}}};
    auto t = disc_coefficients(cell, 3, 2);
    for (auto [p, q] : {std::pair{0, 0}, {1, 0}, {0, 1}, {2, -1}, {-3, 2}}) {
        cd oracle = quadrature_coefficient(cell, p, q);
        EXPECT_NEAR(t(p, q).real(), oracle.real(), 2e-4) << p << "," << q;
        EXPECT_NEAR(t(p, q).imag(), oracle.imag(), 2e-4) << p << "," << q;
    }
}

TEST(Fourier, CentredDiscHasRealSymmetricCoefficients) {
    auto t = disc_coefficients(UnitCell::square({260, 140, 110}), 4, 4);
    for (int p = -4; p <= 4; ++p) {
        for (int q = -4; q <= 4; ++q) {
            EXPECT_NEAR(t(p, q).imag(), 0.0, 1e-15);
            EXPECT_NEAR(t(p, q).real(), t(-p, q).real(), 1e-15);
            EXPECT_NEAR(t(p, q).real(), t(q, p).real(), 1e-15);
        }
    }
}

TEST(Fourier, TranslationIsAPhase) {
    UnitCell a{500, 500, {{0, 0, 200}}};
    UnitCell b{500, 500, {{75, -30, 200}}};
    auto ta = disc_coefficients(a, 2, 2), tb = disc_coefficients(b, 2, 2);
    for (int p = -2; p <= 2; ++p) {
        for (int q = -2; q <= 2; ++q) {
            cd phase = std::polar(1.0, -2 * std::numbers::pi * (p * 75.0 - q * 30.0) / 500.0);
            EXPECT_NEAR(std::abs(tb(p, q) - ta(p, q) * phase), 0.0, 1e-14);
        }
    }
}

TEST(Fourier, NormalVectorTablesSumToIdentity) {
    // n_x^2 + n_y^2 = 1 pointwise, so the tables sum to a delta.
    auto nv = normal_vector_tables(UnitCell::square({220, 200, 110}), 4, 4);
    EXPECT_NEAR(std::abs(nv->xx(0, 0) + nv->yy(0, 0) - 1.0), 0.0, 1e-12);
    for (int p = -4; p <= 4; ++p) {
        for (int q = -4; q <= 4; ++q) {
            if (p == 0 && q == 0) continue;
            EXPECT_NEAR(std::abs(nv->xx(p, q) + nv->yy(p, q)), 0.0, 1e-12);
        }
    }
}

TEST(Fourier, NormalVectorTablesRespectC4) {
    auto nv = normal_vector_tables(UnitCell::square({260, 140, 110}), 3, 3);
    EXPECT_NEAR(nv->xx(0, 0).real(), 0.5, 1e-9);
    EXPECT_NEAR(std::abs(nv->xy(0, 0)), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(nv->xx(1, 2) - nv->yy(2, 1)), 0.0, 1e-9);
}

TEST(Fourier, MirrorSymmetryDetection) {
    EXPECT_TRUE(mirror_symmetric_x(UnitCell::square({220, 200, 110})));
    EXPECT_TRUE(mirror_symmetric_y(UnitCell::square({220, 200, 110})));
    UnitCell row{900, 420, {{0, 0, 220}, {340, 0, 260}, {640, 0, 180}}};
    EXPECT_FALSE(mirror_symmetric_x(row));
    EXPECT_TRUE(mirror_symmetric_y(row));
}

TEST(Fourier, SectorBasesPartitionTheOrders) {
    // The four parity sectors are a change of basis: dimensions add up.
    OrderSet o{3, 2};
    int dim = 0;
    for (Parity px : {Parity::even, Parity::odd}) {
        for (Parity py : {Parity::even, Parity::odd}) {
            SectorBasis b(o, {px, py});
            dim += b.size();
            for (const auto& e : b.elements()) {
                double norm = 0;
                for (int k = 0; k < e.count; ++k) norm += e.coef[k] * e.coef[k];
                EXPECT_NEAR(norm, 1.0, 1e-15);
            }
        }
    }
    EXPECT_EQ(dim, o.size());
    EXPECT_EQ(SectorBasis(o, {Parity::none, Parity::none}).size(), o.size());
}

TEST(Fourier, OrderSetIndexRoundTrip) {
    OrderSet o{4, 2};
    EXPECT_EQ(o.size(), 45);
    for (int i = 0; i < o.size(); ++i) EXPECT_EQ(o.index(o.p(i), o.q(i)), i);
}
