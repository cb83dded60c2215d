#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "hc3l/dosimetry.hpp"
#include "hc3l/errors.hpp"
#include "test_util.hpp"

using namespace hc3l;

namespace {

// Exhaustive pairwise oracle: for every reference voxel above threshold,
// minimize Gamma over ALL evaluated voxels within the search radius, with no
// early exit and no sorting.
Grid gamma_oracle(const DoseGrid& ref, const DoseGrid& eva, const GammaCriteria& crit) {
    double ref_max = ref.max_dose();
    double tol = crit.dose_percent / 100.0 * ref_max;
    double thr = crit.threshold_percent / 100.0 * ref_max;
    double radius = crit.effective_radius();

    std::size_t rank = ref.values.rank();
    std::array<long, 3> dim{1, 1, 1};
    std::array<double, 3> sp{1.0, 1.0, 1.0};
    for (std::size_t a = 0; a < rank; ++a) {
        dim[3 - rank + a] = static_cast<long>(ref.values.dim(a));
        sp[3 - rank + a] = ref.spacing_mm[a];
    }

    Grid out(ref.values.shape());
    std::size_t plane = static_cast<std::size_t>(dim[1]) * dim[2];
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        double dref = ref.values[i];
        if (!(dref > thr)) {
            out[i] = kGammaNotEvaluated;
            continue;
        }
        long z = static_cast<long>(i / plane);
        long y = static_cast<long>((i / dim[2]) % dim[1]);
        long x = static_cast<long>(i % dim[2]);
        double best = std::numeric_limits<double>::infinity();
        for (long zz = 0; zz < dim[0]; ++zz) {
            for (long yy = 0; yy < dim[1]; ++yy) {
                for (long xx = 0; xx < dim[2]; ++xx) {
                    double dz = (zz - z) * sp[0];
                    double dy = (yy - y) * sp[1];
                    double dx = (xx - x) * sp[2];
                    double d2 = dz * dz + dy * dy + dx * dx;
                    if (d2 > radius * radius) continue;
                    double de = eva.values[(static_cast<std::size_t>(zz) * dim[1] + yy) *
                                               dim[2] +
                                           xx];
                    double g2 = d2 / (crit.dta_mm * crit.dta_mm) +
                                (de - dref) * (de - dref) / (tol * tol);
                    best = std::min(best, g2);
                }
            }
        }
        out[i] = std::sqrt(best);
    }
    return out;
}

DoseGrid random_dose(RngStream& rng, std::vector<std::size_t> shape,
                     std::vector<double> spacing, double max_gy) {
    DoseGrid d;
    d.values = testutil::random_grid(rng, std::move(shape), 0.0, max_gy);
    d.spacing_mm = std::move(spacing);
    return d;
}

}  // namespace

TEST_CASE("gamma of identical distributions is zero") {
    RngStream rng(1);
    DoseGrid ref = random_dose(rng, {12, 12}, {2.0, 2.0}, 60.0);
    GammaCriteria crit;
    Grid g = gamma_map(ref, ref, crit);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == kGammaNotEvaluated) continue;
        CHECK(g[i] == 0.0);
    }
    CHECK(gpr(g) == 100.0);
}

TEST_CASE("boundary case: dose off by exactly the tolerance fails strict <1") {
    DoseGrid ref{Grid({1, 1}, {1.0}), {1.0, 1.0}};
    GammaCriteria crit;
    crit.dose_percent = 3.0;
    crit.dta_mm = 3.0;
    crit.threshold_percent = 10.0;
    DoseGrid eva{Grid({1, 1}, {1.0 + 0.03}), {1.0, 1.0}};
    Grid g = gamma_map(ref, eva, crit);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gpr(g) == 0.0);
}

TEST_CASE("gamma_map matches the exhaustive oracle on 2D and 3D grids") {
    RngStream rng(2);
    for (auto crit_pair : std::vector<std::pair<double, double>>{{3.0, 3.0}, {2.0, 2.0}}) {
        GammaCriteria crit;
        crit.dose_percent = crit_pair.first;
        crit.dta_mm = crit_pair.second;
        crit.search_radius_mm = 3.0 * crit.dta_mm;

        DoseGrid r2 = random_dose(rng, {16, 16}, {2.0, 1.5}, 60.0);
        DoseGrid e2 = random_dose(rng, {16, 16}, {2.0, 1.5}, 60.0);
        Grid got = gamma_map(r2, e2, crit);
        Grid want = gamma_oracle(r2, e2, crit);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) < 1e-9);

        DoseGrid r3 = random_dose(rng, {8, 8, 8}, {2.5, 1.0, 1.0}, 60.0);
        DoseGrid e3 = random_dose(rng, {8, 8, 8}, {2.5, 1.0, 1.0}, 60.0);
        got = gamma_map(r3, e3, crit);
        want = gamma_oracle(r3, e3, crit);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) < 1e-9);
    }
}

TEST_CASE("uniform 2 percent scaling passes 3%/3mm everywhere") {
    RngStream rng(3);
    DoseGrid ref = random_dose(rng, {10, 10}, {1.0, 1.0}, 60.0);
    DoseGrid eva = ref;
    for (std::size_t i = 0; i < eva.values.size(); ++i) eva.values[i] *= 1.02;
    GammaCriteria crit;  // 3%/3mm
    CHECK(gpr(gamma_map(ref, eva, crit)) == 100.0);
}

TEST_CASE("10 percent error on a wide plateau fails 2%/2mm in the interior") {
    // Plateau wider than the search radius: distance cannot rescue the
    // dose error, so interior voxels read gamma = 5 > 1.
    Grid plateau = Grid::full({21, 21}, 50.0);
    DoseGrid ref{plateau, {1.0, 1.0}};
    DoseGrid eva{plateau, {1.0, 1.0}};
    for (std::size_t i = 0; i < eva.values.size(); ++i) eva.values[i] *= 1.10;
    GammaCriteria crit;
    crit.dose_percent = 2.0;
    crit.dta_mm = 2.0;
    Grid g = gamma_map(ref, eva, crit);
    // Interior voxel far from every edge.
    CHECK(g.at(10, 10) == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(g.at(10, 10) >= 1.0);
}

TEST_CASE("GPR criterion monotonicity on random pairs") {
    RngStream rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        DoseGrid ref = random_dose(rng, {12, 12}, {1.0, 1.0}, 60.0);
        DoseGrid eva = ref;
        for (std::size_t i = 0; i < eva.values.size(); ++i)
            eva.values[i] = std::max(0.0, eva.values[i] + rng.next_uniform(-3.0, 3.0));
        GammaCriteria tight, loose;
        tight.dose_percent = 2.0;
        tight.dta_mm = 2.0;
        loose.dose_percent = 3.0;
        loose.dta_mm = 3.0;
        CHECK(gpr(gamma_map(ref, eva, tight)) <= gpr(gamma_map(ref, eva, loose)));
    }
}

TEST_CASE("raising the threshold never adds evaluated voxels") {
    RngStream rng(5);
    DoseGrid ref = random_dose(rng, {12, 12}, {1.0, 1.0}, 60.0);
    GammaCriteria a, b;
    a.threshold_percent = 10.0;
    b.threshold_percent = 50.0;
    Grid ga = gamma_map(ref, ref, a);
    Grid gb = gamma_map(ref, ref, b);
    std::size_t na = 0, nb = 0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
        na += ga[i] != kGammaNotEvaluated;
        nb += gb[i] != kGammaNotEvaluated;
    }
    CHECK(nb <= na);
}

TEST_CASE("interpolated search never increases gamma") {
    RngStream rng(6);
    DoseGrid ref = random_dose(rng, {10, 10}, {2.0, 2.0}, 60.0);
    DoseGrid eva = random_dose(rng, {10, 10}, {2.0, 2.0}, 60.0);
    GammaCriteria native, interp;
    interp.interpolate = true;
    Grid gn = gamma_map(ref, eva, native);
    Grid gi = gamma_map(ref, eva, interp);
    for (std::size_t i = 0; i < gn.size(); ++i) {
        if (gn[i] == kGammaNotEvaluated) continue;
        CHECK(gi[i] <= gn[i] + 1e-12);
    }
}

TEST_CASE("gamma_map validates inputs") {
    DoseGrid a{Grid({4, 4}), {1.0, 1.0}};
    DoseGrid b{Grid({4, 5}), {1.0, 1.0}};
    GammaCriteria crit;
    CHECK_THROWS_AS(gamma_map(a, b, crit), std::invalid_argument);

    DoseGrid c{Grid({4, 4}), {1.0, 2.0}};
    Grid v = Grid::full({4, 4}, 1.0);
    DoseGrid d{v, {1.0, 1.0}};
    DoseGrid e{v, {1.0, 2.0}};
    CHECK_THROWS_AS(gamma_map(d, c, crit), std::invalid_argument);  // spacings differ

    GammaCriteria bad;
    bad.search_radius_mm = 1.0;  // < 2*dta
    CHECK_THROWS_AS(gamma_map(d, e, bad), std::invalid_argument);

    Grid none = Grid::full({2, 2}, 0.0);
    Grid g(none.shape());
    g.fill(kGammaNotEvaluated);
    CHECK_THROWS_AS(gpr(g), UndefinedResultError);
}

TEST_CASE("dvh ramp, uniform, and full-volume cases") {
    // 100 voxels with doses 1..100 Gy: D95 lands at descending index 94 = 6 Gy.
    Grid dose({10, 10});
    for (std::size_t i = 0; i < 100; ++i) dose[i] = static_cast<double>(i + 1);
    DoseGrid dg{dose, {1.0, 1.0}};
    Grid mask = Grid::full({10, 10}, 1.0);
    CHECK(dvh_parameter(dg, mask, 95.0) == 6.0);
    CHECK(dvh_parameter(dg, mask, 98.0) == 3.0);
    CHECK(dvh_parameter(dg, mask, 100.0) == 1.0);
    CHECK(dvh_dmax(dg, mask) == 100.0);

    DoseGrid uni{Grid::full({4, 4}, 60.0), {1.0, 1.0}};
    Grid m4 = Grid::full({4, 4}, 1.0);
    CHECK(dvh_parameter(uni, m4, 95.0) == 60.0);
    CHECK(dvh_parameter(uni, m4, 98.0) == 60.0);
    CHECK(dvh_dmax(uni, m4) == 60.0);

    Grid empty({4, 4});
    CHECK_THROWS_AS(dvh_parameter(uni, empty, 95.0), std::invalid_argument);
    CHECK_THROWS_AS(dvh_parameter(uni, m4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dvh_parameter(uni, m4, 101.0), std::invalid_argument);
}

TEST_CASE("dvh ordering D98 <= D95 <= Dmax on random distributions") {
    RngStream rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        DoseGrid dg = random_dose(rng, {8, 8}, {1.0, 1.0}, 70.0);
        Grid mask(dg.values.shape());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = rng.next_unit() < 0.6 ? 1.0 : 0.0;
        bool any = false;
        for (std::size_t i = 0; i < mask.size(); ++i) any |= mask[i] > 0.5;
        if (!any) mask[0] = 1.0;
        DvhReport r = dvh_report(dg, mask);
        CHECK(r.d98 <= r.d95);
        CHECK(r.d95 <= r.dmax);
    }
}

TEST_CASE("dvh percent differences") {
    DvhReport ref{60.0, 58.0, 66.0};
    DvhReport test{61.2, 58.0, 66.0};
    DvhReport d = dvh_percent_diff(test, ref);
    CHECK(d.d95 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d.d98 == 0.0);
    CHECK(d.dmax == 0.0);

    DvhReport scaled{0.99 * 60.0, 0.99 * 58.0, 0.99 * 66.0};
    DvhReport ds = dvh_percent_diff(scaled, ref);
    CHECK(ds.d95 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ds.d98 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ds.dmax == doctest::Approx(-1.0).epsilon(1e-12));

    DvhReport zero{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(dvh_percent_diff(ref, zero), UndefinedResultError);
}

TEST_CASE("synthetic dose plateau, falloff and determinism") {
    Grid mask({9, 9});
    for (std::size_t y = 3; y <= 5; ++y)
        for (std::size_t x = 3; x <= 5; ++x) mask.at(y, x) = 1.0;

    DoseGrid d1 = synthetic_dose(mask, {1.0, 1.0}, 60.0, 4.0);
    DoseGrid d2 = synthetic_dose(mask, {1.0, 1.0}, 60.0, 4.0);
    CHECK(d1.values == d2.values);

    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] > 0.5) CHECK(d1.values[i] == 60.0);
        if (mask[i] <= 0.5) CHECK(d1.values[i] < 60.0);
    }

    // Monotone non-increasing along axis rays leaving the target.
    for (std::size_t x = 5; x < 8; ++x) CHECK(d1.values.at(4, x + 1) <= d1.values.at(4, x));
    for (std::size_t y = 5; y < 8; ++y) CHECK(d1.values.at(y + 1, 4) <= d1.values.at(y, 4));

    CHECK_THROWS_AS(synthetic_dose(Grid({4, 4}), {1.0, 1.0}, 60.0, 4.0),
                    std::invalid_argument);
}
