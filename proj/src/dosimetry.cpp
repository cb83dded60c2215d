#include "hc3l/dosimetry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hc3l/errors.hpp"
#include "hc3l/threading.hpp"

namespace hc3l {

void DoseGrid::validate() const {
    if (values.rank() != 2 && values.rank() != 3)
        throw std::invalid_argument("dose grid must be rank 2 or 3");
    if (spacing_mm.size() != values.rank())
        throw std::invalid_argument("dose grid spacing must match rank");
    for (double s : spacing_mm) {
        if (!(s > 0.0)) throw std::invalid_argument("dose grid spacing must be > 0");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) throw std::invalid_argument("dose values must be >= 0");
    }
}

double DoseGrid::max_dose() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m = std::max(m, values[i]);
    return m;
}

void GammaCriteria::validate() const {
    if (!(dose_percent > 0.0) || !(dta_mm > 0.0) || !(threshold_percent > 0.0))
        throw std::invalid_argument("gamma criteria must be strictly positive");
    if (effective_radius() < 2.0 * dta_mm)
        throw std::invalid_argument("gamma search radius must be >= 2 * dta");
    if (interp_subdivision < 1)
        throw std::invalid_argument("gamma interpolation subdivision must be >= 1");
}

namespace {

struct Shape3 {
    std::array<long, 3> dim{1, 1, 1};
    std::array<double, 3> sp{1.0, 1.0, 1.0};
};

Shape3 as3d(const DoseGrid& g) {
    Shape3 s;
    std::size_t r = g.values.rank();
    for (std::size_t a = 0; a < r; ++a) {
        s.dim[3 - r + a] = static_cast<long>(g.values.dim(a));
        s.sp[3 - r + a] = g.spacing_mm[a];
    }
    return s;
}

struct Offset {
    double dist2;
    std::array<double, 3> delta_mm;
    std::array<long, 3> delta_idx;  // native mode
    std::array<double, 3> delta_frac_idx;
};

// Candidate offsets within the search ball, sorted by distance (ties broken
// lexicographically so results never depend on sort internals).
std::vector<Offset> build_offsets(const Shape3& s, double radius_mm, int subdiv) {
    std::vector<Offset> out;
    std::array<long, 3> reach;
    for (int a = 0; a < 3; ++a) {
        double step = s.sp[a] / subdiv;
        reach[a] = s.dim[a] == 1 ? 0
                                 : static_cast<long>(std::floor(radius_mm / step));
    }
    double r2 = radius_mm * radius_mm;
    for (long dz = -reach[0]; dz <= reach[0]; ++dz) {
        for (long dy = -reach[1]; dy <= reach[1]; ++dy) {
            for (long dx = -reach[2]; dx <= reach[2]; ++dx) {
                std::array<double, 3> mm = {dz * s.sp[0] / subdiv, dy * s.sp[1] / subdiv,
                                            dx * s.sp[2] / subdiv};
                double d2 = mm[0] * mm[0] + mm[1] * mm[1] + mm[2] * mm[2];
                if (d2 > r2) continue;
                Offset o;
                o.dist2 = d2;
                o.delta_mm = mm;
                o.delta_idx = {dz, dy, dx};
                o.delta_frac_idx = {static_cast<double>(dz) / subdiv,
                                    static_cast<double>(dy) / subdiv,
                                    static_cast<double>(dx) / subdiv};
                out.push_back(o);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) {
        if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
        return a.delta_idx < b.delta_idx;
    });
    return out;
}

double sample_linear(const Grid& values, const Shape3& s, const std::array<double, 3>& pos) {
    std::array<long, 3> lo;
    std::array<double, 3> frac;
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<long>(std::floor(pos[a]));
        frac[a] = pos[a] - static_cast<double>(lo[a]);
    }
    double acc = 0.0;
    for (int cz = 0; cz < 2; ++cz) {
        long z = lo[0] + cz;
        double wz = cz ? frac[0] : 1.0 - frac[0];
        if (wz == 0.0) continue;
        for (int cy = 0; cy < 2; ++cy) {
            long y = lo[1] + cy;
            double wy = cy ? frac[1] : 1.0 - frac[1];
            if (wy == 0.0) continue;
            for (int cx = 0; cx < 2; ++cx) {
                long x = lo[2] + cx;
                double wx = cx ? frac[2] : 1.0 - frac[2];
                if (wx == 0.0) continue;
                acc += wz * wy * wx *
                       values[(static_cast<std::size_t>(z) * s.dim[1] + y) * s.dim[2] + x];
            }
        }
    }
    return acc;
}

}  // namespace

Grid gamma_map(const DoseGrid& reference, const DoseGrid& evaluated,
               const GammaCriteria& criteria) {
    reference.validate();
    evaluated.validate();
    criteria.validate();
    if (!reference.values.same_shape(evaluated.values) ||
        reference.spacing_mm != evaluated.spacing_mm)
        throw std::invalid_argument("gamma_map: reference/evaluated extents differ");

    double ref_max = reference.max_dose();
    if (ref_max <= 0.0) throw std::invalid_argument("gamma_map: reference dose is all zero");
    double dose_tol = criteria.dose_percent / 100.0 * ref_max;
    double threshold = criteria.threshold_percent / 100.0 * ref_max;
    double dta2 = criteria.dta_mm * criteria.dta_mm;

    Shape3 s = as3d(reference);
    int subdiv = criteria.interpolate ? criteria.interp_subdivision : 1;
    std::vector<Offset> offsets = build_offsets(s, criteria.effective_radius(), subdiv);

    Grid out(reference.values.shape());
    std::size_t plane = static_cast<std::size_t>(s.dim[1]) * s.dim[2];
    parallel_for(reference.values.size(), [&](std::size_t i) {
        double dref = reference.values[i];
        if (!(dref > threshold)) {
            out[i] = kGammaNotEvaluated;
            return;
        }
        long z = static_cast<long>(i / plane);
        long y = static_cast<long>((i / s.dim[2]) % s.dim[1]);
        long x = static_cast<long>(i % s.dim[2]);
        double best2 = std::numeric_limits<double>::infinity();
        for (const Offset& o : offsets) {
            double dist_term = o.dist2 / dta2;
            if (dist_term >= best2) break;  // offsets sorted by distance
            double de;
            if (!criteria.interpolate) {
                long zz = z + o.delta_idx[0];
                long yy = y + o.delta_idx[1];
                long xx = x + o.delta_idx[2];
                if (zz < 0 || zz >= s.dim[0] || yy < 0 || yy >= s.dim[1] || xx < 0 ||
                    xx >= s.dim[2])
                    continue;
                de = evaluated.values[(static_cast<std::size_t>(zz) * s.dim[1] + yy) *
                                          s.dim[2] +
                                      xx];
            } else {
                std::array<double, 3> pos = {z + o.delta_frac_idx[0], y + o.delta_frac_idx[1],
                                             x + o.delta_frac_idx[2]};
                if (pos[0] < 0.0 || pos[0] > s.dim[0] - 1 || pos[1] < 0.0 ||
                    pos[1] > s.dim[1] - 1 || pos[2] < 0.0 || pos[2] > s.dim[2] - 1)
                    continue;
                de = sample_linear(evaluated.values, s, pos);
            }
            double dd = (de - dref) / dose_tol;
            double g2 = dist_term + dd * dd;
            if (g2 < best2) best2 = g2;
        }
        out[i] = std::sqrt(best2);
    });
    return out;
}

double gpr(const Grid& gamma) {
    std::size_t evaluated = 0, passing = 0;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (gamma[i] == kGammaNotEvaluated) continue;
        ++evaluated;
        if (gamma[i] < 1.0) ++passing;
    }
    if (evaluated == 0)
        throw UndefinedResultError("gpr: no voxels above the dose threshold");
    return 100.0 * static_cast<double>(passing) / static_cast<double>(evaluated);
}

namespace {

std::vector<double> masked_doses(const DoseGrid& dose, const Grid& mask) {
    if (!dose.values.same_shape(mask))
        throw std::invalid_argument("dvh: mask shape must match dose shape");
    std::vector<double> d;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] > 0.5) d.push_back(dose.values[i]);
    }
    if (d.empty()) throw std::invalid_argument("dvh: empty structure mask");
    return d;
}

}  // namespace

double dvh_parameter(const DoseGrid& dose, const Grid& mask, double p) {
    if (!(p > 0.0) || p > 100.0)
        throw std::invalid_argument("dvh_parameter: p must be in (0, 100]");
    std::vector<double> d = masked_doses(dose, mask);
    std::sort(d.begin(), d.end(), std::greater<double>());
    std::size_t n = d.size();
    std::size_t idx =
        static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n))) - 1;
    if (idx >= n) idx = n - 1;
    return d[idx];
}

double dvh_dmax(const DoseGrid& dose, const Grid& mask) {
    std::vector<double> d = masked_doses(dose, mask);
    return *std::max_element(d.begin(), d.end());
}

DvhReport dvh_report(const DoseGrid& dose, const Grid& mask) {
    DvhReport r;
    r.d95 = dvh_parameter(dose, mask, 95.0);
    r.d98 = dvh_parameter(dose, mask, 98.0);
    r.dmax = dvh_dmax(dose, mask);
    return r;
}

DvhReport dvh_percent_diff(const DvhReport& test, const DvhReport& ref) {
    auto pct = [](double t, double r) {
        if (r == 0.0) throw UndefinedResultError("dvh_percent_diff: reference parameter is 0");
        return 100.0 * (t - r) / r;
    };
    DvhReport d;
    d.d95 = pct(test.d95, ref.d95);
    d.d98 = pct(test.d98, ref.d98);
    d.dmax = pct(test.dmax, ref.dmax);
    return d;
}

DoseGrid synthetic_dose(const Grid& target_mask, const std::vector<double>& spacing_mm,
                        double prescription_gy, double falloff_mm) {
    if (target_mask.rank() != 2 && target_mask.rank() != 3)
        throw std::invalid_argument("synthetic_dose: mask must be rank 2 or 3");
    if (spacing_mm.size() != target_mask.rank())
        throw std::invalid_argument("synthetic_dose: spacing must match mask rank");
    if (!(prescription_gy > 0.0) || !(falloff_mm > 0.0))
        throw std::invalid_argument("synthetic_dose: prescription and falloff must be > 0");

    DoseGrid dose;
    dose.values = Grid(target_mask.shape());
    dose.spacing_mm = spacing_mm;
    Shape3 s = as3d(dose);

    std::vector<std::array<long, 3>> targets;
    std::size_t plane = static_cast<std::size_t>(s.dim[1]) * s.dim[2];
    for (std::size_t i = 0; i < target_mask.size(); ++i) {
        if (target_mask[i] > 0.5) {
            targets.push_back({static_cast<long>(i / plane),
                               static_cast<long>((i / s.dim[2]) % s.dim[1]),
                               static_cast<long>(i % s.dim[2])});
        }
    }
    if (targets.empty()) throw std::invalid_argument("synthetic_dose: empty target mask");

    double denom = 2.0 * falloff_mm * falloff_mm;
    parallel_for(target_mask.size(), [&](std::size_t i) {
        if (target_mask[i] > 0.5) {
            dose.values[i] = prescription_gy;
            return;
        }
        long z = static_cast<long>(i / plane);
        long y = static_cast<long>((i / s.dim[2]) % s.dim[1]);
        long x = static_cast<long>(i % s.dim[2]);
        double best2 = std::numeric_limits<double>::infinity();
        for (const auto& t : targets) {
            double dz = (z - t[0]) * s.sp[0];
            double dy = (y - t[1]) * s.sp[1];
            double dx = (x - t[2]) * s.sp[2];
            double d2 = dz * dz + dy * dy + dx * dx;
            if (d2 < best2) best2 = d2;
        }
        dose.values[i] = prescription_gy * std::exp(-best2 / denom);
    });
    return dose;
}

}  // namespace hc3l
