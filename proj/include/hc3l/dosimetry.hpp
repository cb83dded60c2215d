#pragma once

#include <vector>

#include "hc3l/grid.hpp"

namespace hc3l {

// Dose distribution in Gy on a regular grid with per-axis voxel spacing in
// millimetres (2D or 3D).
struct DoseGrid {
    Grid values;
    std::vector<double> spacing_mm;

    void validate() const;
    double max_dose() const;
};

// Gamma-analysis criteria. Dose tolerance and exclusion threshold are
// percentages of the reference maximum (global normalization); the search
// radius defaults to 3 * dta_mm and must be at least 2 * dta_mm.
struct GammaCriteria {
    double dose_percent = 3.0;
    double dta_mm = 3.0;
    double threshold_percent = 10.0;
    double search_radius_mm = 0.0;  // 0 -> 3 * dta_mm
    bool interpolate = false;       // trilinear sub-voxel sampling
    int interp_subdivision = 3;

    double effective_radius() const { return search_radius_mm > 0.0 ? search_radius_mm : 3.0 * dta_mm; }
    void validate() const;
};

// Reference voxels below the dose threshold carry this sentinel.
constexpr double kGammaNotEvaluated = -1.0;

// Per-reference-voxel gamma index: min over evaluated positions within the
// search radius of sqrt(dist^2/dta^2 + dDose^2/tol^2). Native eval-grid
// positions by default; criteria.interpolate enables sub-voxel sampling.
Grid gamma_map(const DoseGrid& reference, const DoseGrid& evaluated,
               const GammaCriteria& criteria);

// Passing rate: 100 * #(gamma < 1) / #evaluated. Throws UndefinedResultError
// when no voxel was evaluated.
double gpr(const Grid& gamma);

// D_p: largest dose received by at least p% of the masked volume
// (descending sort, index ceil(p/100 * N) - 1). Mask entries > 0.5 are in.
double dvh_parameter(const DoseGrid& dose, const Grid& mask, double p);
double dvh_dmax(const DoseGrid& dose, const Grid& mask);

struct DvhReport {
    double d95 = 0.0;
    double d98 = 0.0;
    double dmax = 0.0;
};

DvhReport dvh_report(const DoseGrid& dose, const Grid& mask);

// 100 * (test - ref) / ref per parameter; UndefinedResultError if a
// reference parameter is 0.
DvhReport dvh_percent_diff(const DvhReport& test, const DvhReport& ref);

// Prescription inside the target, Gaussian falloff with distance outside.
DoseGrid synthetic_dose(const Grid& target_mask, const std::vector<double>& spacing_mm,
                        double prescription_gy, double falloff_mm);

}  // namespace hc3l
