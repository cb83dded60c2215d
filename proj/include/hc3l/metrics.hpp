#pragma once

#include "hc3l/grid.hpp"

namespace hc3l {

// Image similarity metrics in HU space. PSNR uses Max = 3000 HU; SSIM uses
// whole-image population statistics with C1 = (0.01*Max)^2, C2 = (0.03*Max)^2.
struct MetricReport {
    double mae_hu = 0.0;
    double psnr_db = 0.0;  // +infinity when the images are identical
    double ssim = 0.0;
    std::size_t n = 0;

    static constexpr double kMaxHu = 3000.0;
    static constexpr double kC1 = (0.01 * kMaxHu) * (0.01 * kMaxHu);
    static constexpr double kC2 = (0.03 * kMaxHu) * (0.03 * kMaxHu);
};

double mae(const Grid& ct, const Grid& sct);
double psnr(const Grid& ct, const Grid& sct);
double ssim(const Grid& ct, const Grid& sct);
MetricReport compute_metrics(const Grid& ct, const Grid& sct);

}  // namespace hc3l
