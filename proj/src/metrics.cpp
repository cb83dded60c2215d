#include "hc3l/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hc3l {

namespace {

void check_pair(const Grid& a, const Grid& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("metrics: shape mismatch");
    if (a.size() == 0) throw std::invalid_argument("metrics: empty grids");
}

}  // namespace

double mae(const Grid& ct, const Grid& sct) {
    check_pair(ct, sct);
    double acc = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) acc += std::abs(ct[i] - sct[i]);
    return acc / static_cast<double>(ct.size());
}

double psnr(const Grid& ct, const Grid& sct) {
    check_pair(ct, sct);
    double mse = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        double d = ct[i] - sct[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ct.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(MetricReport::kMaxHu * MetricReport::kMaxHu / mse);
}

double ssim(const Grid& ct, const Grid& sct) {
    check_pair(ct, sct);
    double n = static_cast<double>(ct.size());
    double mu_a = 0.0, mu_b = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        mu_a += ct[i];
        mu_b += sct[i];
    }
    mu_a /= n;
    mu_b /= n;
    // Population (divide-by-n) variance and covariance.
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        double da = ct[i] - mu_a;
        double db = sct[i] - mu_b;
        var_a += da * da;
        var_b += db * db;
        cov += da * db;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    double num = (2.0 * mu_a * mu_b + MetricReport::kC1) * (2.0 * cov + MetricReport::kC2);
    double den = (mu_a * mu_a + mu_b * mu_b + MetricReport::kC1) *
                 (var_a + var_b + MetricReport::kC2);
    return num / den;
}

MetricReport compute_metrics(const Grid& ct, const Grid& sct) {
    MetricReport r;
    r.mae_hu = mae(ct, sct);
    r.psnr_db = psnr(ct, sct);
    r.ssim = ssim(ct, sct);
    r.n = ct.size();
    return r;
}

}  // namespace hc3l
