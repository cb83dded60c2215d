#include "hc3l/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hc3l/rng.hpp"

namespace hc3l {

namespace {

constexpr std::uint64_t kCtTag = 0x6374;      // anatomy stream
constexpr std::uint64_t kCbctTag = 0x636274;  // degradation stream

struct Ellipse {
    double cy, cx, ry, rx;

    bool contains(double y, double x) const {
        double dy = (y - cy) / ry;
        double dx = (x - cx) / rx;
        return dy * dy + dx * dx <= 1.0;
    }
};

void paint(Grid& img, const Ellipse& e, double hu) {
    long size = static_cast<long>(img.dim(0));
    long y_lo = std::max(0L, static_cast<long>(std::floor(e.cy - e.ry)));
    long y_hi = std::min(size - 1, static_cast<long>(std::ceil(e.cy + e.ry)));
    long x_lo = std::max(0L, static_cast<long>(std::floor(e.cx - e.rx)));
    long x_hi = std::min(size - 1, static_cast<long>(std::ceil(e.cx + e.rx)));
    for (long y = y_lo; y <= y_hi; ++y) {
        for (long x = x_lo; x <= x_hi; ++x) {
            if (e.contains(static_cast<double>(y), static_cast<double>(x)))
                img.at(y, x) = hu;
        }
    }
}

double clip_hu(double v) {
    return std::clamp(v, PhantomSpec::kClipLo, PhantomSpec::kClipHi);
}

}  // namespace

Grid generate_ct(const PhantomSpec& spec, int index) {
    RngStream rng = RngStream(spec.master_seed)
                        .substream(kCtTag)
                        .substream(static_cast<std::uint64_t>(index));
    double n = static_cast<double>(spec.size);
    Grid img = Grid::full({static_cast<std::size_t>(spec.size),
                           static_cast<std::size_t>(spec.size)},
                          spec.air_hu);

    Ellipse body;
    body.cy = n / 2.0 + rng.next_uniform(-0.04, 0.04) * n;
    body.cx = n / 2.0 + rng.next_uniform(-0.04, 0.04) * n;
    body.ry = rng.next_uniform(spec.body_radius_min, spec.body_radius_max) * n;
    body.rx = rng.next_uniform(spec.body_radius_min, spec.body_radius_max) * n;
    double tissue = rng.next_uniform(spec.tissue_hu_min, spec.tissue_hu_max);
    paint(img, body, tissue);

    // Bone ellipses sit on a ring at mid body radius.
    long bones = rng.next_int(spec.bone_count_min, spec.bone_count_max);
    for (long b = 0; b < bones; ++b) {
        double angle = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        double ring = rng.next_uniform(0.45, 0.75);
        Ellipse bone;
        bone.cy = body.cy + ring * body.ry * std::sin(angle);
        bone.cx = body.cx + ring * body.rx * std::cos(angle);
        bone.ry = rng.next_uniform(spec.bone_radius_min, spec.bone_radius_max) * n;
        bone.rx = rng.next_uniform(spec.bone_radius_min, spec.bone_radius_max) * n;
        paint(img, bone, rng.next_uniform(spec.bone_hu_min, spec.bone_hu_max));
    }

    long pockets = rng.next_int(spec.air_pocket_min, spec.air_pocket_max);
    for (long p = 0; p < pockets; ++p) {
        double angle = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
        double ring = rng.next_uniform(0.35, 0.6);
        Ellipse pocket;
        pocket.cy = body.cy + ring * body.ry * std::sin(angle);
        pocket.cx = body.cx + ring * body.rx * std::cos(angle);
        pocket.ry = rng.next_uniform(spec.pocket_radius_min, spec.pocket_radius_max) * n;
        pocket.rx = rng.next_uniform(spec.pocket_radius_min, spec.pocket_radius_max) * n;
        paint(img, pocket, spec.air_hu);
    }

    // Central target painted last so it is never occluded.
    Ellipse target;
    target.cy = body.cy + rng.next_uniform(-0.03, 0.03) * n;
    target.cx = body.cx + rng.next_uniform(-0.03, 0.03) * n;
    target.ry = rng.next_uniform(spec.target_radius_min, spec.target_radius_max) * n;
    target.rx = rng.next_uniform(spec.target_radius_min, spec.target_radius_max) * n;
    paint(img, target, rng.next_uniform(spec.target_hu_min, spec.target_hu_max));

    for (std::size_t i = 0; i < img.size(); ++i) img[i] = clip_hu(img[i]);
    return img;
}

Grid degrade_to_cbct(const Grid& ct, const PhantomSpec& spec, int index) {
    RngStream rng = RngStream(spec.master_seed)
                        .substream(kCbctTag)
                        .substream(static_cast<std::uint64_t>(index));
    std::size_t size = ct.dim(0);
    double n = static_cast<double>(size);
    double gain = 1.0 + rng.next_uniform(-spec.gain_jitter, spec.gain_jitter);
    double offset = rng.next_uniform(-spec.offset_jitter_hu, spec.offset_jitter_hu);

    long streaks = rng.next_int(spec.streak_count_min, spec.streak_count_max);
    std::vector<double> s_cos(streaks), s_sin(streaks), s_freq(streaks), s_phase(streaks);
    for (long s = 0; s < streaks; ++s) {
        double angle = rng.next_uniform(0.0, std::numbers::pi);
        double period = rng.next_uniform(6.0, 16.0);
        s_cos[s] = std::cos(angle);
        s_sin[s] = std::sin(angle);
        s_freq[s] = 2.0 * std::numbers::pi / period;
        s_phase[s] = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
    }

    double cy = n / 2.0, cx = n / 2.0;
    double r_max2 = cy * cy + cx * cx;
    Grid out(ct.shape());
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            double v = gain * ct.at(y, x) + offset;
            double dy = static_cast<double>(y) - cy;
            double dx = static_cast<double>(x) - cx;
            // Radial cupping: strongest at the center, zero at the corners.
            v -= spec.cupping_amplitude_hu * (1.0 - (dy * dy + dx * dx) / r_max2);
            for (long s = 0; s < streaks; ++s) {
                double u = dx * s_cos[s] + dy * s_sin[s];
                v += spec.streak_amplitude_hu * std::sin(s_freq[s] * u + s_phase[s]);
            }
            double z = rng.next_gaussian();
            z = std::clamp(z, -spec.noise_clip_sigmas, spec.noise_clip_sigmas);
            v += spec.noise_sigma_hu * z;
            out.at(y, x) = clip_hu(v);
        }
    }
    return out;
}

Grid hu_to_unit(const Grid& hu) {
    Grid out(hu.shape());
    for (std::size_t i = 0; i < hu.size(); ++i)
        out[i] = (clip_hu(hu[i]) + 1000.0) / 2000.0 - 1.0;
    return out;
}

Grid unit_to_hu(const Grid& unit) {
    Grid out(unit.shape());
    for (std::size_t i = 0; i < unit.size(); ++i)
        out[i] = (unit[i] + 1.0) * 2000.0 - 1000.0;
    return out;
}

}  // namespace hc3l
