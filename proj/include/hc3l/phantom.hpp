#pragma once

#include <cstdint>

#include "hc3l/grid.hpp"

namespace hc3l {

// Synthetic paired CT/CBCT slice generator. Every slice is a deterministic
// function of (master_seed, index); train and test sets use disjoint index
// ranges. Degradations act in HU space before normalization.
struct PhantomSpec {
    int size = 64;
    int train_count = 200;
    int test_count = 50;
    std::uint64_t master_seed = 2024;

    // Body geometry, radii as fractions of the slice size.
    double body_radius_min = 0.28;
    double body_radius_max = 0.40;
    double target_radius_min = 0.06;
    double target_radius_max = 0.11;
    double bone_radius_min = 0.035;
    double bone_radius_max = 0.09;
    double pocket_radius_min = 0.03;
    double pocket_radius_max = 0.06;

    // Tissue HU ranges.
    double tissue_hu_min = 20.0;
    double tissue_hu_max = 60.0;
    double bone_hu_min = 700.0;
    double bone_hu_max = 1200.0;
    double target_hu_min = 150.0;
    double target_hu_max = 250.0;
    double air_hu = -1000.0;
    int bone_count_min = 2;
    int bone_count_max = 4;
    int air_pocket_min = 0;
    int air_pocket_max = 2;

    // CBCT degradation, applied in HU.
    double cupping_amplitude_hu = 250.0;
    int streak_count_min = 2;
    int streak_count_max = 4;
    double streak_amplitude_hu = 35.0;
    double noise_sigma_hu = 30.0;
    double noise_clip_sigmas = 4.0;
    double gain_jitter = 0.04;
    double offset_jitter_hu = 20.0;

    // Quality gate on the generated corpus.
    double mae_band_lo_hu = 40.0;
    double mae_band_hi_hu = 200.0;

    static constexpr double kClipLo = -1000.0;
    static constexpr double kClipHi = 3000.0;
};

// Elliptical body with bones, optional air pockets and a central target.
Grid generate_ct(const PhantomSpec& spec, int index);

// Cupping shading, sinusoidal streaks, clipped Gaussian noise and a global
// gain/offset perturbation; output clipped to [-1000, 3000].
Grid degrade_to_cbct(const Grid& ct, const PhantomSpec& spec, int index);

// Linear [-1000, 3000] <-> [-1, 1] intensity mapping (input clipped first).
Grid hu_to_unit(const Grid& hu);
Grid unit_to_hu(const Grid& unit);

}  // namespace hc3l
