#pragma once

#include <vector>

#include "hc3l/grid.hpp"
#include "hc3l/rng.hpp"

namespace hc3l {

// Posterior std per step: `posterior` uses beta_tilde_t =
// (1 - abar_{t-1}) / (1 - abar_t) * beta_t; `beta` uses beta_t directly.
enum class SigmaMode { posterior, beta };

// Per-timestep noise schedule. Arrays are stored 0-indexed; accessors take
// the 1-based timestep t in [1, T].
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma;

    double beta_at(int t) const { return beta.at(check(t) - 1); }
    double alpha_at(int t) const { return alpha.at(check(t) - 1); }
    // alpha_bar_at(0) == 1 by convention (terminal DDIM step).
    double alpha_bar_at(int t) const {
        return t == 0 ? 1.0 : alpha_bar.at(check(t) - 1);
    }
    double sigma_at(int t) const { return sigma.at(check(t) - 1); }

private:
    int check(int t) const;
};

// beta_t = beta_start + (t-1)/(T-1) * (beta_end - beta_start), with the
// derived alpha, cumulative alpha_bar and posterior sigma arrays.
NoiseSchedule linear_schedule(int T, double beta_start, double beta_end,
                              SigmaMode sigma_mode = SigmaMode::posterior);

// Closed-form forward diffusion:
//   sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps.
Grid q_sample(const Grid& z0, int t, const NoiseSchedule& schedule, const Grid& eps);

// One ancestral reverse step:
//   (z_t - (1 - alpha_t)/sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t * z
// with z ~ N(0,1), except t == 1 where z = 0 and the rng is left untouched.
Grid ddpm_step(const Grid& z_t, int t, const Grid& predicted_eps,
               const NoiseSchedule& schedule, RngStream& rng);

// Deterministic (eta = 0) DDIM update from t_current to t_previous;
// t_previous == 0 yields the final z0 estimate.
Grid ddim_step(const Grid& z_t, int t_current, int t_previous,
               const Grid& predicted_eps, const NoiseSchedule& schedule);

// Uniform-stride sampling subsequence tau_i = round(i*T/S), i = 1..S; the
// last element is always T.
std::vector<int> make_subsequence(int T, int S);

}  // namespace hc3l
