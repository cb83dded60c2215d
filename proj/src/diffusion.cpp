#include "hc3l/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hc3l {

int NoiseSchedule::check(int t) const {
    if (t < 1 || t > T)
        throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                    std::to_string(T) + "]");
    return t;
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end,
                              SigmaMode sigma_mode) {
    if (T < 1) throw std::invalid_argument("linear_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double abar = 1.0;
    for (int t = 1; t <= T; ++t) {
        double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        double b = beta_start + frac * (beta_end - beta_start);
        s.beta[t - 1] = b;
        s.alpha[t - 1] = 1.0 - b;
        double abar_prev = abar;
        abar *= s.alpha[t - 1];
        s.alpha_bar[t - 1] = abar;
        if (sigma_mode == SigmaMode::beta) {
            s.sigma[t - 1] = std::sqrt(b);
        } else {
            // (1 - abar_{t-1}) / (1 - abar_t) * beta_t; zero at t = 1 where
            // abar_0 == 1.
            s.sigma[t - 1] = std::sqrt((1.0 - abar_prev) / (1.0 - abar) * b);
        }
    }
    return s;
}

namespace {

void check_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

Grid q_sample(const Grid& z0, int t, const NoiseSchedule& schedule, const Grid& eps) {
    check_same_shape(z0, eps, "q_sample");
    if (t < 1) throw std::invalid_argument("q_sample: t must be >= 1");
    double abar = schedule.alpha_bar_at(t);
    double a = std::sqrt(abar);
    double b = std::sqrt(1.0 - abar);
    Grid out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
    return out;
}

Grid ddpm_step(const Grid& z_t, int t, const Grid& predicted_eps,
               const NoiseSchedule& schedule, RngStream& rng) {
    check_same_shape(z_t, predicted_eps, "ddpm_step");
    double alpha = schedule.alpha_at(t);
    double abar = schedule.alpha_bar_at(t);
    double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    double eps_coeff = (1.0 - alpha) / std::sqrt(1.0 - abar);
    double sigma = schedule.sigma_at(t);

    Grid out(z_t.shape());
    if (t == 1) {
        // z = 0 at the last step; no randomness is consumed.
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = inv_sqrt_alpha * (z_t[i] - eps_coeff * predicted_eps[i]);
        return out;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv_sqrt_alpha * (z_t[i] - eps_coeff * predicted_eps[i]) +
                 sigma * rng.next_gaussian();
    }
    return out;
}

Grid ddim_step(const Grid& z_t, int t_current, int t_previous,
               const Grid& predicted_eps, const NoiseSchedule& schedule) {
    check_same_shape(z_t, predicted_eps, "ddim_step");
    if (t_previous < 0 || t_previous >= t_current)
        throw std::invalid_argument("ddim_step: need 0 <= t_previous < t_current");
    double abar_cur = schedule.alpha_bar_at(t_current);
    double abar_prev = schedule.alpha_bar_at(t_previous);
    double inv_sqrt_cur = 1.0 / std::sqrt(abar_cur);
    double noise_cur = std::sqrt(1.0 - abar_cur);
    double scale_prev = std::sqrt(abar_prev);
    double noise_prev = std::sqrt(1.0 - abar_prev);

    Grid out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double z0_est = (z_t[i] - noise_cur * predicted_eps[i]) * inv_sqrt_cur;
        out[i] = scale_prev * z0_est + noise_prev * predicted_eps[i];
    }
    return out;
}

std::vector<int> make_subsequence(int T, int S) {
    if (S < 1 || S > T) throw std::invalid_argument("make_subsequence: need 1 <= S <= T");
    std::vector<int> tau(S);
    for (int i = 1; i <= S; ++i) {
        tau[i - 1] = static_cast<int>(
            std::llround(static_cast<double>(i) * static_cast<double>(T) / static_cast<double>(S)));
    }
    tau.back() = T;
    return tau;
}

}  // namespace hc3l
