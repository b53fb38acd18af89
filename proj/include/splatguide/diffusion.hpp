#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/image.hpp"
#include "splatguide/scene.hpp"

namespace splatguide {

using Rng = std::mt19937_64;

/// Variance schedule beta_1..beta_T with cumulative products alpha_bar_t; alpha_bar_0 = 1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
        require(betas_.size() >= 2, "schedule needs at least two steps");
        alpha_bars_.resize(betas_.size() + 1);
        alpha_bars_[0] = 1.0;
        for (std::size_t i = 0; i < betas_.size(); ++i) {
            require(betas_[i] > 0.0 && betas_[i] < 1.0, "beta must lie in (0, 1)");
            require(i == 0 || betas_[i] >= betas_[i - 1], "betas must be non-decreasing");
            alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
        }
    }

    int steps() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const { return betas_[index(t) - 1]; }
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const {
        require(t >= 0 && t <= steps(), "timestep out of range");
        return alpha_bars_[static_cast<std::size_t>(t)];
    }
    const std::vector<double>& betas() const { return betas_; }

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;

    std::size_t index(int t) const {
        require(t >= 1 && t <= steps(), "timestep out of range [1, T]");
        return static_cast<std::size_t>(t);
    }
};

inline NoiseSchedule make_linear_schedule(int steps = 1000, double beta_min = 1e-4, double beta_max = 0.02) {
    require(steps >= 2, "schedule needs T >= 2");
    require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0, "need 0 < beta_min <= beta_max < 1");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) betas[i] = beta_min + (beta_max - beta_min) * i / (steps - 1);
    return NoiseSchedule(std::move(betas));
}

inline void fill_normal(Latent& x, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : x.data) v = normal(rng);
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) z. The drawn z is returned through `noise`.
inline Latent forward_noise(const Latent& x0, int t, const NoiseSchedule& schedule, Rng& rng,
                            Latent* noise = nullptr) {
    require(t >= 0 && t <= schedule.steps(), "forward_noise: timestep out of range");
    Latent z = x0;
    fill_normal(z, rng);
    const double ab = schedule.alpha_bar(t);
    Latent xt = x0;
    for (std::size_t i = 0; i < xt.size(); ++i) xt.data[i] = std::sqrt(ab) * x0.data[i] + std::sqrt(1.0 - ab) * z.data[i];
    if (noise) *noise = std::move(z);
    return xt;
}

/// x_{0|t} = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
inline Latent predict_x0(const Latent& xt, int t, const Latent& eps, const NoiseSchedule& schedule) {
    require(xt.same_shape(eps), "predict_x0: shape mismatch");
    const double ab = schedule.alpha_bar(t);
    Latent out = xt;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (xt.data[i] - std::sqrt(1.0 - ab) * eps.data[i]) / std::sqrt(ab);
    return out;
}

enum class DdpmForm {
    // (1 + beta/2) x - beta / sqrt(1 - abar) eps + sqrt(beta) z
    euler,
    // standard ancestral posterior mean with variance beta (1 - abar_{t-1}) / (1 - abar_t)
    posterior,
};

/// One ancestral step t -> t-1; no noise is added at t = 1.
inline Latent ddpm_step(const Latent& xt, int t, const Latent& eps, const NoiseSchedule& schedule, Rng& rng,
                        DdpmForm form = DdpmForm::euler) {
    require(xt.same_shape(eps), "ddpm_step: shape mismatch");
    const double beta = schedule.beta(t);
    const double ab = schedule.alpha_bar(t);
    Latent out = xt;
    Latent z(xt.frames, xt.height, xt.width, xt.channels);
    if (t > 1) fill_normal(z, rng);
    if (form == DdpmForm::euler) {
        const double a = 1.0 + 0.5 * beta, b = beta / std::sqrt(1.0 - ab), c = std::sqrt(beta);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * xt.data[i] - b * eps.data[i] + c * z.data[i];
    } else {
        const double ab_prev = schedule.alpha_bar(t - 1);
        const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta), b = beta / std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data[i] = inv_sqrt_alpha * (xt.data[i] - b * eps.data[i]) + sigma * z.data[i];
    }
    return out;
}

/// Deterministic DDIM update x_t -> x_{t_prev}.
inline Latent ddim_step(const Latent& xt, int t, int t_prev, const Latent& eps, const NoiseSchedule& schedule) {
    require(t_prev < t && t_prev >= 0, "ddim_step: need 0 <= t_prev < t");
    const Latent x0 = predict_x0(xt, t, eps, schedule);
    const double ab_prev = schedule.alpha_bar(t_prev);
    Latent out = x0;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = std::sqrt(ab_prev) * x0.data[i] + std::sqrt(1.0 - ab_prev) * eps.data[i];
    return out;
}

/// Uniform-stride DDIM timesteps, descending from T; the step after the last one is t = 0.
inline std::vector<int> ddim_timesteps(int total_steps, int sampling_steps) {
    require(sampling_steps >= 1 && sampling_steps <= total_steps, "invalid DDIM step count");
    std::vector<int> ts;
    for (int i = 0; i < sampling_steps; ++i)
        ts.push_back(total_steps - static_cast<int>(static_cast<long>(i) * total_steps / sampling_steps));
    return ts;
}

// ---------------------------------------------------------------------------------------

struct GenerationCondition {
    Image first_frame;
    std::vector<Camera> trajectory;
};

struct LatentShape {
    int frames = 0, height = 0, width = 0, channels = 0;
};

/// Noise predictor eps_theta(x_t, t, condition).
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual LatentShape latent_shape() const = 0;
    virtual Latent epsilon(const Latent& xt, int t, const NoiseSchedule& schedule,
                           const GenerationCondition* condition = nullptr) const = 0;

    virtual bool has_exact_jacobian() const { return false; }
    /// u^T (d eps / d x_t); only for models with has_exact_jacobian().
    virtual Latent epsilon_vjp(const Latent&, int, const NoiseSchedule&, const Latent&) const {
        throw InvalidState("score model has no exact Jacobian");
    }
};

/// Maps latents to L x H x W x 3 frames.
class LatentDecoder {
public:
    virtual ~LatentDecoder() = default;
    virtual Sequence decode(const Latent& x) const = 0;
    /// d^T (d decode / d x) at x.
    virtual Latent decode_vjp(const Latent& x, const Sequence& d) const = 0;
};

class IdentityDecoder final : public LatentDecoder {
public:
    Sequence decode(const Latent& x) const override {
        require(x.channels == 3, "identity decoder expects d = 3");
        return x.to_frames();
    }
    Latent decode_vjp(const Latent&, const Sequence& d) const override { return Latent::from_frames(d); }
};

/// Independent per-frame Gaussian mixtures: frame j ~ sum_k w_k N(v_{j,k}, sigma_c^2 I).
/// Its noisy marginal is closed form, so eps and its Jacobian are exact.
class FrameMixtureModel final : public ScoreModel {
public:
    FrameMixtureModel(std::vector<std::vector<Image>> means, std::vector<double> weights, double sigma_c)
        : means_(std::move(means)), weights_(std::move(weights)), sigma_c_(sigma_c) {
        require(!means_.empty(), "mixture needs at least one frame");
        require(!weights_.empty(), "mixture needs at least one component");
        require(sigma_c_ > 0.0, "component std must be positive");
        double sum = 0.0;
        for (double w : weights_) {
            require(w > 0.0, "mixture weights must be positive");
            sum += w;
        }
        require(std::abs(sum - 1.0) <= 1e-9, "mixture weights must sum to 1");
        for (const auto& frame : means_) {
            require(frame.size() == weights_.size(), "each frame needs one mean per component");
            for (const auto& m : frame) require(m.same_shape(frame.front()) && m.same_shape(means_[0][0]),
                                                "component means must share a shape");
        }
    }

    int frames() const { return static_cast<int>(means_.size()); }
    int components() const { return static_cast<int>(weights_.size()); }
    double sigma_c() const { return sigma_c_; }
    const std::vector<double>& weights() const { return weights_; }
    const Image& mean(int frame, int k) const { return means_[frame][k]; }
    LatentShape latent_shape() const override {
        const Image& m = means_[0][0];
        return {frames(), m.height, m.width, m.channels};
    }

    /// Posterior responsibilities r_{j,k}(x_t) computed with a log-space softmax.
    std::vector<std::vector<double>> responsibilities(const Latent& xt, double alpha_bar) const {
        check(xt);
        const double var = alpha_bar * sigma_c_ * sigma_c_ + 1.0 - alpha_bar;
        const double root = std::sqrt(alpha_bar);
        std::vector<std::vector<double>> out(static_cast<std::size_t>(frames()));
        for (int j = 0; j < frames(); ++j) {
            auto f = xt.frame(j);
            std::vector<double> logits(weights_.size());
            for (std::size_t k = 0; k < weights_.size(); ++k) {
                const auto& m = means_[j][k].data;
                double d2 = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) {
                    const double d = f[i] - root * m[i];
                    d2 += d * d;
                }
                logits[k] = std::log(weights_[k]) - 0.5 * d2 / var;
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (double& l : logits) z += (l = std::exp(l - mx));
            for (double& l : logits) l /= z;
            out[static_cast<std::size_t>(j)] = std::move(logits);
        }
        return out;
    }

    /// Log density of the noisy marginal p_t(x_t), summed over frames.
    double log_density(const Latent& xt, double alpha_bar) const {
        check(xt);
        const double var = alpha_bar * sigma_c_ * sigma_c_ + 1.0 - alpha_bar;
        const double root = std::sqrt(alpha_bar);
        const double dim = static_cast<double>(xt.frame_size());
        double total = 0.0;
        for (int j = 0; j < frames(); ++j) {
            auto f = xt.frame(j);
            std::vector<double> logits(weights_.size());
            for (std::size_t k = 0; k < weights_.size(); ++k) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) {
                    const double d = f[i] - root * means_[j][k].data[i];
                    d2 += d * d;
                }
                logits[k] = std::log(weights_[k]) - 0.5 * d2 / var - 0.5 * dim * std::log(2.0 * M_PI * var);
            }
            const double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0.0;
            for (double l : logits) z += std::exp(l - mx);
            total += mx + std::log(z);
        }
        return total;
    }

    /// eps = -sqrt(1 - abar) grad log p_t(x_t).
    Latent epsilon(const Latent& xt, int t, const NoiseSchedule& schedule,
                   const GenerationCondition* = nullptr) const override {
        const double ab = schedule.alpha_bar(t);
        const double var = ab * sigma_c_ * sigma_c_ + 1.0 - ab;
        const double root = std::sqrt(ab);
        const double scale = std::sqrt(1.0 - ab) / var;
        const auto resp = responsibilities(xt, ab);
        Latent eps = xt;
        for (int j = 0; j < frames(); ++j) {
            auto f = xt.frame(j);
            auto e = eps.frame(j);
            for (std::size_t i = 0; i < f.size(); ++i) {
                double mean = 0.0;
                for (std::size_t k = 0; k < weights_.size(); ++k) mean += resp[j][k] * means_[j][k].data[i];
                e[i] = scale * (f[i] - root * mean);
            }
        }
        return eps;
    }

    bool has_exact_jacobian() const override { return true; }

    // d eps / d x = sqrt(1-abar)/var * (I - abar/var * Cov_r(v)), symmetric, so the VJP is the JVP.
    Latent epsilon_vjp(const Latent& xt, int t, const NoiseSchedule& schedule, const Latent& u) const override {
        require(u.same_shape(xt), "epsilon_vjp: shape mismatch");
        const double ab = schedule.alpha_bar(t);
        const double var = ab * sigma_c_ * sigma_c_ + 1.0 - ab;
        const double scale = std::sqrt(1.0 - ab) / var;
        const auto resp = responsibilities(xt, ab);
        Latent out = u;
        const std::size_t n = xt.frame_size();
        for (int j = 0; j < frames(); ++j) {
            auto uf = u.frame(j);
            auto of = out.frame(j);
            std::vector<double> vbar(n, 0.0);
            for (std::size_t k = 0; k < weights_.size(); ++k)
                for (std::size_t i = 0; i < n; ++i) vbar[i] += resp[j][k] * means_[j][k].data[i];
            std::vector<double> cov_u(n, 0.0);
            for (std::size_t k = 0; k < weights_.size(); ++k) {
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += (means_[j][k].data[i] - vbar[i]) * uf[i];
                const double coef = resp[j][k] * proj;
                if (coef == 0.0) continue;
                for (std::size_t i = 0; i < n; ++i) cov_u[i] += coef * (means_[j][k].data[i] - vbar[i]);
            }
            for (std::size_t i = 0; i < n; ++i) of[i] = scale * (uf[i] - ab / var * cov_u[i]);
        }
        return out;
    }

private:
    std::vector<std::vector<Image>> means_;  // [frame][component]
    std::vector<double> weights_;
    double sigma_c_;

    void check(const Latent& x) const {
        const Image& m = means_[0][0];
        require(x.frames == frames() && x.height == m.height && x.width == m.width && x.channels == m.channels,
                "latent shape does not match the mixture model");
    }
};

inline Latent mixture_epsilon(const FrameMixtureModel& model, const Latent& xt, int t, const NoiseSchedule& schedule) {
    return model.epsilon(xt, t, schedule);
}

}  // namespace splatguide
