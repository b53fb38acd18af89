#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "splatguide/diffusion.hpp"
#include "splatguide/error.hpp"
#include "splatguide/image.hpp"
#include "splatguide/losses.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/scene.hpp"

namespace splatguide {

enum class SamplerKind { ddpm, ddim };

enum class JacobianMode {
    frozen_epsilon,  // d x_{0|t} / d x_t ~= I / sqrt(abar_t)
    exact,           // through the model's exact eps Jacobian
};

struct GeneratorConfig {
    SamplerKind sampler = SamplerKind::ddim;
    int ddim_steps = 50;
    DdpmForm ddpm_form = DdpmForm::euler;
    double gamma0 = 100.0;
    bool normalize = false;
    double eta_mask = 0.9;
    JacobianMode jacobian = JacobianMode::frozen_epsilon;
    bool pin_first_frame = true;
    LossWeights weights;
    RasterConfig raster;
};

/// Rendered sequence S and guidance mask M for one trajectory. M is 1 where the model
/// covers the pixel (complement of the hole mask), so guidance acts only on rendered content.
struct GuidanceContext {
    Sequence rendered;
    Sequence mask;
    LossWeights weights;
};

inline GuidanceContext make_guidance_context(const GaussianCloud& cloud, const std::vector<Camera>& trajectory,
                                             double eta_mask, const LossWeights& weights,
                                             const RasterConfig& raster = {}) {
    GuidanceContext ctx;
    ctx.weights = weights;
    Rasterizer r(raster);
    for (const Camera& cam : trajectory) {
        auto out = r.render(cloud, cam);
        ctx.rendered.push_back(std::move(out.color));
        ctx.mask.push_back(coverage_mask(out.transmittance, eta_mask));
    }
    return ctx;
}

/// g_t = (d x_{0|t} / d x_t)^T D^T grad_X L(S, M, X_{0|t}) with eps = model(x_t) already evaluated.
inline Latent guidance_gradient(const Latent& xt, int t, const Latent& eps, const GuidanceContext& ctx,
                                const ScoreModel& model, const LatentDecoder& decoder, const NoiseSchedule& schedule,
                                JacobianMode mode = JacobianMode::frozen_epsilon) {
    const double ab = schedule.alpha_bar(t);
    const Latent x0 = predict_x0(xt, t, eps, schedule);
    const Sequence decoded = decoder.decode(x0);
    const auto loss = guidance_loss(ctx.rendered, ctx.mask, decoded, ctx.weights);
    Latent g = decoder.decode_vjp(x0, loss.grad);
    if (mode == JacobianMode::exact) {
        const Latent jt = model.epsilon_vjp(xt, t, schedule, g);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] -= std::sqrt(1.0 - ab) * jt.data[i];
    }
    for (double& v : g.data) v /= std::sqrt(ab);
    return g;
}

inline Latent guidance_gradient(const Latent& xt, int t, const GuidanceContext& ctx, const ScoreModel& model,
                                const LatentDecoder& decoder, const NoiseSchedule& schedule,
                                JacobianMode mode = JacobianMode::frozen_epsilon) {
    return guidance_gradient(xt, t, model.epsilon(xt, t, schedule), ctx, model, decoder, schedule, mode);
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// gamma_t = gamma0 sqrt(1 - abar_t). With `normalize`, gamma_t is reduced so that
/// ||gamma_t g_t||_inf does not exceed the sampler's own step ||x_hat - x_t||_inf.
inline double gamma_schedule(int t, const NoiseSchedule& schedule, double gamma0, bool normalize = false,
                             const Latent* g = nullptr, double step_inf_norm = 0.0) {
    require(gamma0 >= 0.0, "gamma0 must be non-negative");
    double gamma = gamma0 * std::sqrt(1.0 - schedule.alpha_bar(t));
    if (normalize && g) {
        const double gi = max_abs(g->data);
        if (gi > 0.0 && gamma * gi > step_inf_norm) gamma = step_inf_norm / gi;
    }
    return gamma;
}

/// Correction subtracted from the sampler's proposal: (x_t, t, eps, x_hat) -> gamma_t g_t.
using GuidanceFn = std::function<Latent(const Latent&, int, const Latent&, const Latent&)>;

/// Runs the denoising chain from x_T; with a guidance function every update becomes
/// x_{t-1} = x_hat_{t-1} - gamma_t g_t.
inline Latent sample_chain(const ScoreModel& model, const NoiseSchedule& schedule, Latent x, Rng& rng,
                           const GeneratorConfig& cfg, const GenerationCondition* cond = nullptr,
                           const GuidanceFn& guidance = nullptr) {
    auto apply = [&](Latent& x_hat, const Latent& xt, int t, const Latent& eps) {
        if (!guidance) return;
        const Latent corr = guidance(xt, t, eps, x_hat);
        for (std::size_t i = 0; i < x_hat.size(); ++i) x_hat.data[i] -= corr.data[i];
    };
    if (cfg.sampler == SamplerKind::ddpm) {
        for (int t = schedule.steps(); t >= 1; --t) {
            const Latent eps = model.epsilon(x, t, schedule, cond);
            Latent x_hat = ddpm_step(x, t, eps, schedule, rng, cfg.ddpm_form);
            apply(x_hat, x, t, eps);
            x = std::move(x_hat);
        }
    } else {
        const auto ts = ddim_timesteps(schedule.steps(), cfg.ddim_steps);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const int t = ts[i];
            const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
            const Latent eps = model.epsilon(x, t, schedule, cond);
            Latent x_hat = ddim_step(x, t, t_prev, eps, schedule);
            apply(x_hat, x, t, eps);
            x = std::move(x_hat);
        }
    }
    return x;
}

/// Scene-grounding guidance for a context and generator configuration.
inline GuidanceFn scene_guidance(const GuidanceContext& ctx, const ScoreModel& model, const LatentDecoder& decoder,
                                 const NoiseSchedule& schedule, const GeneratorConfig& cfg) {
    if (cfg.gamma0 == 0.0) return nullptr;
    return [&ctx, &model, &decoder, &schedule, cfg](const Latent& xt, int t, const Latent& eps, const Latent& x_hat) {
        Latent g = guidance_gradient(xt, t, eps, ctx, model, decoder, schedule, cfg.jacobian);
        double step = 0.0;
        for (std::size_t i = 0; i < xt.size(); ++i) step = std::max(step, std::abs(x_hat.data[i] - xt.data[i]));
        const double gamma = gamma_schedule(t, schedule, cfg.gamma0, cfg.normalize, &g, step);
        for (double& v : g.data) v *= gamma;
        return g;
    };
}

struct GeneratedSequence {
    Sequence frames;
    std::vector<Camera> trajectory;
    Sequence rendered;
    Sequence mask;
    Latent final_latent;
};

/// Sequence generation with scene-grounding guidance: render S and M along the trajectory,
/// draw x_T ~ N(0, I), run the guided chain and decode.
inline GeneratedSequence generate(const GaussianCloud& cloud, const ViewRecord& first, const std::vector<Camera>& trajectory,
                                  const ScoreModel& model, const LatentDecoder& decoder, const NoiseSchedule& schedule,
                                  const GeneratorConfig& cfg, Rng& rng) {
    const LatentShape shape = model.latent_shape();
    if (static_cast<int>(trajectory.size()) != shape.frames)
        throw InvalidInput("generate: trajectory length must equal the model sequence length");
    const Camera& c0 = trajectory.front();
    if ((c0.rotation - first.camera.rotation).cwiseAbs().maxCoeff() > 1e-9 ||
        (c0.translation - first.camera.translation).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidInput("generate: the first trajectory pose must equal the conditioning view's pose");

    GuidanceContext ctx = make_guidance_context(cloud, trajectory, cfg.eta_mask, cfg.weights, cfg.raster);
    GenerationCondition cond{first.image, trajectory};

    Latent x(shape.frames, shape.height, shape.width, shape.channels);
    fill_normal(x, rng);
    const GuidanceFn guide = scene_guidance(ctx, model, decoder, schedule, cfg);
    x = sample_chain(model, schedule, std::move(x), rng, cfg, &cond, guide);

    GeneratedSequence out;
    out.frames = decoder.decode(x);
    for (auto& f : out.frames) f = clamp01(std::move(f));
    if (cfg.pin_first_frame) {
        require(first.image.same_shape(out.frames.front()), "generate: conditioning image shape mismatch");
        out.frames.front() = first.image;
    }
    out.trajectory = trajectory;
    out.rendered = std::move(ctx.rendered);
    out.mask = std::move(ctx.mask);
    out.final_latent = std::move(x);
    return out;
}

}  // namespace splatguide
