// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "splatguide/splatguide.hpp"

using namespace splatguide;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail.clear();
        pass = false;
        detail += (detail.empty() ? "" : "; ") + why;
    }
    void note(const std::string& s) {
        if (pass) detail += (detail.empty() ? "" : ", ") + s;
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int failures = 0;

void run(int id, const char* name, double budget_s, const std::function<void(Outcome&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        body(o);
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) o.fail(fmt("took %.1f s, budget %.0f s", secs, budget_s));
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

Image random_image(std::mt19937_64& rng, int w, int h, int c, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double& v : img.data) v = u(rng);
    return img;
}

GaussianCloud random_cloud(std::mt19937_64& rng, int n, double opacity_lo = 0.05, double opacity_hi = 0.95) {
    std::uniform_real_distribution<double> xy(-0.6, 0.6), z(1.5, 4.0), s(0.02, 0.25), a(opacity_lo, opacity_hi),
        c(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    GaussianCloud cloud;
    for (int i = 0; i < n; ++i) {
        GaussianPrimitive p;
        p.center = Vector3d(xy(rng), xy(rng), z(rng));
        p.scale = Vector3d(s(rng), s(rng), s(rng));
        p.rotation = Quaterniond(n01(rng), n01(rng), n01(rng), n01(rng)).normalized();
        p.opacity = a(rng);
        p.color = Vector3d(c(rng), c(rng), c(rng));
        cloud.push_back(p);
    }
    return cloud;
}

Camera small_camera(double x = 0.0) {
    Camera c;
    c.width = c.height = 16;
    c.fx = c.fy = 16.0;
    c.cx = c.cy = 7.5;
    c.set_pose(Matrix3d::Identity(), Vector3d(x, 0, 0));
    return c;
}

// ---------------------------------------------------------------------------------------

void rasterizer_equivalence(Outcome& o) {
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int scene = 0; scene < 10; ++scene) {
        const auto cloud = random_cloud(rng, 20 + 20 * scene);
        const Camera cam;
        const auto a = rasterize(cloud, cam);
        const auto b = rasterize_reference(cloud, cam);
        worst = std::max({worst, max_abs_diff(a.color, b.color), max_abs_diff(a.transmittance, b.transmittance),
                          max_abs_diff(a.depth, b.depth)});
    }
    if (worst > 1e-6) o.fail(fmt("max abs diff %.3g > 1e-6", worst));
    o.note(fmt("10 scenes up to 200 primitives, max abs diff %.3g", worst));
}

double rasterizer_fd_worst(const GaussianCloud& cloud, const Camera& cam, const Image& up) {
    RasterConfig cfg;
    cfg.min_sigma = 0.0;
    cfg.termination_transmittance = 0.0;
    const auto grads = rasterize_backward(cloud, cam, up, cfg);
    auto loss = [&](const GaussianCloud& c) {
        const Image col = rasterize(c, cam, cfg).color;
        double s = 0.0;
        for (std::size_t i = 0; i < col.data.size(); ++i) s += up.data[i] * col.data[i];
        return s;
    };
    // 14 scalar parameters per primitive: center, scale, color, raw quaternion, opacity
    auto param = [](GaussianPrimitive& p, int k) -> double& {
        if (k < 3) return p.center[k];
        if (k < 6) return p.scale[k - 3];
        if (k < 9) return p.color[k - 6];
        if (k == 9) return p.rotation.w();
        if (k == 10) return p.rotation.x();
        if (k == 11) return p.rotation.y();
        if (k == 12) return p.rotation.z();
        return p.opacity;
    };
    auto grad = [](const PrimitiveGradient& g, int k) {
        if (k < 3) return g.center[k];
        if (k < 6) return g.scale[k - 3];
        if (k < 9) return g.color[k - 6];
        if (k < 13) return g.rotation[k - 9];
        return g.opacity;
    };
    double scale = 0.0;
    for (const auto& g : grads)
        for (int k = 0; k < 14; ++k) scale = std::max(scale, std::abs(grad(g, k)));
    const double eps = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int k = 0; k < 14; ++k) {
            GaussianCloud plus = cloud, minus = cloud;
            param(plus.primitives[i], k) += eps;
            param(minus.primitives[i], k) -= eps;
            const double fd = (loss(plus) - loss(minus)) / (2 * eps);
            const double an = grad(grads[i], k);
            worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4 * scale}));
        }
    return worst;
}

double loss_fd_worst(const std::function<LossValue(const Image&)>& f, Image a) {
    const LossValue base = f(a);
    double scale = 0.0;
    for (double g : base.grad.data) scale = std::max(scale, std::abs(g));
    const double eps = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double keep = a.data[i];
        a.data[i] = keep + eps;
        const double up = f(a).value;
        a.data[i] = keep - eps;
        const double down = f(a).value;
        a.data[i] = keep;
        const double fd = (up - down) / (2 * eps);
        const double an = base.grad.data[i];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3 * scale}));
    }
    return worst;
}

void gradient_checks(Outcome& o) {
    std::mt19937_64 rng(202);
    double raster = 0.0;
    for (int trial = 0; trial < 2; ++trial) {
        const auto cloud = random_cloud(rng, trial == 0 ? 10 : 20, 0.1, 0.9);
        const Camera cam = trial == 0 ? small_camera()
                                      : Camera::look_at(Vector3d(-0.4, 0.3, -0.4), Vector3d(0, 0, 2.5),
                                                        Vector3d::UnitY(), 16, 16, 16);
        raster = std::max(raster, rasterizer_fd_worst(cloud, cam, random_image(rng, 16, 16, 3, -1, 1)));
    }
    if (raster >= 1e-3) o.fail(fmt("rasterizer relative error %.3g", raster));

    const Image a = random_image(rng, 16, 16, 3, 0, 1), b = random_image(rng, 16, 16, 3, 0, 1);
    Image mask = random_image(rng, 16, 16, 1, 0, 1);
    for (double& m : mask.data) m = m > 0.4 ? 1.0 : 0.0;
    const LossWeights w;
    struct Named {
        const char* name;
        std::function<LossValue(const Image&)> f;
    };
    std::vector<Named> losses{
        {"l1", [&](const Image& x) { return l1(x, b, &mask); }},
        {"ssim", [&](const Image& x) { return ssim(x, b); }},
        {"perceptual", [&](const Image& x) { return perceptual_pyramid(x, b, &mask); }},
        {"input_view", [&](const Image& x) { return input_view_loss(x, b, w); }},
        {"generated_view", [&](const Image& x) { return generated_view_loss(x, b, w); }},
    };
    Sequence s, m, xs;
    for (int j = 0; j < 3; ++j) {
        s.push_back(random_image(rng, 16, 16, 3, 0, 1));
        xs.push_back(random_image(rng, 16, 16, 3, 0, 1));
        Image mk = random_image(rng, 16, 16, 1, 0, 1);
        for (double& v : mk.data) v = v > 0.3 ? 1.0 : 0.0;
        m.push_back(mk);
    }
    LossWeights gw;
    gw.lambda_perc = 0.5;
    for (std::size_t j = 0; j < 3; ++j)
        losses.push_back({"guidance", [&, j](const Image& frame) {
                              Sequence x = xs;
                              x[j] = frame;
                              const auto v = guidance_loss(s, m, x, gw);
                              return LossValue{v.value, v.grad[j]};
                          }});
    double loss_worst = 0.0;
    for (const auto& l : losses) {
        const Image x0 = l.name == std::string("guidance") ? xs[0] : a;
        const double e = loss_fd_worst(l.f, x0);
        loss_worst = std::max(loss_worst, e);
        if (e >= 1e-3) o.fail(fmt("loss relative error %.3g", e) + " in " + l.name);
    }
    o.note(fmt("rasterizer worst rel err %.2g, losses worst rel err %.2g", raster, loss_worst));
}

FrameMixtureModel scalar_mixture(int frames, const std::vector<double>& means, const std::vector<double>& weights,
                                 double sigma_c) {
    std::vector<std::vector<Image>> m(static_cast<std::size_t>(frames));
    for (auto& f : m)
        for (double v : means) f.push_back(Image(1, 1, 1, v));
    return FrameMixtureModel(m, weights, sigma_c);
}

Latent ddpm_chain(const FrameMixtureModel& model, const NoiseSchedule& sched, std::uint64_t seed,
                  const GuidanceFn& guide = {}) {
    Rng rng(seed);
    const auto shape = model.latent_shape();
    Latent x(shape.frames, shape.height, shape.width, shape.channels);
    fill_normal(x, rng);
    GeneratorConfig cfg;
    cfg.sampler = SamplerKind::ddpm;
    return sample_chain(model, sched, std::move(x), rng, cfg, nullptr, guide);
}

void sampler_moments(Outcome& o) {
    const auto sched = make_linear_schedule();
    const int n = 5000;
    const double v = 0.6, sc = 0.3;
    const Latent x = ddpm_chain(scalar_mixture(n, {v}, {1.0}, sc), sched, 303);
    double mean = 0.0, var = 0.0;
    for (double s : x.data) mean += s;
    mean /= n;
    for (double s : x.data) var += (s - mean) * (s - mean);
    var /= n - 1;
    if (std::abs(mean - v) > 3 * sc / std::sqrt(n)) o.fail(fmt("mean %.4f vs %.4f", mean, v));
    if (std::abs(var - sc * sc) > 0.1 * sc * sc) o.fail(fmt("variance %.4f vs %.4f", var, sc * sc));

    const double w1 = 0.3;
    const Latent y = ddpm_chain(scalar_mixture(n, {-1.0, 1.0}, {w1, 1 - w1}, 0.1), sched, 304);
    int first = 0;
    for (double s : y.data) first += s < 0.0;
    const double freq = static_cast<double>(first) / n;
    if (std::abs(freq - w1) > 3 * std::sqrt(w1 * (1 - w1) / n)) o.fail(fmt("component frequency %.4f vs %.2f", freq, w1));
    o.note(fmt("mean %.4f (target %.2f), var %.4f (target %.3f)", mean, v, var, sc * sc) +
           fmt(", weight-0.3 frequency %.4f", freq));
}

// x0 ~ N(v, sc^2), y = x0 + N(0, tau^2)
struct TiltedGaussian {
    double v, sc, y, tau;
    double posterior_mean() const { return (v / (sc * sc) + y / (tau * tau)) / (1 / (sc * sc) + 1 / (tau * tau)); }
    double posterior_var() const { return 1.0 / (1 / (sc * sc) + 1 / (tau * tau)); }
};

Latent l2_guidance_gradient(const FrameMixtureModel& model, const NoiseSchedule& s, const Latent& xt, int t,
                            const TiltedGaussian& tg) {
    const double ab = s.alpha_bar(t);
    const Latent x0 = predict_x0(xt, t, model.epsilon(xt, t, s), s);
    const double post_var = tg.sc * tg.sc * (1 - ab) / (ab * tg.sc * tg.sc + 1 - ab);
    Latent u = x0;
    for (double& v : u.data) v = (v - tg.y) / (tg.tau * tg.tau + post_var);
    const Latent jt = model.epsilon_vjp(xt, t, s, u);
    Latent g = u;
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = (u.data[i] - std::sqrt(1 - ab) * jt.data[i]) / std::sqrt(ab);
    return g;
}

void guided_posterior(Outcome& o) {
    const auto sched = make_linear_schedule();
    const TiltedGaussian tg{0.2, 0.5, 0.9, 0.3};
    const FrameMixtureModel one({{Image(1, 1, 1, tg.v)}}, {1.0}, tg.sc);
    Rng rng(404);
    double score_err = 0.0;
    for (int t : {1, 20, 150, 400, 800, 1000}) {
        const double ab = sched.alpha_bar(t);
        Latent xt(1, 1, 1, 1);
        fill_normal(xt, rng);
        const double guided =
            -one.epsilon(xt, t, sched).data[0] / std::sqrt(1 - ab) - l2_guidance_gradient(one, sched, xt, t, tg).data[0];
        const double closed = -(xt.data[0] - std::sqrt(ab) * tg.posterior_mean()) / (ab * tg.posterior_var() + 1 - ab);
        score_err = std::max(score_err, std::abs(guided - closed) / std::max(1.0, std::abs(closed)));
    }
    if (score_err > 1e-4) o.fail(fmt("guided score error %.3g", score_err));

    const int n = 5000;
    const auto model = scalar_mixture(n, {tg.v}, {1.0}, tg.sc);
    const GuidanceFn guide = [&](const Latent& xt, int t, const Latent&, const Latent&) {
        Latent g = l2_guidance_gradient(model, sched, xt, t, tg);
        for (double& v : g.data) v *= sched.beta(t);
        return g;
    };
    const Latent x = ddpm_chain(model, sched, 405, guide);
    double mean = 0.0;
    for (double v : x.data) mean += v;
    mean /= n;
    const double se = std::sqrt(tg.posterior_var() / n);
    if (std::abs(mean - tg.posterior_mean()) > 3 * se)
        o.fail(fmt("guided mean %.4f vs posterior %.4f", mean, tg.posterior_mean()));
    o.note(fmt("guided mean %.4f vs posterior %.4f (3 SE %.4f), score err %.2g", mean, tg.posterior_mean(), 3 * se,
               score_err));
}

// ---------------------------------------------------------------------------------------
// Scenes shared by criteria 5, 6 and 8.

RunConfig scene_config(int seed) {
    RunConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.baseline_iters = 1000;
    cfg.n_iter = 1000;
    cfg.n_gen = 250;
    cfg.densify_grad_threshold = 1e-3;
    cfg.opacity_reset_interval = 100000;
    return cfg;
}

struct SceneRun {
    SyntheticScene scene;
    RunConfig cfg;
    GaussianCloud baseline;
};

const SceneRun& scene_run(int seed) {
    static std::vector<std::unique_ptr<SceneRun>> cache(4);
    auto& slot = cache[static_cast<std::size_t>(seed)];
    if (!slot) {
        SceneSpec spec;
        spec.texture_seed = static_cast<std::uint64_t>(seed);
        slot = std::make_unique<SceneRun>();
        slot->scene = synthesize_scene(spec);
        slot->cfg = scene_config(seed);
        slot->baseline = train_baseline(slot->scene.inputs, slot->scene.init_cloud, slot->cfg);
    }
    return *slot;
}

void grounded_rate(Outcome& o) {
    const auto& run = scene_run(1);
    const auto pool = build_pool(run.scene.inputs, run.baseline, run.cfg.trajectory_config());
    if (pool.empty()) {
        o.fail("empty trajectory pool");
        return;
    }
    const auto sched = make_linear_schedule();
    double min_guided = 1.0, sum_guided = 0.0, sum_unguided = 0.0;
    int not_above = 0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& traj = pool.trajectories[k];
        const auto model = build_surrogate_model(run.scene, traj.poses);
        const ViewRecord& first = run.scene.inputs[static_cast<std::size_t>(traj.source)];
        auto rate = [&](double gamma0) {
            GeneratorConfig cfg;
            cfg.gamma0 = gamma0;
            Rng rng(500 + k);
            const auto seq = generate(run.baseline, first, traj.poses, model, IdentityDecoder{}, sched, cfg, rng);
            return grounded_selection_rate(model, seq.final_latent);
        };
        const double u = rate(0.0), g = rate(GeneratorConfig{}.gamma0);
        sum_unguided += u;
        sum_guided += g;
        min_guided = std::min(min_guided, g);
        if (!(g > u)) ++not_above;
    }
    const double n = static_cast<double>(pool.size());
    if (not_above) o.fail(std::to_string(not_above) + " trajectories with guided <= unguided");
    if (min_guided < 0.9) o.fail(fmt("min guided rate %.3f < 0.9", min_guided));
    o.note(std::to_string(pool.size()) + " trajectories" +
           fmt(", mean rate unguided %.3f guided %.3f, min guided %.3f", sum_unguided / n, sum_guided / n, min_guided));
}

void pipeline_ordering(Outcome& o) {
    const auto sched = make_linear_schedule();
    const IdentityDecoder dec;
    for (int seed = 1; seed <= 3; ++seed) {
        const auto& run = scene_run(seed);
        const auto pool = build_pool(run.scene.inputs, run.baseline, run.cfg.trajectory_config());
        const SyntheticScene& sc = run.scene;
        ModelProvider models = [&sc](const Trajectory& t) {
            return std::make_shared<FrameMixtureModel>(build_surrogate_model(sc, t.poses));
        };
        RunConfig unguided_cfg = run.cfg;
        unguided_cfg.gamma0 = 0.0;
        const auto unguided = reconstruct_from(sc.inputs, run.baseline, pool, unguided_cfg, models, dec, sched);
        const auto guided = reconstruct_from(sc.inputs, run.baseline, pool, run.cfg, models, dec, sched);
        const auto b = evaluate(run.baseline, sc), u = evaluate(unguided, sc), g = evaluate(guided, sc);
        const double bu = b.mean(Split::unobservable).psnr, uu = u.mean(Split::unobservable).psnr,
                     gu = g.mean(Split::unobservable).psnr;
        const double bf = b.mean(Split::full).psnr, gf = g.mean(Split::full).psnr;
        const std::string tag = "seed " + std::to_string(seed);
        if (!(uu >= bu)) o.fail(tag + fmt(": unguided unobservable %.2f < baseline %.2f", uu, bu));
        if (!(gu >= uu)) o.fail(tag + fmt(": guided unobservable %.2f < unguided %.2f", gu, uu));
        if (!(gf >= bf)) o.fail(tag + fmt(": guided full %.2f < baseline %.2f", gf, bf));
        std::printf("  criterion 6 seed %d: unobservable PSNR baseline %.2f unguided %.2f guided %.2f; "
                    "full PSNR baseline %.2f guided %.2f; pool %zu\n",
                    seed, bu, uu, gu, bf, gf, pool.size());
        std::fflush(stdout);
    }
    o.note("orderings hold on seeds 1-3");
}

void bookkeeping(Outcome& o) {
    const GaussianCloud gt = [] {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.1, 0.9);
        GaussianCloud cloud;
        for (int i = 0; i < 30; ++i) {
            GaussianPrimitive p;
            p.center = Vector3d(0.8 * u(rng), 0.8 * u(rng), 3.0 + 0.3 * u(rng));
            p.scale = Vector3d(0.15, 0.12, 0.1);
            p.opacity = 0.8;
            p.color = Vector3d(c(rng), c(rng), c(rng));
            cloud.push_back(p);
        }
        return cloud;
    }();
    std::vector<ViewRecord> inputs;
    for (double x : {-0.1, 0.1}) inputs.push_back({small_camera(x), rasterize(gt, small_camera(x)).color});
    TrajectoryPool pool;
    for (int i = 0; i < 2; ++i)
        pool.trajectories.push_back(
            {interpolate_trajectory(inputs[static_cast<std::size_t>(i)].camera, small_camera(i ? 0.4 : -0.4), 25), i, 0});
    ModelProvider models = [&gt](const Trajectory& t) {
        std::vector<std::vector<Image>> means;
        for (const auto& cam : t.poses) means.push_back({rasterize(gt, cam).color});
        return std::make_shared<FrameMixtureModel>(std::move(means), std::vector<double>{1.0}, 0.05);
    };
    RunConfig cfg;  // defaults except the sampler step count and the densify cadence
    cfg.ddim_steps = 2;
    cfg.gamma0 = 0.0;
    cfg.densify_interval = 1000;
    ReconstructionTrace tr;
    GaussianCloud init = gt;
    for (auto& p : init.primitives) p.color = Vector3d::Constant(0.5);
    reconstruct_from(inputs, init, pool, cfg, models, IdentityDecoder{}, make_linear_schedule(), &tr);

    if (tr.generation_iterations.size() != 39u) o.fail(std::to_string(tr.generation_iterations.size()) + " events, expected 39");
    for (std::size_t k = 0; k < tr.generation_iterations.size(); ++k) {
        if (tr.generation_iterations[k] != static_cast<int>(260 * k)) o.fail("event " + std::to_string(k) + " at wrong iteration");
        if (tr.store_sizes[k] != 25 * (k + 1)) o.fail("store size after event " + std::to_string(k));
    }
    const int picks = tr.picks_current + tr.picks_global;
    if (picks != cfg.n_iter) o.fail(std::to_string(picks) + " picks, expected 10000");
    const double share = static_cast<double>(tr.picks_global) / picks;
    if (std::abs(share - 0.5) > 3 * std::sqrt(0.25 / picks)) o.fail(fmt("global share %.4f", share));
    o.note(std::to_string(tr.generation_iterations.size()) + " events, final store " +
           std::to_string(tr.store_sizes.empty() ? 0 : tr.store_sizes.back()) + fmt(", global share %.4f", share));
}

bool same_pose(const Camera& a, const Camera& b) {
    return a.rotation == b.rotation && a.translation == b.translation && a.fx == b.fx && a.fy == b.fy &&
           a.cx == b.cx && a.cy == b.cy && a.width == b.width && a.height == b.height;
}

void trajectory_suite(Outcome& o) {
    const auto& run = scene_run(1);
    const auto tc = run.cfg.trajectory_config();
    Rasterizer r(tc.raster);
    std::vector<int> expected_per_source;
    for (std::size_t i = 0; i < run.scene.inputs.size(); ++i) {
        const Camera& in = run.scene.inputs[i].camera;
        const double depth = center_depth(r.render(run.baseline, in));
        const auto cands = sample_candidates(in, depth, static_cast<int>(i), tc);
        if (cands.size() != 75u) o.fail("input " + std::to_string(i) + ": " + std::to_string(cands.size()) + " candidates");
        const auto chosen = select_candidates(cands, run.baseline, tc.eta_mask, tc.max_hole_fraction, tc.top_k, tc.raster);
        if (chosen.size() > 6u) o.fail("more than 6 selected");
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            if (!(chosen[k].hole_fraction > 0.0 && chosen[k].hole_fraction <= 0.10)) o.fail("hole filter violated");
            if (k && chosen[k].hole_fraction > chosen[k - 1].hole_fraction) o.fail("selection not ranked");
        }
        int eligible = 0;
        for (const auto& c : cands) {
            const double h = mask_fraction(hole_mask(r.render(run.baseline, c.camera).transmittance, tc.eta_mask));
            eligible += h > 0.0 && h <= 0.10;
        }
        if (static_cast<int>(chosen.size()) != std::min(eligible, 6)) o.fail("top-6 not honored");
        expected_per_source.push_back(static_cast<int>(chosen.size()));
    }
    const auto pool = build_pool(run.scene.inputs, run.baseline, tc);
    std::vector<int> per_source(run.scene.inputs.size(), 0);
    for (const auto& t : pool.trajectories) {
        ++per_source[static_cast<std::size_t>(t.source)];
        if (t.poses.size() != 25u) o.fail("trajectory length " + std::to_string(t.poses.size()));
        else if (!same_pose(t.poses.front(), run.scene.inputs[static_cast<std::size_t>(t.source)].camera))
            o.fail("trajectory does not start at its input pose");
    }
    if (per_source != expected_per_source) o.fail("pool does not match the per-input selection");
    const auto again = build_pool(run.scene.inputs, run.baseline, tc);
    bool same = again.size() == pool.size();
    for (std::size_t k = 0; same && k < pool.size(); ++k) {
        same = again.trajectories[k].source == pool.trajectories[k].source &&
               again.trajectories[k].candidate == pool.trajectories[k].candidate;
        for (std::size_t j = 0; same && j < pool.trajectories[k].poses.size(); ++j)
            same = same_pose(again.trajectories[k].poses[j], pool.trajectories[k].poses[j]);
    }
    if (!same) o.fail("pool is not deterministic");
    if (pool.empty()) o.fail("empty pool");
    o.note(std::to_string(pool.size()) + " trajectories over " + std::to_string(run.scene.inputs.size()) + " inputs");
}

void metric_sanity(Outcome& o) {
    std::mt19937_64 rng(909);
    const Image a = random_image(rng, 32, 32, 3, 0, 1);
    const double s = ssim(a, a).value;
    if (std::abs(s - 1.0) > 1e-12) o.fail(fmt("ssim(a,a) = %.15f", s));
    double psnr_err = 0.0;
    for (double d : {0.5, 0.1, 0.01, 0.003}) {
        Image b = a;
        for (double& v : b.data) v += d;
        psnr_err = std::max(psnr_err, std::abs(psnr(a, b) - (-10.0 * std::log10(d * d))));
    }
    if (psnr_err > 1e-9) o.fail(fmt("psnr error %.3g", psnr_err));
    const RunConfig defaults;
    if (!(config_from_string(config_to_string(defaults)) == defaults)) o.fail("config round trip changed the defaults");
    o.note(fmt("ssim(a,a)-1 = %.1g, psnr err %.1g, config round trip exact", s - 1.0, psnr_err));
}

}  // namespace

int main() {
    run(1, "tile rasterizer matches the reference renderer", 10, rasterizer_equivalence);
    run(2, "analytic gradients match finite differences", 60, gradient_checks);
    run(3, "unguided DDPM reproduces the data distribution", 120, sampler_moments);
    run(4, "guided sampler targets the tilted posterior", 120, guided_posterior);
    // trains the seed-1 baseline shared with criteria 6 and 8 first, outside any budget
    scene_run(1);
    run(5, "guidance raises the grounded selection rate on every trajectory", 300, grounded_rate);
    run(6, "pipeline ordering on three scenes", 600, pipeline_ordering);
    run(7, "generation and sampling bookkeeping at default settings", 600, bookkeeping);
    run(8, "trajectory pool construction", 120, trajectory_suite);
    run(9, "metric and config sanity", 10, metric_sanity);
    std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
