#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "splatguide/evaluate.hpp"
#include "splatguide/guidance.hpp"
#include "splatguide/synthetic.hpp"
#include "splatguide/trajectory.hpp"

using namespace splatguide;

namespace {

const SyntheticScene& default_scene() {
    static const SyntheticScene scene = [] {
        SceneSpec spec;
        spec.texture_seed = 1;
        return synthesize_scene(spec);
    }();
    return scene;
}

double unobservable_fraction(const Image& mask) {
    double n = 0;
    for (double v : mask.data) n += v < 0.5;
    return n / mask.size();
}

std::vector<Camera> scene_trajectory(const SyntheticScene& scene, int source, double azimuth) {
    const Camera& in = scene.inputs[static_cast<std::size_t>(source)].camera;
    TrajectoryConfig tc;
    tc.polar_deg = {10.0};
    tc.azimuth_deg = {azimuth};
    tc.radius_factors = {0.7};
    const double depth = ray_cast(scene, in.center(), in.forward());
    return interpolate_trajectory(in, sample_candidates(in, depth, source, tc).front().camera, 25);
}

}  // namespace

TEST(SynthesizeScene, ShapeAndInvariants) {
    const auto& s = default_scene();
    EXPECT_EQ(s.inputs.size(), 6u);
    EXPECT_GE(s.eval_views.size(), 4u);
    ASSERT_EQ(s.eval_masks.size(), s.eval_views.size());
    EXPECT_EQ(s.boxes.size(), 2u);
    double best = 0.0;
    for (const auto& m : s.eval_masks) {
        for (double v : m.data) EXPECT_TRUE(v == 0.0 || v == 1.0);
        best = std::max(best, unobservable_fraction(m));
    }
    EXPECT_GT(best, 0.05);
    for (const auto& v : s.inputs) {
        EXPECT_NO_THROW(v.validate());
        EXPECT_EQ(v.camera.width, 64);
    }
    EXPECT_FALSE(s.init_cloud.empty());
}

TEST(SynthesizeScene, Deterministic) {
    SceneSpec spec;
    spec.texture_seed = 1;
    const auto b = synthesize_scene(spec);
    const auto& a = default_scene();
    EXPECT_EQ(a.gt, b.gt);
    EXPECT_EQ(a.init_cloud, b.init_cloud);
    for (std::size_t i = 0; i < a.inputs.size(); ++i) EXPECT_EQ(a.inputs[i].image, b.inputs[i].image);
    for (std::size_t i = 0; i < a.eval_masks.size(); ++i) EXPECT_EQ(a.eval_masks[i], b.eval_masks[i]);
    spec.texture_seed = 2;
    EXPECT_FALSE(synthesize_scene(spec).gt == a.gt);
}

TEST(SynthesizeScene, RejectsDegenerateSpecs) {
    SceneSpec spec;
    spec.resolution = 16;
    EXPECT_THROW(synthesize_scene(spec), InvalidInput);
    spec = SceneSpec{};
    spec.room = Vector3d(0.5, 2.0, 2.0);
    EXPECT_THROW(synthesize_scene(spec), InvalidInput);
    spec = SceneSpec{};
    spec.occluders = 5;
    EXPECT_THROW(synthesize_scene(spec), InvalidInput);
}

TEST(Observability, InputViewIsFullyObservableWithoutOccluders) {
    SceneSpec spec;
    spec.occluders = 0;
    spec.resolution = 32;
    const auto s = synthesize_scene(spec);
    EXPECT_LT(unobservable_fraction(observability_mask(s, s.inputs[0].camera)), 0.01);
}

TEST(Observability, PatchBehindAnOccluderIsFlagged) {
    SyntheticScene s;
    s.spec.room = Vector3d(4.0, 2.5, 4.0);
    Box b;
    b.lo = Vector3d(-0.2, -1.25, 0.5);
    b.hi = Vector3d(0.2, 1.0, 0.9);
    s.boxes.push_back(b);
    const Camera in = Camera::look_at(Vector3d::Zero(), Vector3d(0, 0, 1), Vector3d::UnitY(),
                                      Camera::focal_from_fov(90.0, 64), 64, 64);
    s.inputs.push_back({in, Image(64, 64, 3)});
    const Vector3d hidden(0.0, 0.0, 2.0), seen(0.9, 0.0, 2.0);
    EXPECT_FALSE(point_visible(s, in, hidden));
    EXPECT_TRUE(point_visible(s, in, seen));
    const Camera eval = Camera::look_at(Vector3d(1.5, 0.0, 1.0), Vector3d(0.4, 0.0, 2.0), Vector3d::UnitY(),
                                        Camera::focal_from_fov(90.0, 64), 64, 64);
    const Image mask = observability_mask(s, eval);
    auto pixel = [&](const Vector3d& p) {
        const Vector3d c = eval.to_camera(p);
        return std::make_pair(static_cast<int>(std::lround(eval.fx * c.x() / c.z() + eval.cx)),
                              static_cast<int>(std::lround(eval.fy * c.y() / c.z() + eval.cy)));
    };
    const auto [hx, hy] = pixel(hidden);
    const auto [sx, sy] = pixel(seen);
    EXPECT_EQ(mask.at(hx, hy), 0.0);
    EXPECT_EQ(mask.at(sx, sy), 1.0);
}

TEST(Surrogate, ComponentsAreGroundTruthShiftAndPatch) {
    const auto& s = default_scene();
    const auto traj = scene_trajectory(s, 0, 15.0);
    const auto model = build_surrogate_model(s, traj);
    ASSERT_EQ(model.frames(), 25);
    ASSERT_EQ(model.components(), 3);
    for (double w : model.weights()) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
    const Image gt = rasterize(s.gt, traj[7]).color;
    EXPECT_EQ(model.mean(7, 0), gt);
    for (std::size_t i = 0; i < gt.size(); ++i) EXPECT_DOUBLE_EQ(model.mean(7, 1).data[i], gt.data[i] + 0.2);
    EXPECT_DOUBLE_EQ(model.mean(7, 2).at(32, 32, 0), 0.9);
    EXPECT_DOUBLE_EQ(model.mean(7, 2).at(32, 32, 1), 0.1);
    EXPECT_EQ(model.mean(7, 2).at(0, 0, 2), gt.at(0, 0, 2));
}

TEST(Surrogate, DegenerateVariantsAreIdentical) {
    const auto& s = default_scene();
    SurrogateConfig cfg;
    cfg.delta = Vector3d::Zero();
    cfg.include_patch = false;
    const auto model = build_surrogate_model(s, scene_trajectory(s, 1, -15.0), cfg);
    ASSERT_EQ(model.components(), 2);
    for (int j = 0; j < model.frames(); ++j) EXPECT_EQ(model.mean(j, 0), model.mean(j, 1));
    EXPECT_THROW(build_surrogate_model(s, {}), InvalidInput);
}

TEST(Surrogate, UnguidedDdpmSplitsFramesEvenly) {
    // multinomial oracle: each variant takes about a third of the frames
    const auto& s = default_scene();
    const auto sched = make_linear_schedule();
    GeneratorConfig cfg;
    cfg.sampler = SamplerKind::ddpm;
    std::array<int, 3> counts{};
    int frames = 0;
    for (int k = 0; k < 4; ++k) {
        const auto model = build_surrogate_model(s, scene_trajectory(s, k, k % 2 ? 20.0 : -20.0));
        Rng rng(40 + k);
        Latent x(25, 64, 64, 3);
        fill_normal(x, rng);
        const Latent out = sample_chain(model, sched, x, rng, cfg);
        for (const auto& r : model.responsibilities(out, 1.0)) {
            ++counts[static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin())];
            ++frames;
        }
    }
    const double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / frames);
    for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / frames, 1.0 / 3.0, 3.0 * se);
}

TEST(Surrogate, GuidanceTowardTheSceneRaisesTheGroundedRate) {
    const auto& s = default_scene();
    const auto sched = make_linear_schedule();
    const auto traj = scene_trajectory(s, 2, 15.0);
    const auto model = build_surrogate_model(s, traj);
    const ViewRecord& first = s.inputs[2];
    auto rate = [&](double gamma0) {
        GeneratorConfig cfg;
        cfg.gamma0 = gamma0;
        Rng rng(5);
        const auto seq = generate(s.gt, first, traj, model, IdentityDecoder{}, sched, cfg, rng);
        return grounded_selection_rate(model, seq.final_latent);
    };
    const double unguided = rate(0.0), guided = rate(GeneratorConfig{}.gamma0);
    ::testing::Test::RecordProperty("unguided", std::to_string(unguided));
    ::testing::Test::RecordProperty("guided", std::to_string(guided));
    EXPECT_GT(guided, unguided);
    EXPECT_GE(guided, 0.9);
}

TEST(Evaluate, GroundTruthCloudIsPerfect) {
    const auto& s = default_scene();
    const auto rep = evaluate(s.gt, s);
    EXPECT_EQ(rep.rows.size(), 3 * s.eval_views.size() + 3);
    EXPECT_TRUE(std::isinf(rep.mean(Split::full).psnr));
    EXPECT_DOUBLE_EQ(rep.mean(Split::full).ssim, 1.0);
    EXPECT_DOUBLE_EQ(rep.mean(Split::observable).perceptual, 0.0);
}

TEST(Evaluate, BlackCloudMatchesDirectMse) {
    const auto& s = default_scene();
    const auto rep = evaluate(GaussianCloud{}, s);
    for (std::size_t k = 0; k < s.eval_views.size(); ++k) {
        double sq = 0.0;
        for (double v : s.eval_views[k].image.data) sq += v * v;
        const double expected = 10.0 * std::log10(1.0 / (sq / s.eval_views[k].image.size()));
        EXPECT_NEAR(rep.rows[3 * k].psnr, expected, 1e-9);
        EXPECT_EQ(rep.rows[3 * k].split, Split::full);
    }
}

TEST(Evaluate, HalfMaskEqualsCroppedHalf) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image a(32, 32, 3), b(32, 32, 3), mask(32, 32, 1);
    for (double& v : a.data) v = u(rng);
    for (double& v : b.data) v = u(rng);
    Image ca(16, 32, 3), cb(16, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 16; ++x) {
            mask.at(x, y) = 1.0;
            for (int c = 0; c < 3; ++c) {
                ca.at(x, y, c) = a.at(x, y, c);
                cb.at(x, y, c) = b.at(x, y, c);
            }
        }
    const auto row = view_metrics(a, b, &mask, "0", Split::observable);
    EXPECT_NEAR(row.mse, mse(ca, cb), 1e-12);
    EXPECT_NEAR(row.psnr, psnr(ca, cb), 1e-9);
    EXPECT_EQ(row.weight, 16.0 * 32.0);
    EXPECT_NEAR(l1(a, b, &mask).value, l1(ca, cb).value, 1e-12);
}

TEST(Evaluate, FullMseDecomposesIntoSplits) {
    const auto& s = default_scene();
    const auto rep = evaluate(s.init_cloud, s);
    for (std::size_t k = 0; k < s.eval_views.size(); ++k) {
        const auto& full = rep.rows[3 * k];
        const auto& obs = rep.rows[3 * k + 1];
        const auto& un = rep.rows[3 * k + 2];
        EXPECT_EQ(obs.weight + un.weight, full.weight);
        const double mo = obs.weight > 0 ? obs.mse * obs.weight : 0.0;
        const double mu = un.weight > 0 ? un.mse * un.weight : 0.0;
        EXPECT_NEAR(full.mse, (mo + mu) / full.weight, 1e-12);
        if (obs.weight > 0 && un.weight > 0) {
            EXPECT_GE(full.psnr, std::min(obs.psnr, un.psnr) - 1e-9);
            EXPECT_LE(full.psnr, std::max(obs.psnr, un.psnr) + 1e-9);
        }
    }
}

TEST(Evaluate, MasksDoNotDependOnTheCloud) {
    SceneSpec spec;
    spec.texture_seed = 1;
    const auto fresh = synthesize_scene(spec);
    const auto& s = default_scene();
    evaluate(s.init_cloud, s);
    evaluate(GaussianCloud{}, s);
    for (std::size_t k = 0; k < s.eval_masks.size(); ++k) EXPECT_EQ(s.eval_masks[k], fresh.eval_masks[k]);
}

TEST(Evaluate, CsvRoundTrip) {
    const auto& s = default_scene();
    const auto rep = evaluate(s.init_cloud, s);
    std::stringstream ss;
    write_report(ss, rep);
    EXPECT_EQ(read_report(ss), rep);

    MetricsReport special;
    special.rows.push_back({"0", Split::full, std::numeric_limits<double>::infinity(), 1.0, 0.0});
    special.rows.push_back({"1", Split::unobservable, std::nan(""), std::nan(""), std::nan("")});
    std::stringstream s2;
    write_report(s2, special);
    EXPECT_EQ(read_report(s2), special);

    std::istringstream bad("view_id,split,psnr\n");
    EXPECT_THROW(read_report(bad), InvalidInput);
    std::istringstream bad_split("view_id,split,psnr,ssim,perceptual\n0,sideways,1,1,1\n");
    EXPECT_THROW(read_report(bad_split), InvalidInput);
}
