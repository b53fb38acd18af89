#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "splatguide/diffusion.hpp"
#include "splatguide/error.hpp"
#include "splatguide/image.hpp"
#include "splatguide/parallel.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/scene.hpp"

namespace splatguide {

struct Box {
    Vector3d lo = Vector3d::Zero();
    Vector3d hi = Vector3d::Zero();
};

struct SceneSpec {
    Vector3d room = Vector3d(4.0, 2.5, 4.0);  // x, y (up), z extents; the room is centred at the origin
    std::uint64_t texture_seed = 0;
    int occluders = 2;
    int resolution = 64;
    double spacing = 0.1;        // distance between neighbouring surface Gaussians
    double fov_deg = 90.0;
    int inputs = 6;
    double init_jitter = 0.02;
    int init_stride = 2;          // keep every n-th visible surface point for the initial cloud
};

/// Ground-truth room, its views and per-eval-view observability masks (1 = seen by some input).
struct SyntheticScene {
    SceneSpec spec;
    GaussianCloud gt;
    std::vector<Box> boxes;
    std::vector<ViewRecord> inputs;
    std::vector<ViewRecord> eval_views;
    std::vector<Image> eval_masks;
    GaussianCloud init_cloud;

    double room_half(int axis) const { return 0.5 * spec.room[axis]; }
};

namespace detail {

inline double hash01(std::uint64_t seed, long a, long b, long c) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (long v : {a, b, c}) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 31;
    }
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

// Smoothly interpolated lattice noise in [0,1].
inline double value_noise(std::uint64_t seed, double u, double v, long layer) {
    const double fu = std::floor(u), fv = std::floor(v);
    const long iu = static_cast<long>(fu), iv = static_cast<long>(fv);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tu = smooth(u - fu), tv = smooth(v - fv);
    const double a = hash01(seed, iu, iv, layer), b = hash01(seed, iu + 1, iv, layer);
    const double c = hash01(seed, iu, iv + 1, layer), d = hash01(seed, iu + 1, iv + 1, layer);
    return (a * (1 - tu) + b * tu) * (1 - tv) + (c * (1 - tu) + d * tu) * tv;
}

inline Vector3d surface_color(std::uint64_t seed, long surface, double u, double v) {
    const Vector3d base(0.25 + 0.5 * hash01(seed, surface, 0, 1), 0.25 + 0.5 * hash01(seed, surface, 0, 2),
                        0.25 + 0.5 * hash01(seed, surface, 0, 3));
    const double n = value_noise(seed, u * 2.5, v * 2.5, surface) - 0.5;
    const bool checker = (static_cast<long>(std::floor(u * 1.5)) + static_cast<long>(std::floor(v * 1.5))) % 2 == 0;
    Vector3d c = base * (checker ? 1.15 : 0.8) + Vector3d::Constant(0.35 * n);
    return c.cwiseMax(0.02).cwiseMin(0.98);
}

// Gaussians tiling the rectangle origin + a*u + b*v, u in [0, lu], v in [0, lv].
inline void add_sheet(GaussianCloud& cloud, const Vector3d& origin, const Vector3d& a, const Vector3d& b, double lu,
                      double lv, double spacing, std::uint64_t seed, long surface) {
    const int nu = std::max(1, static_cast<int>(std::round(lu / spacing)));
    const int nv = std::max(1, static_cast<int>(std::round(lv / spacing)));
    const double du = lu / nu, dv = lv / nv;
    Matrix3d frame;
    frame.col(0) = a.normalized();
    frame.col(1) = b.normalized();
    frame.col(2) = a.cross(b).normalized();
    const Quaterniond q = Quaterniond(frame).normalized();
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            const double u = (i + 0.5) * du, v = (j + 0.5) * dv;
            GaussianPrimitive p;
            p.center = origin + u * a.normalized() + v * b.normalized();
            p.scale = Vector3d(0.6 * du, 0.6 * dv, 0.05 * std::min(du, dv));
            p.rotation = q;
            p.opacity = 0.95;
            p.color = surface_color(seed, surface, u, v);
            cloud.push_back(p);
        }
}

inline void add_box(GaussianCloud& cloud, const Box& box, double spacing, std::uint64_t seed, long surface) {
    const Vector3d lo = box.lo, hi = box.hi, e = hi - lo;
    const Vector3d X = Vector3d::UnitX(), Y = Vector3d::UnitY(), Z = Vector3d::UnitZ();
    add_sheet(cloud, lo, X, Y, e.x(), e.y(), spacing, seed, surface);                      // z = lo
    add_sheet(cloud, Vector3d(lo.x(), lo.y(), hi.z()), X, Y, e.x(), e.y(), spacing, seed, surface + 1);
    add_sheet(cloud, lo, Z, Y, e.z(), e.y(), spacing, seed, surface + 2);                  // x = lo
    add_sheet(cloud, Vector3d(hi.x(), lo.y(), lo.z()), Z, Y, e.z(), e.y(), spacing, seed, surface + 3);
    add_sheet(cloud, Vector3d(lo.x(), hi.y(), lo.z()), X, Z, e.x(), e.z(), spacing, seed, surface + 4);  // top
}

// Slab test; returns the entry distance or +inf.
inline double ray_box(const Vector3d& o, const Vector3d& d, const Box& b) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-15) {
            if (o[k] < b.lo[k] || o[k] > b.hi[k]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double ta = (b.lo[k] - o[k]) / d[k], tb = (b.hi[k] - o[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::numeric_limits<double>::infinity();
    }
    return t0 > 0.0 ? t0 : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Distance along unit direction d from a point inside the room to the first surface.
inline double ray_cast(const SyntheticScene& scene, const Vector3d& o, const Vector3d& d) {
    double t = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-15) continue;
        const double wall = d[k] > 0 ? scene.room_half(k) : -scene.room_half(k);
        const double tk = (wall - o[k]) / d[k];
        if (tk > 0.0) t = std::min(t, tk);
    }
    for (const auto& b : scene.boxes) t = std::min(t, detail::ray_box(o, d, b));
    return t;
}

/// Pixel ray (unit, world frame) through pixel centre (x, y).
inline Vector3d pixel_ray(const Camera& cam, double x, double y) {
    const Vector3d dc((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
    return (cam.rotation.transpose() * dc).normalized();
}

/// True when surface point p is inside the image of `cam` and not hidden by other geometry.
inline bool point_visible(const SyntheticScene& scene, const Camera& cam, const Vector3d& p) {
    const Vector3d pc = cam.to_camera(p);
    if (pc.z() <= 1e-6) return false;
    const double u = cam.fx * pc.x() / pc.z() + cam.cx, v = cam.fy * pc.y() / pc.z() + cam.cy;
    if (u < -0.5 || u > cam.width - 0.5 || v < -0.5 || v > cam.height - 0.5) return false;
    const Vector3d o = cam.center();
    const double dist = (p - o).norm();
    const double hit = ray_cast(scene, o, (p - o) / dist);
    return hit >= dist - 1e-6 - 1e-6 * dist;
}

/// 1 where the surface seen through a pixel of `cam` is visible from at least one input view.
inline Image observability_mask(const SyntheticScene& scene, const Camera& cam) {
    Image mask(cam.width, cam.height, 1);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Vector3d d = pixel_ray(cam, x, y);
            const double t = ray_cast(scene, cam.center(), d);
            if (!std::isfinite(t)) continue;
            const Vector3d p = cam.center() + t * d;
            for (const auto& v : scene.inputs)
                if (point_visible(scene, v.camera, p)) {
                    mask.at(x, y) = 1.0;
                    break;
                }
        }
    return mask;
}

inline Camera scene_camera(const SceneSpec& spec, const Vector3d& eye, const Vector3d& target) {
    return Camera::look_at(eye, target, Vector3d::UnitY(), Camera::focal_from_fov(spec.fov_deg, spec.resolution),
                           spec.resolution, spec.resolution);
}

/// Axis-aligned textured room with box occluders, inside-out input cameras and eval cameras.
inline SyntheticScene synthesize_scene(const SceneSpec& spec, const RasterConfig& raster = {}) {
    require(spec.resolution >= 32, "synthesize_scene: resolution must be at least 32");
    require((spec.room.array() >= 1.0).all(), "synthesize_scene: room dimensions must be at least 1");
    require(spec.occluders >= 0 && spec.occluders <= 4, "synthesize_scene: occluder count must lie in [0, 4]");
    require(spec.spacing > 0.0 && spec.spacing < 0.5 * spec.room.minCoeff(), "synthesize_scene: bad spacing");
    require(spec.inputs >= 1, "synthesize_scene: at least one input view");
    require(spec.fov_deg > 10.0 && spec.fov_deg < 150.0, "synthesize_scene: field of view out of range");

    SyntheticScene scene;
    scene.spec = spec;
    const std::uint64_t seed = spec.texture_seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    const Vector3d h = 0.5 * spec.room;
    const Vector3d X = Vector3d::UnitX(), Y = Vector3d::UnitY(), Z = Vector3d::UnitZ();

    detail::add_sheet(scene.gt, Vector3d(-h.x(), -h.y(), -h.z()), X, Y, spec.room.x(), spec.room.y(), spec.spacing, seed, 0);
    detail::add_sheet(scene.gt, Vector3d(-h.x(), -h.y(), h.z()), X, Y, spec.room.x(), spec.room.y(), spec.spacing, seed, 1);
    detail::add_sheet(scene.gt, Vector3d(-h.x(), -h.y(), -h.z()), Z, Y, spec.room.z(), spec.room.y(), spec.spacing, seed, 2);
    detail::add_sheet(scene.gt, Vector3d(h.x(), -h.y(), -h.z()), Z, Y, spec.room.z(), spec.room.y(), spec.spacing, seed, 3);
    detail::add_sheet(scene.gt, Vector3d(-h.x(), -h.y(), -h.z()), X, Z, spec.room.x(), spec.room.z(), spec.spacing, seed, 4);
    detail::add_sheet(scene.gt, Vector3d(-h.x(), h.y(), -h.z()), X, Z, spec.room.x(), spec.room.z(), spec.spacing, seed, 5);

    // occluders stand on the floor between the centre and the walls, at diagonal azimuths
    const double diag[4] = {45.0, 225.0, 135.0, 315.0};
    for (int k = 0; k < spec.occluders; ++k) {
        const double az = (diag[k] + 8.0 * jitter(rng)) * M_PI / 180.0;
        const double r = 0.55 * std::min(h.x(), h.z()) * (1.0 + 0.1 * jitter(rng));
        const Vector3d c(r * std::cos(az), 0.0, r * std::sin(az));
        const Vector3d half(0.2 + 0.05 * jitter(rng), 0.0, 0.2 + 0.05 * jitter(rng));
        Box b;
        b.lo = Vector3d(c.x() - half.x(), -h.y(), c.z() - half.z());
        b.hi = Vector3d(c.x() + half.x(), -h.y() + 0.55 * spec.room.y(), c.z() + half.z());
        scene.boxes.push_back(b);
        detail::add_box(scene.gt, b, spec.spacing, seed, 10 + 5 * k);
    }

    Rasterizer r(raster);
    auto make_view = [&](const Camera& cam) {
        ViewRecord v;
        v.camera = cam;
        v.image = r.render(scene.gt, cam).color;
        return v;
    };

    // inside-out inputs: near the centre, evenly spaced azimuths, slightly pitched down
    const double offset = 10.0 * jitter(rng);
    for (int i = 0; i < spec.inputs; ++i) {
        const double az = (offset + 360.0 * i / spec.inputs) * M_PI / 180.0;
        const Vector3d dir(std::cos(az), -0.12, std::sin(az));
        const Vector3d eye = 0.15 * Vector3d(std::cos(az), 0.0, std::sin(az));
        scene.inputs.push_back(make_view(scene_camera(spec, eye, eye + dir)));
    }

    // eval views: ceiling (out of view), floor near the cameras, behind an occluder, and two
    // views between input azimuths from displaced positions
    std::vector<Camera> evals;
    evals.push_back(scene_camera(spec, Vector3d(0.1, 0.0, 0.2), Vector3d(0.6, h.y(), 0.9)));
    evals.push_back(scene_camera(spec, Vector3d(-0.2, 0.3, 0.1), Vector3d(-1.0, -h.y(), -0.6)));
    if (!scene.boxes.empty()) {
        const Box& b = scene.boxes.front();
        const Vector3d c = 0.5 * (b.lo + b.hi);
        const Vector3d out_dir = Vector3d(c.x(), 0.0, c.z()).normalized();
        const Vector3d side = Vector3d(-out_dir.z(), 0.0, out_dir.x());
        const Vector3d eye = c + 0.9 * side + Vector3d(0.0, 0.2, 0.0) + 0.3 * out_dir;
        evals.push_back(scene_camera(spec, eye, c + 0.6 * out_dir - 0.9 * side + Vector3d(0.0, -0.3, 0.0)));
    } else {
        evals.push_back(scene_camera(spec, Vector3d(0.3, -0.2, -0.3), Vector3d(1.5, -0.8, -1.2)));
    }
    const double mid = (offset + 180.0 / spec.inputs) * M_PI / 180.0;
    evals.push_back(scene_camera(spec, Vector3d(0.3, 0.1, -0.2), Vector3d(0.3 + std::cos(mid), 0.0, -0.2 + std::sin(mid))));
    const double mid2 = mid + M_PI;
    evals.push_back(scene_camera(spec, Vector3d(-0.3, -0.1, 0.3), Vector3d(-0.3 + std::cos(mid2), 0.1, 0.3 + std::sin(mid2))));

    for (const auto& cam : evals) scene.eval_views.push_back(make_view(cam));
    scene.eval_masks.resize(scene.eval_views.size());
    parallel_for(scene.eval_views.size(), [&](std::size_t k) {
        scene.eval_masks[k] = observability_mask(scene, scene.eval_views[k].camera);
    });

    // initial cloud from surface points visible in the inputs
    std::vector<Vector3d> pts, cols;
    std::size_t counter = 0;
    for (const auto& p : scene.gt.primitives) {
        bool seen = false;
        for (const auto& v : scene.inputs)
            if (point_visible(scene, v.camera, p.center)) {
                seen = true;
                break;
            }
        if (!seen) continue;
        if (counter++ % static_cast<std::size_t>(std::max(1, spec.init_stride)) != 0) continue;
        pts.push_back(p.center);
        cols.push_back(p.color);
    }
    require(!pts.empty(), "synthesize_scene: no surface point is visible from the inputs");
    scene.init_cloud = build_cloud_from_points(pts, cols, spec.init_jitter, seed + 17);
    return scene;
}

// ---------------------------------------------------------------------------------------

struct SurrogateConfig {
    Vector3d delta = Vector3d(0.2, 0.2, 0.2);       // colour shift of the second variant
    double patch_fraction = 0.25;                    // side of the hallucinated square / image side
    Vector3d patch_color = Vector3d(0.9, 0.1, 0.8);
    double sigma_c = 0.05;
    bool include_shift = true;
    bool include_patch = true;
};

/// Per-frame three-way mixture: the ground-truth render (component 0), the render shifted by
/// delta, and the render with a synthetic patch in its centre.
inline FrameMixtureModel build_surrogate_model(const SyntheticScene& scene, const std::vector<Camera>& poses,
                                               const SurrogateConfig& cfg = {}, const RasterConfig& raster = {}) {
    require(!poses.empty(), "surrogate model needs at least one pose");
    Rasterizer r(raster);
    std::vector<std::vector<Image>> means;
    int variants = 1 + (cfg.include_shift ? 1 : 0) + (cfg.include_patch ? 1 : 0);
    for (const auto& cam : poses) {
        require(cam.width == scene.spec.resolution && cam.height == scene.spec.resolution,
                "surrogate pose resolution must match the scene");
        const Image gt = r.render(scene.gt, cam).color;
        std::vector<Image> frame{gt};
        if (cfg.include_shift) {
            Image s = gt;
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x)
                    for (int c = 0; c < 3; ++c) s.at(x, y, c) += cfg.delta[c];
            frame.push_back(std::move(s));
        }
        if (cfg.include_patch) {
            Image p = gt;
            const int side = std::max(1, static_cast<int>(std::round(cfg.patch_fraction * p.width)));
            const int x0 = (p.width - side) / 2, y0 = (p.height - side) / 2;
            for (int y = y0; y < y0 + side; ++y)
                for (int x = x0; x < x0 + side; ++x)
                    for (int c = 0; c < 3; ++c) p.at(x, y, c) = cfg.patch_color[c];
            frame.push_back(std::move(p));
        }
        means.push_back(std::move(frame));
    }
    return FrameMixtureModel(std::move(means), std::vector<double>(variants, 1.0 / variants), cfg.sigma_c);
}

/// Fraction of frames whose final sample is assigned (highest responsibility) to component 0.
inline double grounded_selection_rate(const FrameMixtureModel& model, const Latent& x0) {
    const auto resp = model.responsibilities(x0, 1.0);
    int hits = 0;
    for (const auto& r : resp)
        if (std::max_element(r.begin(), r.end()) - r.begin() == 0) ++hits;
    return static_cast<double>(hits) / resp.size();
}

}  // namespace splatguide
