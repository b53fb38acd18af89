#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/image.hpp"
#include "splatguide/parallel.hpp"
#include "splatguide/scene.hpp"

namespace splatguide {

using Eigen::Matrix2d;

struct RasterConfig {
    int tile_size = 16;
    double low_pass = 0.3;                       // pixels^2 added to the projected covariance
    double max_sigma = 0.999;                    // per-Gaussian blend weight clamp
    double min_sigma = 1.0 / 255.0;              // weaker contributions are skipped
    double termination_transmittance = 1e-4;     // stop once T drops below; <= 0 disables
    double near_plane = 0.01;
    double guard_band = 1.3;                     // cull centres beyond this multiple of the half field of view
    Vector3d background = Vector3d::Zero();
    unsigned threads = 0;
};

/// Screen-space footprint of one primitive.
struct Gaussian2D {
    Vector2d mean2d = Vector2d::Zero();
    Matrix2d cov2d = Matrix2d::Identity();  // includes the low-pass term
    Vector3d conic = Vector3d::Zero();      // (A, B, C) of the inverse covariance
    double depth = 0.0;
    std::size_t parent = 0;
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;  // pixel bounding box of the support
};

struct RenderOutput {
    Image color;          // H x W x 3
    Image transmittance;  // H x W x 1, accumulated opacity
    Image depth;          // H x W x 1, alpha-blended camera z
    std::vector<int> contributors;
};

struct PrimitiveGradient {
    Vector3d center = Vector3d::Zero();
    Vector3d scale = Vector3d::Zero();
    Vector4d rotation = Vector4d::Zero();  // (w, x, y, z)
    double opacity = 0.0;
    Vector3d color = Vector3d::Zero();
    Vector2d mean2d = Vector2d::Zero();    // screen-space, for densification statistics
};

using CloudGradient = std::vector<PrimitiveGradient>;

namespace detail {

inline double support_radius_sigmas(double opacity, const RasterConfig& cfg) {
    // sigma_i = alpha * G >= min_sigma  <=>  d^T conic d <= 2 ln(alpha / min_sigma)
    double k2 = 9.0;
    if (cfg.min_sigma > 0.0 && opacity > cfg.min_sigma) k2 = std::max(k2, 2.0 * std::log(opacity / cfg.min_sigma));
    if (cfg.min_sigma <= 0.0) k2 = std::numeric_limits<double>::infinity();
    return std::sqrt(k2);
}

struct ProjectionCache {
    Vector3d cam_point;  // camera-space centre
    Matrix3d sigma;      // world covariance
    Matrix2d cov_raw;    // J W Sigma W^T J^T before low-pass
};

inline std::optional<Gaussian2D> project(const GaussianPrimitive& p, std::size_t parent, const Camera& cam,
                                         const RasterConfig& cfg, ProjectionCache* cache = nullptr) {
    const Vector3d pc = cam.to_camera(p.center);
    const double z = pc.z();
    if (z <= cfg.near_plane) return std::nullopt;
    if (cfg.guard_band > 0.0) {
        const double lim_x = cfg.guard_band * std::max(cam.cx + 0.5, cam.width - 0.5 - cam.cx) / cam.fx;
        const double lim_y = cfg.guard_band * std::max(cam.cy + 0.5, cam.height - 0.5 - cam.cy) / cam.fy;
        if (std::abs(pc.x() / z) > lim_x || std::abs(pc.y() / z) > lim_y) return std::nullopt;
    }

    Gaussian2D g;
    g.parent = parent;
    g.depth = z;
    g.mean2d = Vector2d(cam.fx * pc.x() / z + cam.cx, cam.fy * pc.y() / z + cam.cy);

    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0.0, -cam.fx * pc.x() / (z * z), 0.0, cam.fy / z, -cam.fy * pc.y() / (z * z);
    const Matrix3d r = rotation_matrix(p.rotation);
    const Matrix3d m = r * p.scale.asDiagonal();
    const Matrix3d sigma = m * m.transpose();
    const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;
    Matrix2d cov = t * sigma * t.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    const Matrix2d cov_raw = cov;
    cov(0, 0) += cfg.low_pass;
    cov(1, 1) += cfg.low_pass;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0)) return std::nullopt;
    g.cov2d = cov;
    g.conic = Vector3d(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);

    if (cfg.min_sigma > 0.0 && p.opacity < cfg.min_sigma) return std::nullopt;
    const double k = support_radius_sigmas(p.opacity, cfg);
    if (std::isfinite(k)) {
        const double ex = k * std::sqrt(cov(0, 0));
        const double ey = k * std::sqrt(cov(1, 1));
        const double lo_x = g.mean2d.x() - ex, hi_x = g.mean2d.x() + ex;
        const double lo_y = g.mean2d.y() - ey, hi_y = g.mean2d.y() + ey;
        if (hi_x < 0.0 || lo_x > cam.width - 1.0 || hi_y < 0.0 || lo_y > cam.height - 1.0) return std::nullopt;
        g.x_min = std::max(0, static_cast<int>(std::ceil(lo_x)));
        g.x_max = std::min(cam.width - 1, static_cast<int>(std::floor(hi_x)));
        g.y_min = std::max(0, static_cast<int>(std::ceil(lo_y)));
        g.y_max = std::min(cam.height - 1, static_cast<int>(std::floor(hi_y)));
        if (g.x_min > g.x_max || g.y_min > g.y_max) return std::nullopt;
    } else {
        g.x_min = 0;
        g.x_max = cam.width - 1;
        g.y_min = 0;
        g.y_max = cam.height - 1;
    }
    if (cache) *cache = ProjectionCache{pc, sigma, cov_raw};
    return g;
}

struct SplatInput {
    Gaussian2D g;
    double opacity;
    Vector3d color;
};

// Hot-loop copy of a splat's footprint, stored contiguously per tile.
struct PackedSplat {
    double mx, my, ca, cb, cc, opacity;
    double power_floor;  // below this exponent alpha * G is certainly under min_sigma
    int x_min, x_max, y_min, y_max;
};

inline PackedSplat pack(const SplatInput& s) {
    const double floor = s.opacity > 0.0 ? std::log(1.0 / 255.0 / s.opacity) - 1e-6 : 0.0;
    return {s.g.mean2d.x(), s.g.mean2d.y(), s.g.conic.x(), s.g.conic.y(), s.g.conic.z(), s.opacity,
            floor, s.g.x_min, s.g.x_max, s.g.y_min, s.g.y_max};
}

// Evaluates sigma_i = min(max_sigma, alpha_i * G_i) at pixel (px, py); returns 0 when skipped.
inline double blend_weight(const PackedSplat& s, double px, double py, const RasterConfig& cfg, double* gauss = nullptr) {
    const double dx = px - s.mx;
    const double dy = py - s.my;
    const double power = -0.5 * (s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy);
    if (power > 0.0) return 0.0;
    if (cfg.min_sigma >= 1.0 / 255.0 && power < s.power_floor) return 0.0;
    const double gval = std::exp(power);
    const double sigma = std::min(cfg.max_sigma, s.opacity * gval);
    if (sigma < cfg.min_sigma || sigma <= 0.0) return 0.0;
    if (gauss) *gauss = gval;
    return sigma;
}

inline double blend_weight(const SplatInput& s, double px, double py, const RasterConfig& cfg, double* gauss = nullptr) {
    return blend_weight(pack(s), px, py, cfg, gauss);
}

// Front-to-back composite of `n` depth-ordered splats at one pixel; visit(local index, sigma,
// gaussian value, transmittance in front).
template <typename Visit>
inline void composite_pixel(const PackedSplat* splats, std::size_t n, int px, int py, const RasterConfig& cfg,
                            Visit&& visit) {
    double transmittance = 1.0;
    for (std::size_t local = 0; local < n; ++local) {
        const PackedSplat& s = splats[local];
        if (px < s.x_min || px > s.x_max || py < s.y_min || py > s.y_max) continue;
        double gval = 0.0;
        const double sigma = blend_weight(s, px, py, cfg, &gval);
        if (sigma == 0.0) continue;
        visit(local, sigma, gval, transmittance);
        transmittance *= (1.0 - sigma);
        if (cfg.termination_transmittance > 0.0 && transmittance < cfg.termination_transmittance) break;
    }
}

}  // namespace detail

/// EWA projection of one primitive; nullopt when behind the near plane or when its support
/// ellipse misses the image.
inline std::optional<Gaussian2D> project_gaussian(const GaussianPrimitive& p, const Camera& cam,
                                                  const RasterConfig& cfg = {}) {
    return detail::project(p, 0, cam, cfg);
}

/// Tile-based splatting renderer. `render` keeps the projected state so that `backward`
/// can propagate an image-space gradient without re-projecting.
class Rasterizer {
public:
    explicit Rasterizer(RasterConfig cfg = {}) : cfg_(cfg) {}

    const RasterConfig& config() const { return cfg_; }

    RenderOutput render(const GaussianCloud& cloud, const Camera& cam) {
        prepare(cloud, cam);
        RenderOutput out = blank_output();
        const int tiles_x = (cam_.width + cfg_.tile_size - 1) / cfg_.tile_size;
        parallel_for(tile_lists_.size(), [&](std::size_t tile) {
            const int tx = static_cast<int>(tile) % tiles_x;
            const int ty = static_cast<int>(tile) / tiles_x;
            const auto& list = tile_lists_[tile];
            const auto& packed = tile_packed_[tile];
            for (int py = ty * cfg_.tile_size; py < std::min(cam_.height, (ty + 1) * cfg_.tile_size); ++py)
                for (int px = tx * cfg_.tile_size; px < std::min(cam_.width, (tx + 1) * cfg_.tile_size); ++px)
                    shade(out, list, packed, px, py);
        }, cfg_.threads);
        return out;
    }

    /// Naive reference: every pixel against the full depth-sorted list.
    RenderOutput render_reference(const GaussianCloud& cloud, const Camera& cam) {
        prepare(cloud, cam);
        RenderOutput out = blank_output();
        std::vector<std::size_t> all(splats_.size());
        std::iota(all.begin(), all.end(), 0);
        std::vector<detail::PackedSplat> packed;
        for (const auto& sp : splats_) packed.push_back(detail::pack(sp));
        for (int py = 0; py < cam_.height; ++py)
            for (int px = 0; px < cam_.width; ++px) shade(out, all, packed, px, py);
        return out;
    }

    /// Gradient of sum(dL_dC * C) with respect to every primitive attribute of the cloud
    /// passed to the last `render` call.
    CloudGradient backward(const Image& dL_dC) const {
        require(dL_dC.width == cam_.width && dL_dC.height == cam_.height && dL_dC.channels == 3,
                "backward: upstream gradient must match the rendered image");
        CloudGradient grads(cloud_size_);
        const std::size_t n = splats_.size();
        // per-splat screen-space gradients: mean2d (2), conic (3), opacity, color (3)
        struct Local {
            double mean[2] = {0, 0};
            double conic[3] = {0, 0, 0};
            double opacity = 0;
            double color[3] = {0, 0, 0};
        };
        std::vector<std::vector<Local>> tile_grads(tile_lists_.size());
        const int tiles_x = (cam_.width + cfg_.tile_size - 1) / cfg_.tile_size;

        parallel_for(tile_lists_.size(), [&](std::size_t tile) {
            const auto& list = tile_lists_[tile];
            const auto& packed = tile_packed_[tile];
            auto& local = tile_grads[tile];
            local.assign(list.size(), Local{});
            if (list.empty()) return;
            const int tx = static_cast<int>(tile) % tiles_x;
            const int ty = static_cast<int>(tile) / tiles_x;
            struct Hit {
                std::size_t local;
                double sigma, gauss, transmittance;
            };
            std::vector<Hit> hits;
            for (int py = ty * cfg_.tile_size; py < std::min(cam_.height, (ty + 1) * cfg_.tile_size); ++py) {
                for (int px = tx * cfg_.tile_size; px < std::min(cam_.width, (tx + 1) * cfg_.tile_size); ++px) {
                    hits.clear();
                    double t_final = 1.0;
                    detail::composite_pixel(packed.data(), packed.size(), px, py, cfg_,
                                            [&](std::size_t l, double sigma, double gauss, double t) {
                                                hits.push_back({l, sigma, gauss, t});
                                                t_final = t * (1.0 - sigma);
                                            });
                    if (hits.empty()) continue;
                    const Vector3d up(dL_dC.at(px, py, 0), dL_dC.at(px, py, 1), dL_dC.at(px, py, 2));
                    if (up.isZero()) continue;
                    // colour seen behind splat i, normalised by the transmittance in front of it
                    Vector3d behind = cfg_.background;
                    (void)t_final;
                    for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
                        const detail::SplatInput& s = splats_[list[it->local]];
                        Local& acc = local[it->local];
                        for (int c = 0; c < 3; ++c) acc.color[c] += up[c] * it->sigma * it->transmittance;
                        const double dsigma = it->transmittance * up.dot(s.color - behind);
                        behind = it->sigma * s.color + (1.0 - it->sigma) * behind;
                        if (s.opacity * it->gauss >= cfg_.max_sigma) continue;  // clamped: flat
                        acc.opacity += dsigma * it->gauss;
                        const double dpower = dsigma * s.opacity * it->gauss;
                        const double dx = px - s.g.mean2d.x();
                        const double dy = py - s.g.mean2d.y();
                        const Vector3d& cn = s.g.conic;
                        acc.mean[0] += dpower * (cn.x() * dx + cn.y() * dy);
                        acc.mean[1] += dpower * (cn.y() * dx + cn.z() * dy);
                        acc.conic[0] += dpower * (-0.5 * dx * dx);
                        acc.conic[1] += dpower * (-dx * dy);
                        acc.conic[2] += dpower * (-0.5 * dy * dy);
                    }
                }
            }
        }, cfg_.threads);

        // deterministic reduction in tile order
        std::vector<Local> total(n);
        for (std::size_t tile = 0; tile < tile_lists_.size(); ++tile) {
            const auto& list = tile_lists_[tile];
            for (std::size_t l = 0; l < list.size(); ++l) {
                const Local& a = tile_grads[tile][l];
                Local& b = total[list[l]];
                for (int k = 0; k < 2; ++k) b.mean[k] += a.mean[k];
                for (int k = 0; k < 3; ++k) b.conic[k] += a.conic[k];
                b.opacity += a.opacity;
                for (int k = 0; k < 3; ++k) b.color[k] += a.color[k];
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const Local& g = total[i];
            PrimitiveGradient& out = grads[splats_[i].g.parent];
            out.color = Vector3d(g.color[0], g.color[1], g.color[2]);
            out.opacity = g.opacity;
            out.mean2d = Vector2d(g.mean[0], g.mean[1]);
            backprop_projection(i, Vector2d(g.mean[0], g.mean[1]), Vector3d(g.conic[0], g.conic[1], g.conic[2]), out);
        }
        return grads;
    }

    const std::vector<std::vector<std::size_t>>& tile_lists() const { return tile_lists_; }
    std::size_t visible_count() const { return splats_.size(); }
    /// Cloud indices of the primitives that survived projection in the last render.
    std::vector<std::size_t> visible_parents() const {
        std::vector<std::size_t> out;
        out.reserve(splats_.size());
        for (const auto& s : splats_) out.push_back(s.g.parent);
        return out;
    }

private:
    RasterConfig cfg_;
    Camera cam_;
    std::size_t cloud_size_ = 0;
    std::vector<detail::SplatInput> splats_;
    std::vector<detail::ProjectionCache> caches_;
    std::vector<Vector3d> scales_;
    std::vector<Quaterniond> rotations_;
    std::vector<std::vector<std::size_t>> tile_lists_;
    std::vector<std::vector<detail::PackedSplat>> tile_packed_;

    RenderOutput blank_output() const {
        RenderOutput out;
        out.color = Image(cam_.width, cam_.height, 3);
        out.transmittance = Image(cam_.width, cam_.height, 1);
        out.depth = Image(cam_.width, cam_.height, 1);
        out.contributors.assign(static_cast<std::size_t>(cam_.width) * cam_.height, 0);
        return out;
    }

    void prepare(const GaussianCloud& cloud, const Camera& cam) {
        require(cfg_.tile_size > 0, "tile size must be positive");
        cam_ = cam;
        cloud_size_ = cloud.size();
        struct Entry {
            detail::SplatInput s;
            detail::ProjectionCache c;
        };
        std::vector<Entry> entries;
        entries.reserve(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const auto& p = cloud.primitives[i];
            detail::ProjectionCache cache;
            if (auto g = detail::project(p, i, cam, cfg_, &cache))
                entries.push_back({detail::SplatInput{*g, p.opacity, p.color}, cache});
        }
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.s.g.depth < b.s.g.depth; });
        splats_.clear();
        caches_.clear();
        scales_.clear();
        rotations_.clear();
        for (const auto& e : entries) {
            splats_.push_back(e.s);
            caches_.push_back(e.c);
            scales_.push_back(cloud.primitives[e.s.g.parent].scale);
            rotations_.push_back(cloud.primitives[e.s.g.parent].rotation);
        }

        const int ts = cfg_.tile_size;
        const int tiles_x = (cam.width + ts - 1) / ts;
        const int tiles_y = (cam.height + ts - 1) / ts;
        tile_lists_.assign(static_cast<std::size_t>(tiles_x) * tiles_y, {});
        for (std::size_t i = 0; i < splats_.size(); ++i) {
            const auto& g = splats_[i].g;
            for (int ty = g.y_min / ts; ty <= g.y_max / ts; ++ty)
                for (int tx = g.x_min / ts; tx <= g.x_max / ts; ++tx)
                    tile_lists_[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
        }
        tile_packed_.assign(tile_lists_.size(), {});
        for (std::size_t t = 0; t < tile_lists_.size(); ++t) {
            tile_packed_[t].reserve(tile_lists_[t].size());
            for (std::size_t i : tile_lists_[t]) tile_packed_[t].push_back(detail::pack(splats_[i]));
        }
    }

    void shade(RenderOutput& out, const std::vector<std::size_t>& list, const std::vector<detail::PackedSplat>& packed,
               int px, int py) const {
        Vector3d color = Vector3d::Zero();
        double opacity = 0.0, depth = 0.0, t_final = 1.0;
        int count = 0;
        detail::composite_pixel(packed.data(), packed.size(), px, py, cfg_, [&](std::size_t l, double sigma, double, double t) {
            const auto& s = splats_[list[l]];
            color += s.color * (sigma * t);
            opacity += sigma * t;
            depth += s.g.depth * (sigma * t);
            t_final = t * (1.0 - sigma);
            ++count;
        });
        color += t_final * cfg_.background;
        for (int c = 0; c < 3; ++c) out.color.at(px, py, c) = color[c];
        out.transmittance.at(px, py) = opacity;
        out.depth.at(px, py) = depth;
        out.contributors[static_cast<std::size_t>(py) * cam_.width + px] = count;
    }

    // Chain rule from (mean2d, conic) to (centre, scale, rotation) of splat i.
    void backprop_projection(std::size_t i, const Vector2d& d_mean, const Vector3d& d_conic,
                             PrimitiveGradient& out) const {
        const auto& cache = caches_[i];
        const auto& g = splats_[i].g;
        const double x = cache.cam_point.x(), y = cache.cam_point.y(), z = cache.cam_point.z();
        const double fx = cam_.fx, fy = cam_.fy;

        // conic = inverse(cov); cov = (a, b, c)
        const double a = g.cov2d(0, 0), b = g.cov2d(0, 1), c = g.cov2d(1, 1);
        const double det = a * c - b * b;
        const double inv_det2 = 1.0 / (det * det);
        const double gA = d_conic.x(), gB = d_conic.y(), gC = d_conic.z();
        const double d_a = inv_det2 * (-c * c * gA + b * c * gB - b * b * gC);
        const double d_b = inv_det2 * (2.0 * b * c * gA - (a * c + b * b) * gB + 2.0 * a * b * gC);
        const double d_c = inv_det2 * (-b * b * gA + a * b * gB - a * a * gC);
        Matrix2d g_cov;
        g_cov << d_a, 0.5 * d_b, 0.5 * d_b, d_c;

        Eigen::Matrix<double, 2, 3> jac;
        jac << fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z);
        const Eigen::Matrix<double, 2, 3> t = jac * cam_.rotation;
        const Matrix3d g_sigma = t.transpose() * g_cov * t;
        const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_cov * t * cache.sigma;
        const Eigen::Matrix<double, 2, 3> g_j = g_t * cam_.rotation.transpose();

        Vector3d g_p = Vector3d::Zero();
        g_p.x() += g_j(0, 2) * (-fx / (z * z));
        g_p.y() += g_j(1, 2) * (-fy / (z * z));
        g_p.z() += g_j(0, 0) * (-fx / (z * z)) + g_j(0, 2) * (2.0 * fx * x / (z * z * z)) +
                   g_j(1, 1) * (-fy / (z * z)) + g_j(1, 2) * (2.0 * fy * y / (z * z * z));
        g_p.x() += d_mean.x() * fx / z;
        g_p.y() += d_mean.y() * fy / z;
        g_p.z() += -d_mean.x() * fx * x / (z * z) - d_mean.y() * fy * y / (z * z);
        out.center = cam_.rotation.transpose() * g_p;

        // Sigma = M M^T, M = R diag(s)
        const Quaterniond& q_raw = rotations_[i];
        const Quaterniond qn = q_raw.normalized();
        const Matrix3d r = qn.toRotationMatrix();
        const Vector3d& s = scales_[i];
        const Matrix3d m = r * s.asDiagonal();
        const Matrix3d g_m = 2.0 * g_sigma * m;
        Matrix3d g_r;
        for (int k = 0; k < 3; ++k) {
            out.scale[k] = g_m.col(k).dot(r.col(k));
            g_r.col(k) = g_m.col(k) * s[k];
        }
        const double w = qn.w(), qx = qn.x(), qy = qn.y(), qz = qn.z();
        const Matrix3d& G = g_r;
        Vector4d g_qn;
        g_qn[0] = 2.0 * (-qz * G(0, 1) + qy * G(0, 2) + qz * G(1, 0) - qx * G(1, 2) - qy * G(2, 0) + qx * G(2, 1));
        g_qn[1] = 2.0 * (qy * G(0, 1) + qz * G(0, 2) + qy * G(1, 0) - 2.0 * qx * G(1, 1) - w * G(1, 2) +
                         qz * G(2, 0) + w * G(2, 1) - 2.0 * qx * G(2, 2));
        g_qn[2] = 2.0 * (-2.0 * qy * G(0, 0) + qx * G(0, 1) + w * G(0, 2) + qx * G(1, 0) + qz * G(1, 2) -
                         w * G(2, 0) + qz * G(2, 1) - 2.0 * qy * G(2, 2));
        g_qn[3] = 2.0 * (-2.0 * qz * G(0, 0) - w * G(0, 1) + qx * G(0, 2) + w * G(1, 0) - 2.0 * qz * G(1, 1) +
                         qy * G(1, 2) + qx * G(2, 0) + qy * G(2, 1));
        const Vector4d qv(w, qx, qy, qz);
        out.rotation = (g_qn - qv * qv.dot(g_qn)) / q_raw.norm();
    }
};

inline RenderOutput rasterize(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg = {}) {
    Rasterizer r(cfg);
    return r.render(cloud, cam);
}

inline RenderOutput rasterize_reference(const GaussianCloud& cloud, const Camera& cam, const RasterConfig& cfg = {}) {
    Rasterizer r(cfg);
    return r.render_reference(cloud, cam);
}

inline CloudGradient rasterize_backward(const GaussianCloud& cloud, const Camera& cam, const Image& dL_dC,
                                        const RasterConfig& cfg = {}) {
    Rasterizer r(cfg);
    r.render(cloud, cam);
    return r.backward(dL_dC);
}

/// M = (O < eta_mask): 1 where the model leaves a hole.
inline Image hole_mask(const Image& transmittance, double eta_mask) {
    require(eta_mask > 0.0 && eta_mask <= 1.0, "eta_mask must lie in (0, 1]");
    require(transmittance.channels == 1, "transmittance map must have one channel");
    Image m(transmittance.width, transmittance.height, 1);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = transmittance.data[i] < eta_mask ? 1.0 : 0.0;
    return m;
}

/// Complement of hole_mask: 1 where the rendering is covered by the model.
inline Image coverage_mask(const Image& transmittance, double eta_mask) {
    Image m = hole_mask(transmittance, eta_mask);
    for (double& v : m.data) v = 1.0 - v;
    return m;
}

inline double mask_fraction(const Image& mask) {
    if (mask.data.empty()) return 0.0;
    double s = 0.0;
    for (double v : mask.data) s += v;
    return s / static_cast<double>(mask.size());
}

}  // namespace splatguide
