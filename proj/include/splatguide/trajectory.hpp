#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/scene.hpp"

namespace splatguide {

struct CandidatePose {
    Camera camera;
    int source = 0;
    int index = 0;          // position in the sampled grid, used for tie-breaking
    double polar_deg = 0.0;
    double azimuth_deg = 0.0;
    double radius = 0.0;    // distance to the look-at point
    double hole_fraction = 0.0;
};

struct TrajectoryConfig {
    std::vector<double> polar_deg{-30.0, -15.0, 0.0, 15.0, 30.0};
    std::vector<double> azimuth_deg{-30.0, -15.0, 0.0, 15.0, 30.0};
    std::vector<double> radius_factors{1.0, 1.0 / 3.0, 1.0 / 10.0};
    double max_hole_fraction = 0.10;
    int top_k = 6;
    int length = 25;
    double eta_mask = 0.9;
    RasterConfig raster;
};

struct Trajectory {
    std::vector<Camera> poses;
    int source = 0;
    int candidate = 0;
};

struct TrajectoryPool {
    std::vector<Trajectory> trajectories;

    std::size_t size() const { return trajectories.size(); }
    bool empty() const { return trajectories.empty(); }
};

inline double deg2rad(double d) { return d * M_PI / 180.0; }

/// Candidate poses orbiting the point at `center_depth` along the input's optical axis. Each
/// candidate sits at radius factor * center_depth from that point, rotated by (polar, azimuth)
/// in the input camera frame, and looks back at it.
inline std::vector<CandidatePose> sample_candidates(const Camera& input, double center_depth, int source = 0,
                                                    const TrajectoryConfig& cfg = {}) {
    require(center_depth > 0.0 && std::isfinite(center_depth), "sample_candidates: center depth must be positive");
    const Vector3d eye = input.center();
    const Vector3d target = eye + center_depth * input.forward();
    const Matrix3d cam_to_world = input.rotation.transpose();
    const Vector3d up = -input.rotation.row(1).transpose();

    std::vector<CandidatePose> out;
    int index = 0;
    for (double polar : cfg.polar_deg)
        for (double azimuth : cfg.azimuth_deg)
            for (double factor : cfg.radius_factors) {
                // direction from the look-at point back towards the camera, in camera coordinates
                const Matrix3d rot = Eigen::AngleAxisd(deg2rad(azimuth), Vector3d::UnitY()).toRotationMatrix() *
                                     Eigen::AngleAxisd(deg2rad(polar), Vector3d::UnitX()).toRotationMatrix();
                const Vector3d dir = cam_to_world * (rot * Vector3d(0.0, 0.0, -1.0));
                const double radius = factor * center_depth;
                CandidatePose c;
                c.camera = input;
                const Vector3d pos = target + radius * dir;
                c.camera.set_pose(Camera::look_at_rotation(pos, target, up), pos);
                c.source = source;
                c.index = index++;
                c.polar_deg = polar;
                c.azimuth_deg = azimuth;
                c.radius = radius;
                out.push_back(c);
            }
    return out;
}

/// Drops candidates with no holes or with holes above max_hole_fraction and keeps the top_k
/// largest hole fractions (ties by candidate index).
inline std::vector<CandidatePose> rank_candidates(const std::vector<CandidatePose>& cands, double max_hole_fraction = 0.10,
                                                  int top_k = 6) {
    require(max_hole_fraction > 0.0 && max_hole_fraction <= 1.0, "max hole fraction must lie in (0, 1]");
    require(top_k >= 0, "top_k must be non-negative");
    std::vector<CandidatePose> kept;
    for (const auto& c : cands)
        if (c.hole_fraction > 0.0 && c.hole_fraction <= max_hole_fraction) kept.push_back(c);
    std::stable_sort(kept.begin(), kept.end(), [](const CandidatePose& a, const CandidatePose& b) {
        if (a.hole_fraction != b.hole_fraction) return a.hole_fraction > b.hole_fraction;
        return a.index < b.index;
    });
    if (static_cast<int>(kept.size()) > top_k) kept.resize(static_cast<std::size_t>(top_k));
    return kept;
}

/// Renders every candidate to score its hole fraction, then ranks them.
inline std::vector<CandidatePose> select_candidates(std::vector<CandidatePose> cands, const GaussianCloud& cloud,
                                                    double eta_mask, double max_hole_fraction = 0.10, int top_k = 6,
                                                    const RasterConfig& raster = {}) {
    Rasterizer r(raster);
    for (auto& c : cands) {
        const auto out = r.render(cloud, c.camera);
        c.hole_fraction = mask_fraction(hole_mask(out.transmittance, eta_mask));
    }
    return rank_candidates(cands, max_hole_fraction, top_k);
}

/// L poses from a to b: slerp on rotations (shortest arc), linear camera centres, intrinsics
/// from a. The end poses are copied exactly.
inline std::vector<Camera> interpolate_trajectory(const Camera& a, const Camera& b, int length) {
    require(length >= 2, "trajectory length must be at least 2");
    const Quaterniond qa(a.rotation), qb(b.rotation);
    const Vector3d ca = a.center(), cb = b.center();
    std::vector<Camera> poses;
    poses.reserve(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) {
        if (j == 0) {
            poses.push_back(a);
            continue;
        }
        if (j == length - 1) {
            Camera last = b;
            last.fx = a.fx;
            last.fy = a.fy;
            last.cx = a.cx;
            last.cy = a.cy;
            last.width = a.width;
            last.height = a.height;
            poses.push_back(last);
            continue;
        }
        const double s = static_cast<double>(j) / (length - 1);
        Camera c = a;
        const Matrix3d rot = qa.slerp(s, qb).normalized().toRotationMatrix();
        c.set_pose(rot, (1.0 - s) * ca + s * cb);
        poses.push_back(c);
    }
    return poses;
}

/// Depth of the centre pixel, normalised by its accumulated opacity. Falls back to the mean
/// normalised depth of well-covered pixels; returns 0 when nothing is rendered.
inline double center_depth(const RenderOutput& out) {
    const int cx = out.depth.width / 2, cy = out.depth.height / 2;
    const double o = out.transmittance.at(cx, cy);
    if (o >= 0.5) return out.depth.at(cx, cy) / o;
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < out.depth.size(); ++i)
        if (out.transmittance.data[i] >= 0.5) {
            sum += out.depth.data[i] / out.transmittance.data[i];
            ++n;
        }
    return n ? sum / n : 0.0;
}

/// Trajectory pool: for every input view, trajectories from its pose to each selected candidate.
inline TrajectoryPool build_pool(const std::vector<Camera>& inputs, const GaussianCloud& cloud,
                                 const TrajectoryConfig& cfg = {}) {
    TrajectoryPool pool;
    Rasterizer r(cfg.raster);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double depth = center_depth(r.render(cloud, inputs[i]));
        if (!(depth > 0.0)) continue;
        auto cands = sample_candidates(inputs[i], depth, static_cast<int>(i), cfg);
        auto chosen = select_candidates(std::move(cands), cloud, cfg.eta_mask, cfg.max_hole_fraction, cfg.top_k, cfg.raster);
        for (const auto& c : chosen)
            pool.trajectories.push_back({interpolate_trajectory(inputs[i], c.camera, cfg.length), static_cast<int>(i), c.index});
    }
    return pool;
}

inline TrajectoryPool build_pool(const std::vector<ViewRecord>& inputs, const GaussianCloud& cloud,
                                 const TrajectoryConfig& cfg = {}) {
    std::vector<Camera> cams;
    for (const auto& v : inputs) cams.push_back(v.camera);
    return build_pool(cams, cloud, cfg);
}

// ---------------------------------------------------------------------------------------
// Pool manifest: a header with the shared intrinsics, then per trajectory a "# source i c"
// line followed by one "qw qx qy qz tx ty tz" pose per line; trajectories are separated by
// a blank line.

inline void write_pool(std::ostream& os, const TrajectoryPool& pool) {
    const Camera ref = pool.empty() ? Camera{} : pool.trajectories.front().poses.front();
    os << "# splatguide-trajectories v1 " << format_double(ref.fx) << ' ' << format_double(ref.fy) << ' '
       << format_double(ref.cx) << ' ' << format_double(ref.cy) << ' ' << ref.width << ' ' << ref.height << '\n';
    for (std::size_t k = 0; k < pool.trajectories.size(); ++k) {
        const auto& tr = pool.trajectories[k];
        if (k) os << '\n';
        os << "# source " << tr.source << ' ' << tr.candidate << '\n';
        for (const auto& c : tr.poses) {
            const Quaterniond q(c.rotation);
            const double v[7] = {q.w(), q.x(), q.y(), q.z(), c.translation.x(), c.translation.y(), c.translation.z()};
            for (int i = 0; i < 7; ++i) os << (i ? " " : "") << format_double(v[i]);
            os << '\n';
        }
    }
}

inline TrajectoryPool read_pool(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw InvalidInput("empty trajectory manifest");
    std::istringstream hs(line);
    std::string hash, magic, version;
    Camera ref;
    std::string fx, fy, cx, cy;
    if (!(hs >> hash >> magic >> version >> fx >> fy >> cx >> cy >> ref.width >> ref.height) ||
        magic != "splatguide-trajectories" || version != "v1")
        throw InvalidInput("not a splatguide-trajectories v1 manifest");
    ref.fx = parse_double(fx);
    ref.fy = parse_double(fy);
    ref.cx = parse_double(cx);
    ref.cy = parse_double(cy);

    TrajectoryPool pool;
    Trajectory cur;
    bool open = false;
    auto flush = [&] {
        if (open && !cur.poses.empty()) pool.trajectories.push_back(cur);
        cur = Trajectory{};
        open = false;
    };
    while (std::getline(is, line)) {
        if (line.empty()) {
            flush();
            continue;
        }
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string h, tag;
            ls >> h >> tag;
            if (tag == "source") {
                flush();
                ls >> cur.source >> cur.candidate;
                open = true;
            }
            continue;
        }
        open = true;
        double v[7];
        for (double& x : v) {
            std::string tok;
            if (!(ls >> tok)) throw InvalidInput("malformed pose line in trajectory manifest");
            x = parse_double(tok);
        }
        Camera c = ref;
        c.rotation = Quaterniond(v[0], v[1], v[2], v[3]).normalized().toRotationMatrix();
        c.translation = Vector3d(v[4], v[5], v[6]);
        cur.poses.push_back(c);
    }
    flush();
    return pool;
}

}  // namespace splatguide
