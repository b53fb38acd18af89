#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/image.hpp"

namespace splatguide {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One anisotropic Gaussian. Values are held in their natural (constrained) form; the
/// optimizer steps the unconstrained log-scale / logit-opacity views and maps back.
struct GaussianPrimitive {
    Vector3d center = Vector3d::Zero();
    Vector3d scale = Vector3d::Constant(0.01);
    Quaterniond rotation = Quaterniond::Identity();
    double opacity = 0.1;
    Vector3d color = Vector3d::Zero();

    Vector3d log_scale() const { return scale.array().log(); }
    void set_log_scale(const Vector3d& v) { scale = v.array().exp(); }
    double logit_opacity() const { return logit(opacity); }
    void set_logit_opacity(double v) { opacity = sigmoid(v); }

    bool operator==(const GaussianPrimitive& o) const {
        return center == o.center && scale == o.scale && rotation.coeffs() == o.rotation.coeffs() &&
               opacity == o.opacity && color == o.color;
    }
};

/// Per-primitive screen-space gradient statistics used by densification.
struct DensifyStats {
    double grad_norm_sum = 0.0;
    double max_grad_norm = 0.0;
    int count = 0;
};

struct GaussianCloud {
    std::vector<GaussianPrimitive> primitives;
    std::vector<DensifyStats> stats;

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }

    void push_back(const GaussianPrimitive& p) {
        primitives.push_back(p);
        stats.emplace_back();
    }
    void reset_stats() { stats.assign(primitives.size(), DensifyStats{}); }

    bool operator==(const GaussianCloud& o) const { return primitives == o.primitives; }
};

/// Pinhole camera with a world-to-camera rigid transform (x right, y down, z forward).
struct Camera {
    double fx = 100.0;
    double fy = 100.0;
    double cx = 32.0;
    double cy = 32.0;
    int width = 64;
    int height = 64;
    Matrix3d rotation = Matrix3d::Identity();
    Vector3d translation = Vector3d::Zero();

    Vector3d to_camera(const Vector3d& world) const { return rotation * world + translation; }
    Vector3d center() const { return -rotation.transpose() * translation; }
    Vector3d forward() const { return rotation.row(2).transpose(); }

    void validate() const {
        require(width >= 16 && height >= 16, "camera image must be at least 16x16");
        require(fx > 0 && fy > 0, "focal lengths must be positive");
        const double ortho = (rotation * rotation.transpose() - Matrix3d::Identity()).cwiseAbs().maxCoeff();
        require(ortho <= 1e-6 && std::abs(rotation.determinant() - 1.0) <= 1e-6,
                "camera rotation must be orthonormal with det +1");
    }

    void set_pose(const Matrix3d& world_to_cam, const Vector3d& eye) {
        rotation = world_to_cam;
        translation = -world_to_cam * eye;
    }

    static Camera look_at(const Vector3d& eye, const Vector3d& target, const Vector3d& up,
                          double focal, int width, int height) {
        Camera cam;
        cam.fx = cam.fy = focal;
        cam.width = width;
        cam.height = height;
        cam.cx = 0.5 * (width - 1);
        cam.cy = 0.5 * (height - 1);
        cam.set_pose(look_at_rotation(eye, target, up), eye);
        return cam;
    }

    static Matrix3d look_at_rotation(const Vector3d& eye, const Vector3d& target, const Vector3d& up) {
        const Vector3d fwd = (target - eye).normalized();
        Vector3d right = fwd.cross(up);
        if (right.norm() < 1e-9) {
            // looking along the up axis; any perpendicular works
            right = fwd.cross(std::abs(fwd.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitZ());
        }
        right.normalize();
        const Vector3d down = fwd.cross(right);
        Matrix3d r;
        r.row(0) = right.transpose();
        r.row(1) = down.transpose();
        r.row(2) = fwd.transpose();
        return r;
    }

    /// Focal length in pixels for a horizontal field of view in degrees.
    static double focal_from_fov(double fov_deg, int width) {
        return 0.5 * width / std::tan(0.5 * fov_deg * M_PI / 180.0);
    }
};

enum class ViewKind { input, generated };

struct ViewRecord {
    Camera camera;
    Image image;
    ViewKind kind = ViewKind::input;

    void validate() const {
        require(image.width == camera.width && image.height == camera.height && image.channels == 3,
                "view image dimensions must match its camera");
    }
};

/// Rotation matrix of a quaternion given as (w, x, y, z); the quaternion is normalized first.
inline Matrix3d rotation_matrix(const Quaterniond& q) { return q.normalized().toRotationMatrix(); }

/// Sigma = R(q) diag(s^2) R(q)^T.
inline Matrix3d covariance_from_scale_rotation(const Vector3d& s, const Quaterniond& q) {
    require((s.array() > 0.0).all(), "scale must be strictly positive");
    require(std::abs(q.norm() - 1.0) <= 1e-4, "rotation quaternion must be unit length");
    const Matrix3d r = rotation_matrix(q);
    const Matrix3d m = r * s.asDiagonal();
    Matrix3d sigma = m * m.transpose();
    // exact symmetry
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return sigma;
}

namespace detail {

// Mean distance to the (up to) three nearest neighbours, via a uniform hash grid.
inline std::vector<double> mean_neighbor_distance(const std::vector<Vector3d>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> out(n, 0.01);
    if (n < 2) return out;

    Vector3d lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vector3d ext = (hi - lo).cwiseMax(1e-9);
    const std::size_t want = std::min<std::size_t>(3, n - 1);

    // Cell size from the median k-th neighbour distance of a few probe points, which
    // adapts to sheets and lines as well as volumes.
    std::vector<double> probe;
    const std::size_t probes = std::min<std::size_t>(n, 64);
    std::vector<double> d(n);
    for (std::size_t s = 0; s < probes; ++s) {
        const std::size_t i = s * n / probes;
        for (std::size_t j = 0; j < n; ++j) d[j] = (pts[j] - pts[i]).norm();
        std::nth_element(d.begin(), d.begin() + static_cast<long>(want), d.end());
        probe.push_back(d[want]);
    }
    std::nth_element(probe.begin(), probe.begin() + static_cast<long>(probe.size() / 2), probe.end());
    double cell = std::max(probe[probe.size() / 2], ext.maxCoeff() * 1e-6);

    auto key = [&](long i, long j, long k) {
        return (static_cast<std::int64_t>(i) * 73856093) ^ (static_cast<std::int64_t>(j) * 19349663) ^
               (static_cast<std::int64_t>(k) * 83492791);
    };
    auto cell_of = [&](const Vector3d& p) {
        return std::array<long, 3>{static_cast<long>(std::floor((p.x() - lo.x()) / cell)),
                                   static_cast<long>(std::floor((p.y() - lo.y()) / cell)),
                                   static_cast<long>(std::floor((p.z() - lo.z()) / cell))};
    };
    std::unordered_multimap<std::int64_t, std::size_t> grid;
    grid.reserve(n * 2);
    std::vector<std::array<long, 3>> cells(n);
    for (std::size_t i = 0; i < n; ++i) {
        cells[i] = cell_of(pts[i]);
        grid.emplace(key(cells[i][0], cells[i][1], cells[i][2]), i);
    }

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> best;
        std::vector<std::size_t> found;
        for (long r = 1;; ++r) {
            best.clear();
            found.clear();
            for (long a = -r; a <= r; ++a)
                for (long b = -r; b <= r; ++b)
                    for (long c = -r; c <= r; ++c) {
                        auto range = grid.equal_range(key(cells[i][0] + a, cells[i][1] + b, cells[i][2] + c));
                        for (auto it = range.first; it != range.second; ++it) {
                            const std::size_t j = it->second;
                            if (j != i) found.push_back(j);
                        }
                    }
            // hash collisions may alias a point into several probed cells
            std::sort(found.begin(), found.end());
            found.erase(std::unique(found.begin(), found.end()), found.end());
            for (std::size_t j : found) best.push_back((pts[j] - pts[i]).norm());
            std::sort(best.begin(), best.end());
            // neighbours within r*cell are guaranteed complete
            if (best.size() >= want && best[want - 1] <= r * cell) break;
            if (r > 64) break;
        }
        if (best.size() < want) {
            // fall back to brute force for isolated points
            best.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) best.push_back((pts[j] - pts[i]).norm());
            std::sort(best.begin(), best.end());
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < want; ++k) sum += best[k];
        out[i] = std::max(sum / static_cast<double>(want), 1e-7);
    }
    return out;
}

}  // namespace detail

/// One primitive per point: centre jittered by N(0, jitter_sigma^2 I), isotropic scale from
/// the mean nearest-neighbour distance, opacity 0.1, identity rotation.
inline GaussianCloud build_cloud_from_points(const std::vector<Vector3d>& points,
                                             const std::vector<Vector3d>& colors,
                                             double jitter_sigma, std::uint64_t seed) {
    require(!points.empty(), "build_cloud_from_points: empty point list");
    require(colors.size() == points.size(), "build_cloud_from_points: one color per point required");
    require(jitter_sigma >= 0.0, "jitter sigma must be non-negative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector3d> centers(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vector3d noise(normal(rng), normal(rng), normal(rng));
        centers[i] = points[i] + jitter_sigma * noise;
    }
    const auto nn = detail::mean_neighbor_distance(centers);

    GaussianCloud cloud;
    cloud.primitives.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        GaussianPrimitive p;
        p.center = centers[i];
        p.scale = Vector3d::Constant(nn[i]);
        p.rotation = Quaterniond::Identity();
        p.opacity = 0.1;
        p.color = colors[i].cwiseMax(0.0).cwiseMin(1.0);
        cloud.push_back(p);
    }
    return cloud;
}

// ---------------------------------------------------------------------------------------
// Plain-text cloud format:
//   splatguide-cloud v1 <count>
//   mu_x mu_y mu_z s_x s_y s_z q_w q_x q_y q_z alpha r g b
// Values use the shortest decimal form that round-trips exactly.

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& tok) {
    if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw InvalidInput("not a number: '" + tok + "'");
    return v;
}

inline void write_cloud(std::ostream& os, const GaussianCloud& cloud) {
    os << "splatguide-cloud v1 " << cloud.size() << '\n';
    for (const auto& p : cloud.primitives) {
        const double vals[14] = {p.center.x(),   p.center.y(),   p.center.z(),   p.scale.x(),
                                 p.scale.y(),    p.scale.z(),    p.rotation.w(), p.rotation.x(),
                                 p.rotation.y(), p.rotation.z(), p.opacity,      p.color.x(),
                                 p.color.y(),    p.color.z()};
        for (int k = 0; k < 14; ++k) os << (k ? " " : "") << format_double(vals[k]);
        os << '\n';
    }
}

inline GaussianCloud read_cloud(std::istream& is) {
    std::string magic, version;
    std::size_t count = 0;
    if (!(is >> magic >> version >> count) || magic != "splatguide-cloud" || version != "v1")
        throw InvalidInput("not a splatguide-cloud v1 file");
    GaussianCloud cloud;
    cloud.primitives.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double v[14];
        for (double& x : v) {
            std::string tok;
            if (!(is >> tok)) throw InvalidInput("truncated cloud file");
            x = parse_double(tok);
        }
        GaussianPrimitive p;
        p.center = Vector3d(v[0], v[1], v[2]);
        p.scale = Vector3d(v[3], v[4], v[5]);
        p.rotation = Quaterniond(v[6], v[7], v[8], v[9]);
        p.opacity = v[10];
        p.color = Vector3d(v[11], v[12], v[13]);
        require((p.scale.array() > 0).all(), "cloud file: non-positive scale");
        require(p.opacity > 0 && p.opacity < 1, "cloud file: opacity outside (0,1)");
        cloud.push_back(p);
    }
    return cloud;
}

inline std::string cloud_to_string(const GaussianCloud& cloud) {
    std::ostringstream os;
    write_cloud(os, cloud);
    return os.str();
}

inline GaussianCloud cloud_from_string(const std::string& text) {
    std::istringstream is(text);
    return read_cloud(is);
}

}  // namespace splatguide
