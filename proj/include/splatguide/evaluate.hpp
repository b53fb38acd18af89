#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/losses.hpp"
#include "splatguide/parallel.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/synthetic.hpp"

namespace splatguide {

enum class Split { full, observable, unobservable };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::full: return "full";
        case Split::observable: return "observable";
        case Split::unobservable: return "unobservable";
    }
    return "?";
}

inline Split parse_split(const std::string& s) {
    if (s == "full") return Split::full;
    if (s == "observable") return Split::observable;
    if (s == "unobservable") return Split::unobservable;
    throw InvalidInput("unknown split '" + s + "'");
}

struct MetricRow {
    std::string view;  // view index, or "mean"
    Split split = Split::full;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    double mse = 0.0;      // not serialised
    double weight = 0.0;   // masked pixel count, not serialised

    bool operator==(const MetricRow& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return view == o.view && split == o.split && same(psnr, o.psnr) && same(ssim, o.ssim) &&
               same(perceptual, o.perceptual);
    }
};

struct MetricsReport {
    std::vector<MetricRow> rows;

    const MetricRow& mean(Split s) const {
        for (const auto& r : rows)
            if (r.view == "mean" && r.split == s) return r;
        throw InvalidState("report has no mean row for split");
    }
    bool operator==(const MetricsReport& o) const { return rows == o.rows; }
};

/// Mean squared error over the pixels where mask > 0.5 (all pixels without a mask).
inline double masked_mse(const Image& a, const Image& b, const Image* mask, double* count = nullptr) {
    require_same_shape(a, b, "masked_mse");
    double sum = 0.0, n = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            if (mask && mask->at(x, y) <= 0.5) continue;
            for (int c = 0; c < a.channels; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                sum += d * d;
            }
            n += a.channels;
        }
    if (count) *count = n / std::max(a.channels, 1);
    return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

/// Mean of the SSIM map over window positions whose centre pixel lies in the mask.
inline double masked_ssim(const Image& a, const Image& b, const Image* mask) {
    const Image map = ssim_map(a, b);
    const int off = (a.width - map.width) / 2;
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x) {
            if (mask && mask->at(x + off, y + off) <= 0.5) continue;
            for (int c = 0; c < map.channels; ++c) {
                sum += map.at(x, y, c);
                ++n;
            }
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

inline MetricRow view_metrics(const Image& render, const Image& gt, const Image* mask, const std::string& view,
                              Split split) {
    MetricRow r;
    r.view = view;
    r.split = split;
    r.mse = masked_mse(render, gt, mask, &r.weight);
    if (r.weight == 0.0) {
        r.psnr = r.ssim = r.perceptual = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.psnr = psnr_from_mse(r.mse);
    r.ssim = masked_ssim(render, gt, mask);
    r.perceptual = perceptual_pyramid(render, gt, mask).value;
    return r;
}

/// Per-view metrics on the full image and both observability splits, followed by one mean row
/// per split (averaging views where the split is non-empty).
inline MetricsReport evaluate(const GaussianCloud& cloud, const SyntheticScene& scene, const RasterConfig& raster = {}) {
    const std::size_t n = scene.eval_views.size();
    require(scene.eval_masks.size() == n, "evaluate: one mask per eval view required");
    std::vector<std::array<MetricRow, 3>> per(n);
    parallel_for(n, [&](std::size_t k) {
        Rasterizer r(raster);
        const Image render = r.render(cloud, scene.eval_views[k].camera).color;
        const Image& gt = scene.eval_views[k].image;
        const Image& m = scene.eval_masks[k];
        Image inv = m;
        for (double& v : inv.data) v = v > 0.5 ? 0.0 : 1.0;
        const std::string id = std::to_string(k);
        per[k] = {view_metrics(render, gt, nullptr, id, Split::full),
                  view_metrics(render, gt, &m, id, Split::observable),
                  view_metrics(render, gt, &inv, id, Split::unobservable)};
    });
    MetricsReport rep;
    for (const auto& v : per)
        for (const auto& r : v) rep.rows.push_back(r);
    for (Split s : {Split::full, Split::observable, Split::unobservable}) {
        MetricRow mean;
        mean.view = "mean";
        mean.split = s;
        double psnr = 0, ssim = 0, perc = 0;
        int count = 0;
        for (const auto& v : per) {
            const MetricRow& r = v[static_cast<int>(s)];
            if (r.weight == 0.0) continue;
            psnr += r.psnr;
            ssim += r.ssim;
            perc += r.perceptual;
            mean.weight += r.weight;
            ++count;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        mean.psnr = count ? psnr / count : nan;
        mean.ssim = count ? ssim / count : nan;
        mean.perceptual = count ? perc / count : nan;
        rep.rows.push_back(mean);
    }
    return rep;
}

inline void write_report(std::ostream& os, const MetricsReport& rep) {
    os << "view_id,split,psnr,ssim,perceptual\n";
    for (const auto& r : rep.rows)
        os << r.view << ',' << split_name(r.split) << ',' << format_double(r.psnr) << ',' << format_double(r.ssim)
           << ',' << format_double(r.perceptual) << '\n';
}

inline MetricsReport read_report(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "view_id,split,psnr,ssim,perceptual")
        throw InvalidInput("metrics CSV: missing header");
    MetricsReport rep;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw InvalidInput("metrics CSV: expected 5 columns");
        MetricRow r;
        r.view = cells[0];
        r.split = parse_split(cells[1]);
        r.psnr = parse_double(cells[2]);
        r.ssim = parse_double(cells[3]);
        r.perceptual = parse_double(cells[4]);
        rep.rows.push_back(r);
    }
    return rep;
}

}  // namespace splatguide
