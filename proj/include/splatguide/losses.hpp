#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "splatguide/error.hpp"
#include "splatguide/image.hpp"

namespace splatguide {

struct LossWeights {
    double lambda_dssim = 0.2;
    double lambda_perc = 1e-4;
    double lambda_gen1 = 0.1;
    double lambda_gen2 = 0.01;

    void validate() const {
        require(lambda_dssim >= 0 && lambda_dssim <= 1, "lambda must lie in [0, 1]");
        require(lambda_perc >= 0 && lambda_gen1 >= 0 && lambda_gen2 >= 0, "loss weights must be non-negative");
    }

    bool operator==(const LossWeights&) const = default;
};

/// Scalar loss with its gradient with respect to the first (predicted) argument.
struct LossValue {
    double value = 0.0;
    Image grad;
};

struct SequenceLossValue {
    double value = 0.0;
    Sequence grad;
};

namespace detail {

inline double sign(double v) { return (v > 0.0) - (v < 0.0); }

inline double mask_at(const Image* mask, int x, int y, int c) {
    if (!mask) return 1.0;
    return mask->at(x, y, mask->channels == 1 ? 0 : c);
}

inline void check_mask(const Image& a, const Image* mask) {
    if (!mask) return;
    require(mask->width == a.width && mask->height == a.height, "mask size mismatch");
    require(mask->channels == 1 || mask->channels == a.channels, "mask channel mismatch");
}

}  // namespace detail

/// Mean absolute difference over the pixels selected by `mask` (all pixels when absent).
inline LossValue l1(const Image& a, const Image& b, const Image* mask = nullptr) {
    require_same_shape(a, b, "l1");
    detail::check_mask(a, mask);
    LossValue out{0.0, Image(a.width, a.height, a.channels)};
    double count = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < a.channels; ++c) count += detail::mask_at(mask, x, y, c);
    if (count == 0.0) return out;
    double sum = 0.0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < a.channels; ++c) {
                const double m = detail::mask_at(mask, x, y, c);
                const double d = a.at(x, y, c) - b.at(x, y, c);
                sum += m * std::abs(d);
                out.grad.at(x, y, c) = m * detail::sign(d) / count;
            }
    out.value = sum / count;
    return out;
}

inline double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    if (a.data.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m) {
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

/// 10 log10(1 / MSE) for [0,1] images; +inf for identical images.
inline double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------------------------------
// SSIM with an 11x11 Gaussian window (sigma 1.5) evaluated over the valid region.

constexpr int kSsimWindow = 11;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

inline const std::array<double, kSsimWindow>& ssim_kernel() {
    static const std::array<double, kSsimWindow> k = [] {
        std::array<double, kSsimWindow> w{};
        double s = 0.0;
        for (int i = 0; i < kSsimWindow; ++i) {
            const double d = i - kSsimWindow / 2;
            w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            s += w[i];
        }
        for (double& v : w) v /= s;
        return w;
    }();
    return k;
}

namespace detail {

// Separable valid-mode correlation with the SSIM window.
inline Image window_filter(const Image& img) {
    const auto& k = ssim_kernel();
    const int ow = img.width - kSsimWindow + 1, oh = img.height - kSsimWindow + 1;
    Image tmp(ow, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double s = 0.0;
                for (int i = 0; i < kSsimWindow; ++i) s += k[i] * img.at(x + i, y, c);
                tmp.at(x, y, c) = s;
            }
    Image out(ow, oh, img.channels);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double s = 0.0;
                for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp.at(x, y + i, c);
                out.at(x, y, c) = s;
            }
    return out;
}

// Adjoint of window_filter.
inline Image window_filter_adjoint(const Image& g, int width, int height) {
    const auto& k = ssim_kernel();
    Image tmp(g.width, height, g.channels);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
            for (int c = 0; c < g.channels; ++c) {
                const double v = g.at(x, y, c);
                for (int i = 0; i < kSsimWindow; ++i) tmp.at(x, y + i, c) += k[i] * v;
            }
    Image out(width, height, g.channels);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < g.width; ++x)
            for (int c = 0; c < g.channels; ++c) {
                const double v = tmp.at(x, y, c);
                for (int i = 0; i < kSsimWindow; ++i) out.at(x + i, y, c) += k[i] * v;
            }
    return out;
}

struct SsimTerms {
    Image mu_a, mu_b, var_a, var_b, cov_ab, map;
};

inline SsimTerms ssim_terms(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    require(a.width >= kSsimWindow && a.height >= kSsimWindow, "ssim: image smaller than the 11x11 window");
    Image aa = a, bb = b, ab = a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa.data[i] = a.data[i] * a.data[i];
        bb.data[i] = b.data[i] * b.data[i];
        ab.data[i] = a.data[i] * b.data[i];
    }
    SsimTerms t;
    t.mu_a = window_filter(a);
    t.mu_b = window_filter(b);
    t.var_a = window_filter(aa);
    t.var_b = window_filter(bb);
    t.cov_ab = window_filter(ab);
    t.map = t.mu_a;
    for (std::size_t i = 0; i < t.map.size(); ++i) {
        const double ma = t.mu_a.data[i], mb = t.mu_b.data[i];
        t.var_a.data[i] -= ma * ma;
        t.var_b.data[i] -= mb * mb;
        t.cov_ab.data[i] -= ma * mb;
        const double n1 = 2.0 * ma * mb + kSsimC1, n2 = 2.0 * t.cov_ab.data[i] + kSsimC2;
        const double d1 = ma * ma + mb * mb + kSsimC1, d2 = t.var_a.data[i] + t.var_b.data[i] + kSsimC2;
        t.map.data[i] = (n1 * n2) / (d1 * d2);
    }
    return t;
}

}  // namespace detail

/// Per-window SSIM values over the valid region ((W-10) x (H-10) x C).
inline Image ssim_map(const Image& a, const Image& b) { return detail::ssim_terms(a, b).map; }

inline LossValue ssim(const Image& a, const Image& b) {
    auto t = detail::ssim_terms(a, b);
    const double n = static_cast<double>(t.map.size());
    double sum = 0.0;
    for (double v : t.map.data) sum += v;

    Image ga = t.map, gb = t.map, gc = t.map;
    for (std::size_t i = 0; i < t.map.size(); ++i) {
        const double ma = t.mu_a.data[i], mb = t.mu_b.data[i];
        const double n1 = 2.0 * ma * mb + kSsimC1, n2 = 2.0 * t.cov_ab.data[i] + kSsimC2;
        const double d1 = ma * ma + mb * mb + kSsimC1, d2 = t.var_a.data[i] + t.var_b.data[i] + kSsimC2;
        const double s = t.map.data[i];
        const double ds_dmu = 2.0 * mb * n2 / (d1 * d2) - s * 2.0 * ma / d1;
        const double ds_dvar = -s / d2;
        const double ds_dcov = 2.0 * n1 / (d1 * d2);
        ga.data[i] = (ds_dmu - 2.0 * ma * ds_dvar - mb * ds_dcov) / n;
        gb.data[i] = ds_dvar / n;
        gc.data[i] = ds_dcov / n;
    }
    const Image fa = detail::window_filter_adjoint(ga, a.width, a.height);
    const Image fb = detail::window_filter_adjoint(gb, a.width, a.height);
    const Image fc = detail::window_filter_adjoint(gc, a.width, a.height);
    LossValue out{sum / n, Image(a.width, a.height, a.channels)};
    for (std::size_t i = 0; i < a.size(); ++i)
        out.grad.data[i] = fa.data[i] + 2.0 * a.data[i] * fb.data[i] + b.data[i] * fc.data[i];
    return out;
}

// ---------------------------------------------------------------------------------------
// Perceptual loss: weighted mean-L1 distance between feature maps.

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<Image> features(const Image& img) const = 0;
    /// Vector-Jacobian product of `features` at `img`.
    virtual Image features_vjp(const Image& img, const std::vector<Image>& d_features) const = 0;
    /// Weight applied to the mean-L1 distance of each feature map.
    virtual std::vector<double> weights(const Image& img) const = 0;
};

/// Three-level average-pooled pyramid (factors 1, 2, 4) with {intensity, Sobel-x, Sobel-y}
/// maps per channel; every level weighs 1/levels.
class SobelPyramid final : public FeatureExtractor {
public:
    static constexpr int kLevels = 3;

    std::vector<Image> features(const Image& img) const override {
        std::vector<Image> out;
        Image level = img;
        for (int l = 0; l < kLevels; ++l) {
            if (l > 0) level = pool(level);
            if (level.width == 0 || level.height == 0) break;
            out.push_back(level);
            if (level.width >= 3 && level.height >= 3) {
                out.push_back(sobel(level, true));
                out.push_back(sobel(level, false));
            }
        }
        return out;
    }

    Image features_vjp(const Image& img, const std::vector<Image>& d) const override {
        // walk the levels forward to know their shapes, then accumulate backwards
        std::vector<Image> levels;
        Image level = img;
        for (int l = 0; l < kLevels; ++l) {
            if (l > 0) level = pool(level);
            if (level.width == 0 || level.height == 0) break;
            levels.push_back(level);
        }
        std::size_t k = 0;
        std::vector<Image> d_levels;
        for (const auto& lv : levels) {
            Image g = d[k++];
            if (lv.width >= 3 && lv.height >= 3) {
                add_into(g, sobel_adjoint(d[k++], lv.width, lv.height, true));
                add_into(g, sobel_adjoint(d[k++], lv.width, lv.height, false));
            }
            d_levels.push_back(std::move(g));
        }
        for (std::size_t l = d_levels.size(); l-- > 1;)
            add_into(d_levels[l - 1], pool_adjoint(d_levels[l], levels[l - 1].width, levels[l - 1].height));
        return d_levels.front();
    }

    std::vector<double> weights(const Image& img) const override {
        std::vector<double> w;
        Image level = img;
        int levels = 0;
        std::vector<int> per_level;
        for (int l = 0; l < kLevels; ++l) {
            if (l > 0) level = Image(level.width / 2, level.height / 2, level.channels);
            if (level.width == 0 || level.height == 0) break;
            per_level.push_back(level.width >= 3 && level.height >= 3 ? 3 : 1);
            ++levels;
        }
        for (int n : per_level)
            for (int i = 0; i < n; ++i) w.push_back(1.0 / levels);
        return w;
    }

    static Image pool(const Image& img) {
        Image out(img.width / 2, img.height / 2, img.channels);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    out.at(x, y, c) = 0.25 * (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                                              img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c));
        return out;
    }

    static Image pool_adjoint(const Image& g, int width, int height) {
        Image out(width, height, g.channels);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x)
                for (int c = 0; c < g.channels; ++c) {
                    const double v = 0.25 * g.at(x, y, c);
                    out.at(2 * x, 2 * y, c) += v;
                    out.at(2 * x + 1, 2 * y, c) += v;
                    out.at(2 * x, 2 * y + 1, c) += v;
                    out.at(2 * x + 1, 2 * y + 1, c) += v;
                }
        return out;
    }

    // Valid-mode 3x3 Sobel, scaled by 1/8.
    static Image sobel(const Image& img, bool horizontal) {
        Image out(img.width - 2, img.height - 2, img.channels);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < img.channels; ++c) {
                    double s = 0.0;
                    for (int j = 0; j < 3; ++j)
                        for (int i = 0; i < 3; ++i) s += tap(i, j, horizontal) * img.at(x + i, y + j, c);
                    out.at(x, y, c) = s;
                }
        return out;
    }

    static Image sobel_adjoint(const Image& g, int width, int height, bool horizontal) {
        Image out(width, height, g.channels);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x)
                for (int c = 0; c < g.channels; ++c) {
                    const double v = g.at(x, y, c);
                    for (int j = 0; j < 3; ++j)
                        for (int i = 0; i < 3; ++i) out.at(x + i, y + j, c) += tap(i, j, horizontal) * v;
                }
        return out;
    }

private:
    static double tap(int i, int j, bool horizontal) {
        static constexpr double k[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
        return (horizontal ? k[j][i] : k[i][j]) / 8.0;
    }

    static void add_into(Image& a, const Image& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
    }
};

inline const FeatureExtractor& default_feature_extractor() {
    static const SobelPyramid pyramid;
    return pyramid;
}

/// Perceptual distance between a and b. A mask multiplies both inputs before feature
/// extraction (M (.) a versus M (.) b).
inline LossValue perceptual_pyramid(const Image& a, const Image& b, const Image* mask = nullptr,
                                    const FeatureExtractor& extractor = default_feature_extractor()) {
    require_same_shape(a, b, "perceptual_pyramid");
    detail::check_mask(a, mask);
    const Image ma = mask ? multiply(a, *mask) : a;
    const Image mb = mask ? multiply(b, *mask) : b;
    const auto fa = extractor.features(ma);
    const auto fb = extractor.features(mb);
    const auto w = extractor.weights(ma);
    LossValue out{0.0, Image(a.width, a.height, a.channels)};
    std::vector<Image> d(fa.size());
    for (std::size_t k = 0; k < fa.size(); ++k) {
        const double n = static_cast<double>(fa[k].size());
        d[k] = Image(fa[k].width, fa[k].height, fa[k].channels);
        if (n == 0) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < fa[k].size(); ++i) {
            const double diff = fa[k].data[i] - fb[k].data[i];
            s += std::abs(diff);
            d[k].data[i] = w[k] * detail::sign(diff) / n;
        }
        out.value += w[k] * s / n;
    }
    Image g = extractor.features_vjp(ma, d);
    out.grad = mask ? multiply(g, *mask) : g;
    return out;
}

/// (1 - lambda) L1 + lambda (1 - SSIM) / 2.
inline LossValue input_view_loss(const Image& render, const Image& target, const LossWeights& w) {
    const auto a = l1(render, target);
    const double lam = w.lambda_dssim;
    LossValue out{(1.0 - lam) * a.value, a.grad};
    for (double& g : out.grad.data) g *= (1.0 - lam);
    if (lam > 0.0) {
        const auto s = ssim(render, target);
        out.value += lam * (1.0 - s.value) / 2.0;
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data[i] -= 0.5 * lam * s.grad.data[i];
    }
    return out;
}

/// lambda_gen1 L1 + lambda_gen2 L_perc, both over the whole image.
inline LossValue generated_view_loss(const Image& render, const Image& generated, const LossWeights& w,
                                     const FeatureExtractor& extractor = default_feature_extractor()) {
    const auto a = l1(render, generated);
    LossValue out{w.lambda_gen1 * a.value, a.grad};
    for (double& g : out.grad.data) g *= w.lambda_gen1;
    if (w.lambda_gen2 > 0.0) {
        const auto p = perceptual_pyramid(render, generated, nullptr, extractor);
        out.value += w.lambda_gen2 * p.value;
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data[i] += w.lambda_gen2 * p.grad.data[i];
    }
    return out;
}

/// ||M (.) (S - X)||_1 / (L H W 3) + lambda_perc * mean_j L_perc(M_j (.) S_j, M_j (.) X_j);
/// the gradient is taken with respect to X.
inline SequenceLossValue guidance_loss(const Sequence& rendered, const Sequence& mask, const Sequence& predicted,
                                       const LossWeights& w,
                                       const FeatureExtractor& extractor = default_feature_extractor()) {
    require(rendered.size() == mask.size() && rendered.size() == predicted.size(),
            "guidance_loss: sequence lengths differ");
    SequenceLossValue out;
    if (rendered.empty()) return out;
    double total = 0.0;
    for (const auto& s : rendered) total += static_cast<double>(s.size());
    const double frames = static_cast<double>(rendered.size());
    for (std::size_t j = 0; j < rendered.size(); ++j) {
        const Image& s = rendered[j];
        const Image& x = predicted[j];
        const Image& m = mask[j];
        require_same_shape(s, x, "guidance_loss");
        detail::check_mask(s, &m);
        Image g(x.width, x.height, x.channels);
        for (int y = 0; y < x.height; ++y)
            for (int px = 0; px < x.width; ++px)
                for (int c = 0; c < x.channels; ++c) {
                    const double mv = detail::mask_at(&m, px, y, c);
                    const double d = x.at(px, y, c) - s.at(px, y, c);
                    out.value += mv * std::abs(d) / total;
                    g.at(px, y, c) = mv * detail::sign(d) / total;
                }
        if (w.lambda_perc > 0.0) {
            const auto p = perceptual_pyramid(x, s, &m, extractor);
            out.value += w.lambda_perc * p.value / frames;
            for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += w.lambda_perc * p.grad.data[i] / frames;
        }
        out.grad.push_back(std::move(g));
    }
    return out;
}

}  // namespace splatguide
