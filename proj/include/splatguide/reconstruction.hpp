#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "splatguide/diffusion.hpp"
#include "splatguide/error.hpp"
#include "splatguide/guidance.hpp"
#include "splatguide/losses.hpp"
#include "splatguide/rasterizer.hpp"
#include "splatguide/scene.hpp"
#include "splatguide/trajectory.hpp"

namespace splatguide {

struct RunConfig {
    int n_iter = 10000;
    int n_gen = 260;
    double eta = 0.5;
    double eta_mask = 0.9;
    int length = 25;
    LossWeights weights;

    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;

    int baseline_iters = 3000;
    int densify_from = 100;
    int densify_interval = 100;
    double densify_grad_threshold = 2e-4;  // mean screen gradient in NDC units
    double percent_dense = 0.01;
    double prune_opacity = 0.005;
    int opacity_reset_interval = 3000;
    int max_primitives = 20000;

    int ddim_steps = 50;
    double gamma0 = 100.0;
    bool normalize_guidance = false;
    double max_hole_fraction = 0.10;
    int top_k = 6;

    int checkpoint_interval = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        require(n_iter >= 0 && baseline_iters >= 0, "iteration counts must be non-negative");
        require(n_gen >= 1, "n_gen must be positive");
        require(n_gen <= std::max(n_iter, 1), "n_gen must not exceed n_iter");
        require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
        require(eta_mask > 0.0 && eta_mask <= 1.0, "eta_mask must lie in (0, 1]");
        require(length >= 2, "sequence length must be at least 2");
        require(densify_interval >= 1 && opacity_reset_interval >= 1 && checkpoint_interval >= 1,
                "intervals must be positive");
        require(ddim_steps >= 1, "ddim_steps must be positive");
        require(gamma0 >= 0.0, "gamma0 must be non-negative");
        require(top_k >= 0 && max_hole_fraction >= 0.0 && max_hole_fraction <= 1.0, "invalid candidate filter");
        require(max_primitives >= 1, "max_primitives must be positive");
        weights.validate();
    }

    TrajectoryConfig trajectory_config() const {
        TrajectoryConfig t;
        t.max_hole_fraction = max_hole_fraction;
        t.top_k = top_k;
        t.length = length;
        t.eta_mask = eta_mask;
        return t;
    }

    GeneratorConfig generator_config() const {
        GeneratorConfig g;
        g.ddim_steps = ddim_steps;
        g.gamma0 = gamma0;
        g.normalize = normalize_guidance;
        g.eta_mask = eta_mask;
        g.weights = weights;
        return g;
    }

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

using ConfigField = std::variant<int*, double*, bool*, std::uint64_t*>;

inline std::vector<std::pair<std::string, ConfigField>> config_fields(RunConfig& c) {
    return {
        {"n_iter", &c.n_iter},
        {"n_gen", &c.n_gen},
        {"eta", &c.eta},
        {"eta_mask", &c.eta_mask},
        {"length", &c.length},
        {"lambda_dssim", &c.weights.lambda_dssim},
        {"lambda_perc", &c.weights.lambda_perc},
        {"lambda_gen1", &c.weights.lambda_gen1},
        {"lambda_gen2", &c.weights.lambda_gen2},
        {"lr_position", &c.lr_position},
        {"lr_position_final", &c.lr_position_final},
        {"lr_scale", &c.lr_scale},
        {"lr_rotation", &c.lr_rotation},
        {"lr_opacity", &c.lr_opacity},
        {"lr_color", &c.lr_color},
        {"baseline_iters", &c.baseline_iters},
        {"densify_from", &c.densify_from},
        {"densify_interval", &c.densify_interval},
        {"densify_grad_threshold", &c.densify_grad_threshold},
        {"percent_dense", &c.percent_dense},
        {"prune_opacity", &c.prune_opacity},
        {"opacity_reset_interval", &c.opacity_reset_interval},
        {"max_primitives", &c.max_primitives},
        {"ddim_steps", &c.ddim_steps},
        {"gamma0", &c.gamma0},
        {"normalize_guidance", &c.normalize_guidance},
        {"max_hole_fraction", &c.max_hole_fraction},
        {"top_k", &c.top_k},
        {"checkpoint_interval", &c.checkpoint_interval},
        {"seed", &c.seed},
    };
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end) throw InvalidInput("config: bad integer for '" + key + "': " + text);
    return v;
}

}  // namespace detail

/// Flat key=value text; '#' starts a comment.
inline void write_config(std::ostream& os, const RunConfig& cfg) {
    RunConfig copy = cfg;
    for (const auto& [name, field] : detail::config_fields(copy)) {
        os << name << '=';
        std::visit([&os](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) os << format_double(*p);
            else if constexpr (std::is_same_v<T, bool>) os << (*p ? "true" : "false");
            else os << *p;
        }, field);
        os << '\n';
    }
}

inline RunConfig read_config(std::istream& is) {
    RunConfig cfg;
    auto fields = detail::config_fields(cfg);
    std::map<std::string, detail::ConfigField> by_name(fields.begin(), fields.end());
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = by_name.find(key);
        if (it == by_name.end()) throw InvalidInput("config: unknown key '" + key + "'");
        std::visit([&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                *p = parse_double(value);
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "1") *p = true;
                else if (value == "false" || value == "0") *p = false;
                else throw InvalidInput("config: bad boolean for '" + key + "': " + value);
            } else {
                *p = detail::parse_integer<T>(key, value);
            }
        }, it->second);
    }
    cfg.validate();
    return cfg;
}

inline std::string config_to_string(const RunConfig& cfg) {
    std::ostringstream os;
    write_config(os, cfg);
    return os.str();
}

inline RunConfig config_from_string(const std::string& text) {
    std::istringstream is(text);
    return read_config(is);
}

// ---------------------------------------------------------------------------------------

struct GeneratedEntry {
    Image image;
    Camera camera;
    int sequence = 0;
};

/// Global list G of generated views; the current sequence S is the tail appended last.
class GeneratedViewStore {
public:
    void append_sequence(const Sequence& frames, const std::vector<Camera>& poses) {
        require(frames.size() == poses.size() && !frames.empty(), "generated sequence and poses must match");
        current_begin_ = entries_.size();
        for (std::size_t j = 0; j < frames.size(); ++j) entries_.push_back({frames[j], poses[j], sequences_});
        ++sequences_;
    }

    const std::vector<GeneratedEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    int sequences() const { return sequences_; }
    std::size_t current_begin() const { return current_begin_; }
    std::size_t current_size() const { return entries_.size() - current_begin_; }

private:
    std::vector<GeneratedEntry> entries_;
    std::size_t current_begin_ = 0;
    int sequences_ = 0;
};

enum class PickSource { current, global };

struct PickedView {
    const GeneratedEntry* entry = nullptr;
    PickSource source = PickSource::current;
};

/// With probability 1 - eta a uniform frame of S, otherwise a uniform frame of G; falls back to
/// whichever is non-empty.
inline PickedView pick_generated_view(const GeneratedViewStore& store, double eta, Rng& rng) {
    require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
    const bool has_s = store.current_size() > 0;
    const bool has_g = !store.empty();
    if (!has_s && !has_g) throw InvalidState("pick_generated_view: no generated views available");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool from_s = u(rng) >= eta;
    if (from_s && !has_s) from_s = false;
    if (!from_s && !has_g) from_s = true;
    if (from_s) {
        std::uniform_int_distribution<std::size_t> d(0, store.current_size() - 1);
        return {&store.entries()[store.current_begin() + d(rng)], PickSource::current};
    }
    std::uniform_int_distribution<std::size_t> d(0, store.size() - 1);
    return {&store.entries()[d(rng)], PickSource::global};
}

// ---------------------------------------------------------------------------------------

/// Adaptive moment estimation with bias correction, one parameter block per primitive:
/// centre (3), log-scale (3), rotation (4), logit-opacity (1), colour (3).
class Adam {
public:
    static constexpr int kParams = 14;
    using Block = std::array<double, kParams>;

    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-15;

    void resize(std::size_t n) {
        m_.resize(n, Block{});
        v_.resize(n, Block{});
    }
    /// Rebuilds the moment arrays after densification; origin[i] < 0 starts from zero.
    void remap(const std::vector<std::ptrdiff_t>& origin) {
        std::vector<Block> m(origin.size(), Block{}), v(origin.size(), Block{});
        for (std::size_t i = 0; i < origin.size(); ++i)
            if (origin[i] >= 0) {
                m[i] = m_[static_cast<std::size_t>(origin[i])];
                v[i] = v_[static_cast<std::size_t>(origin[i])];
            }
        m_ = std::move(m);
        v_ = std::move(v);
    }
    std::size_t size() const { return m_.size(); }

    /// Returns the update for primitive i given its gradient and per-parameter learning rates.
    Block step(std::size_t i, const Block& grad, const Block& lr, int t) {
        Block& m = m_[i];
        Block& v = v_[i];
        Block out{};
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (int k = 0; k < kParams; ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            out[k] = lr[k] * (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon);
        }
        return out;
    }

private:
    std::vector<Block> m_, v_;
};

/// Clone / split / prune / opacity reset. Returns for every output primitive the index it came
/// from, or -1 for newly created ones.
inline std::vector<std::ptrdiff_t> densify_and_prune(GaussianCloud& cloud, int iteration, int total_iters,
                                                     const RunConfig& cfg, double extent, Rng& rng) {
    const std::size_t n = cloud.size();
    std::vector<std::ptrdiff_t> origin(n);
    for (std::size_t i = 0; i < n; ++i) origin[i] = static_cast<std::ptrdiff_t>(i);
    if (2 * iteration >= total_iters) return origin;
    if (cloud.stats.size() != n) cloud.reset_stats();

    GaussianCloud out;
    std::vector<std::ptrdiff_t> out_origin;
    std::normal_distribution<double> normal(0.0, 1.0);
    // each clone or split adds one primitive
    long budget = static_cast<long>(cfg.max_primitives) - static_cast<long>(n);
    std::vector<GaussianPrimitive> added;
    std::vector<char> drop(n, 0);
    for (std::size_t i = 0; i < n && budget > 0; ++i) {
        const auto& st = cloud.stats[i];
        if (st.count == 0) continue;
        if (st.grad_norm_sum / st.count <= cfg.densify_grad_threshold) continue;
        const auto& p = cloud.primitives[i];
        --budget;
        if (p.scale.maxCoeff() <= cfg.percent_dense * extent) {
            added.push_back(p);
        } else {
            const Matrix3d r = rotation_matrix(p.rotation);
            for (int c = 0; c < 2; ++c) {
                GaussianPrimitive child = p;
                const Vector3d z(normal(rng), normal(rng), normal(rng));
                child.center = p.center + r * (p.scale.cwiseProduct(z));
                child.scale = p.scale / 1.6;
                added.push_back(child);
            }
            drop[i] = 1;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (drop[i] || cloud.primitives[i].opacity < cfg.prune_opacity) continue;
        out.push_back(cloud.primitives[i]);
        out_origin.push_back(static_cast<std::ptrdiff_t>(i));
    }
    for (const auto& p : added) {
        if (p.opacity < cfg.prune_opacity) continue;
        out.push_back(p);
        out_origin.push_back(-1);
    }
    out.reset_stats();
    cloud = std::move(out);
    return out_origin;
}

inline void reset_opacity(GaussianCloud& cloud, double ceiling = 0.01) {
    for (auto& p : cloud.primitives) p.opacity = std::min(p.opacity, ceiling);
}

/// Radius of the cloud's bounding box, used to scale positional learning rates.
inline double cloud_extent(const GaussianCloud& cloud) {
    if (cloud.empty()) return 1.0;
    Vector3d lo = cloud.primitives.front().center, hi = lo;
    for (const auto& p : cloud.primitives) {
        lo = lo.cwiseMin(p.center);
        hi = hi.cwiseMax(p.center);
    }
    const double r = 0.5 * (hi - lo).norm();
    return r > 0.0 ? r : 1.0;
}

/// Gradient-based optimisation of a cloud against per-view losses.
class Trainer {
public:
    Trainer(GaussianCloud cloud, const RunConfig& cfg, double extent, int total_steps, std::uint64_t seed)
        : cloud_(std::move(cloud)), cfg_(cfg), extent_(extent), total_steps_(std::max(total_steps, 1)),
          rng_(seed), raster_() {
        cloud_.reset_stats();
        adam_.resize(cloud_.size());
        grad_.assign(cloud_.size(), PrimitiveGradient{});
    }

    const GaussianCloud& cloud() const { return cloud_; }
    GaussianCloud take_cloud() { return std::move(cloud_); }
    int steps_taken() const { return step_; }

    double add_input_view(const ViewRecord& view) {
        const auto out = raster_.render(cloud_, view.camera);
        const auto loss = input_view_loss(out.color, view.image, cfg_.weights);
        accumulate(raster_.backward(loss.grad), view.camera.width);
        return loss.value;
    }

    double add_generated_view(const Image& target, const Camera& camera) {
        const auto out = raster_.render(cloud_, camera);
        const auto loss = generated_view_loss(out.color, target, cfg_.weights);
        accumulate(raster_.backward(loss.grad), camera.width);
        return loss.value;
    }

    /// One optimiser update with the gradients gathered since the last call.
    void step() {
        ++step_;
        const double r = std::min(1.0, static_cast<double>(step_ - 1) / total_steps_);
        const double lr_pos = std::exp((1.0 - r) * std::log(cfg_.lr_position * extent_) +
                                       r * std::log(cfg_.lr_position_final * extent_));
        Adam::Block lr;
        for (int k = 0; k < 3; ++k) lr[k] = lr_pos;
        for (int k = 3; k < 6; ++k) lr[k] = cfg_.lr_scale;
        for (int k = 6; k < 10; ++k) lr[k] = cfg_.lr_rotation;
        lr[10] = cfg_.lr_opacity;
        for (int k = 11; k < 14; ++k) lr[k] = cfg_.lr_color;

        for (std::size_t i = 0; i < cloud_.size(); ++i) {
            auto& p = cloud_.primitives[i];
            const auto& g = grad_[i];
            Adam::Block b;
            for (int k = 0; k < 3; ++k) {
                b[k] = g.center[k];
                b[3 + k] = g.scale[k] * p.scale[k];
                b[11 + k] = g.color[k];
            }
            for (int k = 0; k < 4; ++k) b[6 + k] = g.rotation[k];
            b[10] = g.opacity * p.opacity * (1.0 - p.opacity);
            const Adam::Block d = adam_.step(i, b, lr, step_);
            Vector3d ls = p.log_scale();
            for (int k = 0; k < 3; ++k) {
                p.center[k] -= d[k];
                ls[k] -= d[3 + k];
                p.color[k] -= d[11 + k];
            }
            p.set_log_scale(ls);
            Quaterniond q(p.rotation.w() - d[6], p.rotation.x() - d[7], p.rotation.y() - d[8], p.rotation.z() - d[9]);
            p.rotation = q.normalized();
            p.set_logit_opacity(p.logit_opacity() - d[10]);
            p.opacity = std::clamp(p.opacity, 1e-6, 1.0 - 1e-6);
        }
        grad_.assign(cloud_.size(), PrimitiveGradient{});
    }

    /// Density control for iteration `it` of a phase lasting `phase_iters` iterations.
    void maintain(int it, int phase_iters) {
        if (2 * it >= phase_iters) return;
        if (it >= cfg_.densify_from && it % cfg_.densify_interval == 0) {
            const auto origin = densify_and_prune(cloud_, it, phase_iters, cfg_, extent_, rng_);
            adam_.remap(origin);
            grad_.assign(cloud_.size(), PrimitiveGradient{});
        }
        if (it > 0 && it % cfg_.opacity_reset_interval == 0) reset_opacity(cloud_);
    }

private:
    GaussianCloud cloud_;
    RunConfig cfg_;
    double extent_;
    int total_steps_;
    int step_ = 0;
    Rng rng_;
    Rasterizer raster_;
    Adam adam_;
    CloudGradient grad_;

    void accumulate(const CloudGradient& g, int width) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto& a = grad_[i];
            a.center += g[i].center;
            a.scale += g[i].scale;
            a.rotation += g[i].rotation;
            a.opacity += g[i].opacity;
            a.color += g[i].color;
        }
        for (std::size_t i : raster_.visible_parents()) {
            const double norm = g[i].mean2d.norm() * 0.5 * width;
            auto& st = cloud_.stats[i];
            st.grad_norm_sum += norm;
            st.max_grad_norm = std::max(st.max_grad_norm, norm);
            ++st.count;
        }
    }
};

// ---------------------------------------------------------------------------------------

struct LogRow {
    int iteration = 0;
    std::string phase;
    double input_loss = 0.0;
    double generated_loss = 0.0;
    std::size_t primitives = 0;
};

struct ReconstructionTrace {
    std::vector<int> generation_iterations;
    std::vector<std::size_t> store_sizes;    // |G| after each generation event
    std::vector<int> generation_sources;     // input index used for each event
    int picks_current = 0;
    int picks_global = 0;
    std::vector<LogRow> log;
    std::vector<std::string> warnings;
};

using CheckpointFn = std::function<void(const std::string& phase, int iteration, const GaussianCloud&)>;

inline void write_run_log(std::ostream& os, const std::vector<LogRow>& rows) {
    os << "iteration,phase,input_loss,generated_loss,primitives\n";
    for (const auto& r : rows)
        os << r.iteration << ',' << r.phase << ',' << format_double(r.input_loss) << ','
           << format_double(r.generated_loss) << ',' << r.primitives << '\n';
}

/// Optimisation on the input views alone.
inline GaussianCloud train_baseline(const std::vector<ViewRecord>& inputs, GaussianCloud init, const RunConfig& cfg,
                                    ReconstructionTrace* trace = nullptr, const CheckpointFn& checkpoint = nullptr) {
    if (inputs.empty()) throw InvalidInput("train_baseline: no input views");
    cfg.validate();
    for (const auto& v : inputs) v.validate();
    if (cfg.baseline_iters == 0) return init;
    const double extent = cloud_extent(init);
    Trainer trainer(std::move(init), cfg, extent, cfg.baseline_iters, cfg.seed);
    for (int it = 0; it < cfg.baseline_iters; ++it) {
        const double loss = trainer.add_input_view(inputs[static_cast<std::size_t>(it) % inputs.size()]);
        trainer.step();
        trainer.maintain(it, cfg.baseline_iters);
        if (trace) trace->log.push_back({it, "baseline", loss, 0.0, trainer.cloud().size()});
        if (checkpoint && (it + 1) % cfg.checkpoint_interval == 0) checkpoint("baseline", it + 1, trainer.cloud());
    }
    return trainer.take_cloud();
}

/// Supplies the sequence model for a trajectory (the surrogate depends on the poses).
using ModelProvider = std::function<std::shared_ptr<const ScoreModel>(const Trajectory&)>;

/// The generation-augmented loop, starting from an optimised cloud and a trajectory pool.
inline GaussianCloud reconstruct_from(const std::vector<ViewRecord>& inputs, GaussianCloud baseline,
                                      const TrajectoryPool& pool, const RunConfig& cfg, const ModelProvider& models,
                                      const LatentDecoder& decoder, const NoiseSchedule& schedule,
                                      ReconstructionTrace* trace = nullptr, const CheckpointFn& checkpoint = nullptr) {
    if (inputs.empty()) throw InvalidInput("reconstruct: no input views");
    cfg.validate();
    for (const auto& v : inputs) v.validate();
    ReconstructionTrace local;
    ReconstructionTrace& tr = trace ? *trace : local;
    if (pool.empty()) tr.warnings.push_back("empty trajectory pool: continuing without generation");

    const double extent = cloud_extent(baseline);
    Trainer trainer(std::move(baseline), cfg, extent, cfg.n_iter, cfg.seed + 1);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    GeneratedViewStore store;
    const GeneratorConfig gen_cfg = cfg.generator_config();

    for (int t = 0; t < cfg.n_iter; ++t) {
        if (t % cfg.n_gen == 0 && !pool.empty()) {
            std::uniform_int_distribution<std::size_t> pick_input(0, inputs.size() - 1);
            const std::size_t i = pick_input(rng);
            std::vector<std::size_t> matching;
            for (std::size_t k = 0; k < pool.size(); ++k)
                if (pool.trajectories[k].source == static_cast<int>(i)) matching.push_back(k);
            std::size_t chosen;
            if (matching.empty()) {
                std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
                chosen = d(rng);
            } else {
                std::uniform_int_distribution<std::size_t> d(0, matching.size() - 1);
                chosen = matching[d(rng)];
            }
            const Trajectory& traj = pool.trajectories[chosen];
            const auto model = models(traj);
            if (!model) throw InvalidState("reconstruct: model provider returned no model");
            const ViewRecord& first = inputs.at(static_cast<std::size_t>(traj.source));
            const auto seq = generate(trainer.cloud(), first, traj.poses, *model, decoder, schedule, gen_cfg, rng);
            store.append_sequence(seq.frames, seq.trajectory);
            tr.generation_iterations.push_back(t);
            tr.store_sizes.push_back(store.size());
            tr.generation_sources.push_back(traj.source);
        }

        const double in_loss = trainer.add_input_view(inputs[static_cast<std::size_t>(t) % inputs.size()]);
        double gen_loss = 0.0;
        if (!store.empty()) {
            const PickedView pv = pick_generated_view(store, cfg.eta, rng);
            (pv.source == PickSource::current ? tr.picks_current : tr.picks_global)++;
            gen_loss = trainer.add_generated_view(pv.entry->image, pv.entry->camera);
        }
        trainer.step();
        trainer.maintain(t, cfg.n_iter);
        tr.log.push_back({t, "reconstruct", in_loss, gen_loss, trainer.cloud().size()});
        if (checkpoint && (t + 1) % cfg.checkpoint_interval == 0) checkpoint("reconstruct", t + 1, trainer.cloud());
    }
    return trainer.take_cloud();
}

/// Baseline optimisation, trajectory initialisation, then the generation-augmented loop.
inline GaussianCloud reconstruct(const std::vector<ViewRecord>& inputs, GaussianCloud init, const RunConfig& cfg,
                                 const ModelProvider& models, const LatentDecoder& decoder,
                                 const NoiseSchedule& schedule, ReconstructionTrace* trace = nullptr,
                                 const CheckpointFn& checkpoint = nullptr, TrajectoryPool* pool_out = nullptr) {
    GaussianCloud base = train_baseline(inputs, std::move(init), cfg, trace, checkpoint);
    TrajectoryPool pool = build_pool(inputs, base, cfg.trajectory_config());
    GaussianCloud out = reconstruct_from(inputs, std::move(base), pool, cfg, models, decoder, schedule, trace, checkpoint);
    if (pool_out) *pool_out = std::move(pool);
    return out;
}

}  // namespace splatguide
