#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "splatguide/splatguide.hpp"

namespace fs = std::filesystem;
using namespace splatguide;

namespace {

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out = "out";
    // generate
    int trajectory = 0;
    double gamma0 = -1.0;
    std::string sampler = "ddim";
    int steps = 50;
    double eta_mask = -1.0;
    // eval
    std::string cloud;
};

RunConfig load_config(const Options& o) {
    RunConfig cfg;
    if (!o.config.empty()) {
        std::ifstream is(o.config);
        if (!is) throw InvalidInput("cannot open config " + o.config);
        cfg = read_config(is);
    }
    if (o.seed_set) cfg.seed = o.seed;
    cfg.validate();
    return cfg;
}

SyntheticScene make_scene(const RunConfig& cfg) {
    SceneSpec spec;
    spec.texture_seed = cfg.seed;
    return synthesize_scene(spec);
}

GaussianCloud load_cloud(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw InvalidState("missing artifact " + p.string() + " (run the earlier stage first)");
    return read_cloud(is);
}

void save_cloud(const fs::path& p, const GaussianCloud& c) {
    std::ofstream os(p);
    if (!os) throw InvalidInput("cannot write " + p.string());
    write_cloud(os, c);
}

TrajectoryPool load_pool(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw InvalidState("missing artifact " + p.string() + " (run gen-trajectories first)");
    return read_pool(is);
}

void save_config(const fs::path& dir, const RunConfig& cfg) {
    std::ofstream os(dir / "config.txt");
    write_config(os, cfg);
}

std::string padded(int v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

CheckpointFn checkpoint_writer(const fs::path& dir) {
    fs::create_directories(dir / "checkpoints");
    return [dir](const std::string& phase, int it, const GaussianCloud& c) {
        save_cloud(dir / "checkpoints" / (phase + "_" + padded(it, 6) + ".cloud"), c);
    };
}

void write_views(const fs::path& p, const std::vector<ViewRecord>& views, const char* kind) {
    std::ofstream os(p, std::ios::app);
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& c = views[i].camera;
        const Quaterniond q(c.rotation);
        os << kind << ' ' << i << ' ' << format_double(q.w()) << ' ' << format_double(q.x()) << ' '
           << format_double(q.y()) << ' ' << format_double(q.z()) << ' ' << format_double(c.translation.x()) << ' '
           << format_double(c.translation.y()) << ' ' << format_double(c.translation.z()) << '\n';
    }
}

int cmd_synth(const Options& o) {
    const RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    fs::create_directories(out);
    const auto scene = make_scene(cfg);
    save_cloud(out / "gt.cloud", scene.gt);
    save_cloud(out / "init.cloud", scene.init_cloud);
    fs::remove(out / "views.txt");
    write_views(out / "views.txt", scene.inputs, "input");
    write_views(out / "views.txt", scene.eval_views, "eval");
    for (std::size_t i = 0; i < scene.inputs.size(); ++i)
        write_pnm((out / ("input_" + std::to_string(i) + ".ppm")).string(), scene.inputs[i].image);
    for (std::size_t k = 0; k < scene.eval_views.size(); ++k) {
        write_pnm((out / ("eval_" + std::to_string(k) + ".ppm")).string(), scene.eval_views[k].image);
        write_pnm((out / ("eval_mask_" + std::to_string(k) + ".pgm")).string(), scene.eval_masks[k]);
    }
    save_config(out, cfg);
    std::cout << "scene: " << scene.gt.size() << " ground-truth primitives, " << scene.inputs.size() << " inputs, "
              << scene.eval_views.size() << " eval views\n";
    return 0;
}

int cmd_train_baseline(const Options& o) {
    const RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    fs::create_directories(out);
    const auto scene = make_scene(cfg);
    ReconstructionTrace trace;
    const auto base = train_baseline(scene.inputs, scene.init_cloud, cfg, &trace, checkpoint_writer(out));
    save_cloud(out / "baseline.cloud", base);
    std::ofstream log(out / "baseline_log.csv");
    write_run_log(log, trace.log);
    save_config(out, cfg);
    std::cout << "baseline: " << base.size() << " primitives\n";
    return 0;
}

int cmd_gen_trajectories(const Options& o) {
    const RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    const auto base = load_cloud(out / "baseline.cloud");
    const auto scene = make_scene(cfg);
    const auto pool = build_pool(scene.inputs, base, cfg.trajectory_config());
    std::ofstream os(out / "trajectories.txt");
    write_pool(os, pool);
    std::cout << "trajectory pool: " << pool.size() << " trajectories\n";
    return 0;
}

int cmd_generate(const Options& o) {
    RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    const auto base = load_cloud(out / "baseline.cloud");
    const auto pool = load_pool(out / "trajectories.txt");
    if (pool.empty()) throw InvalidState("trajectory pool is empty");
    if (o.trajectory < 0 || o.trajectory >= static_cast<int>(pool.size()))
        throw InvalidInput("trajectory index out of range");
    const auto scene = make_scene(cfg);
    const Trajectory& tr = pool.trajectories[static_cast<std::size_t>(o.trajectory)];

    GeneratorConfig gen = cfg.generator_config();
    if (o.gamma0 >= 0.0) gen.gamma0 = o.gamma0;
    if (o.eta_mask > 0.0) gen.eta_mask = o.eta_mask;
    if (o.sampler == "ddpm") gen.sampler = SamplerKind::ddpm;
    else if (o.sampler == "ddim") gen.sampler = SamplerKind::ddim;
    else throw InvalidInput("sampler must be ddpm or ddim");
    gen.ddim_steps = o.steps;

    const auto model = build_surrogate_model(scene, tr.poses);
    const auto schedule = make_linear_schedule();
    IdentityDecoder decoder;
    Rng rng(cfg.seed);
    const auto seq = generate(base, scene.inputs.at(static_cast<std::size_t>(tr.source)), tr.poses, model, decoder,
                              schedule, gen, rng);
    const fs::path dir = out / "generated";
    fs::create_directories(dir);
    for (std::size_t j = 0; j < seq.frames.size(); ++j)
        write_pnm((dir / ("frame_" + padded(static_cast<int>(j), 2) + ".ppm")).string(), seq.frames[j]);
    TrajectoryPool single;
    single.trajectories.push_back(tr);
    std::ofstream os(dir / "trajectory.txt");
    write_pool(os, single);
    std::cout << "generated " << seq.frames.size() << " frames; grounded-variant rate "
              << grounded_selection_rate(model, seq.final_latent) << '\n';
    return 0;
}

int cmd_reconstruct(const Options& o) {
    const RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    auto base = load_cloud(out / "baseline.cloud");
    const auto pool = load_pool(out / "trajectories.txt");
    const auto scene = make_scene(cfg);
    const auto schedule = make_linear_schedule();
    IdentityDecoder decoder;
    ModelProvider models = [&scene](const Trajectory& t) {
        return std::make_shared<FrameMixtureModel>(build_surrogate_model(scene, t.poses));
    };
    ReconstructionTrace trace;
    const auto cloud = reconstruct_from(scene.inputs, std::move(base), pool, cfg, models, decoder, schedule, &trace,
                                        checkpoint_writer(out));
    for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
    save_cloud(out / "reconstruct.cloud", cloud);
    std::ofstream log(out / "run_log.csv");
    write_run_log(log, trace.log);
    save_config(out, cfg);
    std::cout << "reconstruct: " << trace.generation_iterations.size() << " generation events, " << cloud.size()
              << " primitives\n";
    return 0;
}

int cmd_eval(const Options& o) {
    const RunConfig cfg = load_config(o);
    const fs::path out = o.out;
    const fs::path cloud_path = o.cloud.empty() ? out / "reconstruct.cloud" : fs::path(o.cloud);
    const auto cloud = load_cloud(cloud_path);
    const auto scene = make_scene(cfg);
    const auto report = evaluate(cloud, scene);
    std::ofstream os(out / "metrics.csv");
    write_report(os, report);
    for (Split s : {Split::full, Split::observable, Split::unobservable}) {
        const auto& m = report.mean(s);
        std::cout << split_name(s) << ": psnr " << m.psnr << " ssim " << m.ssim << " perceptual " << m.perceptual << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"splatguide: sparse-view Gaussian splatting with scene-grounded sequence generation"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "key=value run configuration");
        sub->add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& s) {
            o.seed = s;
            o.seed_set = true;
        }, "seed (overrides the config)");
        sub->add_option("--out", o.out, "artifact directory");
    };
    auto* synth = app.add_subcommand("synth", "synthesise the scene and write its views");
    auto* train = app.add_subcommand("train-baseline", "optimise on the input views only");
    auto* traj = app.add_subcommand("gen-trajectories", "build the trajectory pool from the baseline");
    auto* gen = app.add_subcommand("generate", "generate one guided sequence");
    auto* rec = app.add_subcommand("reconstruct", "generation-augmented optimisation");
    auto* ev = app.add_subcommand("eval", "metrics on the eval views");
    for (auto* s : {synth, train, traj, gen, rec, ev}) common(s);
    gen->add_option("--trajectory", o.trajectory, "index into the trajectory pool");
    gen->add_option("--gamma0", o.gamma0, "guidance scale");
    gen->add_option("--sampler", o.sampler, "ddpm or ddim");
    gen->add_option("--steps", o.steps, "DDIM steps");
    gen->add_option("--eta-mask", o.eta_mask, "coverage threshold for the guidance mask");
    ev->add_option("--cloud", o.cloud, "cloud to evaluate (default <out>/reconstruct.cloud)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) return cmd_synth(o);
        if (*train) return cmd_train_baseline(o);
        if (*traj) return cmd_gen_trajectories(o);
        if (*gen) return cmd_generate(o);
        if (*rec) return cmd_reconstruct(o);
        if (*ev) return cmd_eval(o);
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const InvalidState& e) {
        std::cerr << "invalid state: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
