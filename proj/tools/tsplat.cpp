// SPDX-License-Identifier: Apache-2.0
#include "tsplat/camera_io.hpp"
#include "tsplat/config.hpp"
#include "tsplat/experiments.hpp"
#include "tsplat/image_io.hpp"
#include "tsplat/metrics.hpp"
#include "tsplat/ply.hpp"
#include "tsplat/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tsplat;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

Vec3<double> parse_rgb(const std::string& text) {
    std::istringstream is(text);
    Vec3<double> c;
    char sep = 0;
    if (!(is >> c[0] >> sep >> c[1] >> sep >> c[2]) || sep != ',') {
        throw ConfigError("expected r,g,b but got '" + text + "'");
    }
    return c;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    return os;
}

// Rendered images are compared after the same 8-bit quantization the
// targets went through.
Image<float> quantized(const Image<float>& img) {
    Image<float> out = img;
    for (auto& v : out.data) v = static_cast<float>(to_byte(v)) / 255.0f;
    return out;
}

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::optional<int> threads;
    std::optional<std::string> output;
    std::vector<std::string> overrides;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    const fs::path config_path(a.config);
    RunConfig cfg = load_config(config_path);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not section.key=value");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.output) cfg.output = *a.output;
    if (a.threads) cfg.train.raster.threads = *a.threads;
    if (a.deterministic) cfg.train.raster.threads = 1;
    cfg = resolve_paths(cfg, config_path.parent_path());
    if (cfg.output.empty()) throw ConfigError("data.output is not set");

    TrainObserver<float> obs;
    if (!a.quiet) {
        obs.after_epoch = [](const EpochLog& e) {
            std::cout << "epoch " << e.epoch << " loss " << std::fixed << std::setprecision(5) << e.loss << " psnr "
                      << std::setprecision(3) << e.psnr << " primitives " << e.primitives << " time "
                      << std::setprecision(2) << e.seconds_total << "s" << std::defaultfloat << "\n";
        };
    }
    const auto result = run_training(cfg, &obs);
    write_checkpoint(cfg.output, cfg, result);
    std::cout << "wrote " << cfg.output << " (" << result.scene.size() << " primitives)\n";
    return 0;
}

struct RenderArgs {
    std::string scene;
    std::string camera;
    std::string out;
    std::string background = "0,0,0";
    std::string kernel = "scanline";
    bool half = false;
};

int cmd_render(const RenderArgs& a) {
    const auto scene = read_ply<float>(fs::path(a.scene));
    const auto cam = read_camera(fs::path(a.camera));
    RasterConfig cfg;
    cfg.background = parse_rgb(a.background);
    cfg.kernel = a.kernel == "naive" ? RasterKernel::naive : RasterKernel::scanline;
    const Image<float> img = a.half ? render_half(scene, cam, cfg).color : render<float>(scene, cam, cfg).output.color;
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    write_image(a.out, img);
    return 0;
}

struct EvalArgs {
    std::string scene;
    std::string views;
    std::string background = "0,0,0";
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    const auto scene = read_ply<float>(fs::path(a.scene));
    const auto views = load_views(a.views);
    if (views.empty()) throw IoError("no views in '" + a.views + "'");
    RasterConfig cfg;
    cfg.background = parse_rgb(a.background);
    std::ostringstream csv;
    csv << std::setprecision(8) << "view,psnr,ssim\n";
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    for (const auto& v : views) {
        const auto img = quantized(render<float>(scene, v.camera, cfg).output.color);
        const double p = psnr(img, v.target);
        const double s = ssim(img, v.target);
        csv << v.name << ',' << p << ',' << s << '\n';
        mean_psnr += p / static_cast<double>(views.size());
        mean_ssim += s / static_cast<double>(views.size());
    }
    csv << "mean," << mean_psnr << ',' << mean_ssim << '\n';
    std::cout << csv.str();
    if (!a.out.empty()) open_output(a.out) << csv.str();
    return 0;
}

struct BenchArgs {
    std::vector<std::size_t> counts{50000, 200000};
    std::string out;
    int width = 256;
    int height = 256;
    int repeats = 3;
    int threads = 1;
    std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
    BenchConfig cfg;
    cfg.primitive_counts = a.counts;
    cfg.width = a.width;
    cfg.height = a.height;
    cfg.repeats = a.repeats;
    cfg.threads = a.threads;
    cfg.seed = a.seed;
    const auto rows = run_bench(cfg);
    std::ostringstream csv;
    write_bench_csv(csv, rows);
    std::cout << csv.str();
    if (!a.out.empty()) open_output(a.out) << csv.str();
    return 0;
}

struct AblateArgs {
    std::string suite;
    int seeds = 3;
    std::string out;
    std::string runs_out;
    std::optional<int> epochs;
};

int cmd_ablate(const AblateArgs& a) {
    std::vector<fs::path> files;
    if (fs::is_directory(a.suite)) {
        for (const auto& e : fs::directory_iterator(a.suite)) {
            if (e.path().extension() == ".ini") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.emplace_back(a.suite);
    }
    if (files.empty()) throw IoError("no .ini specs in '" + a.suite + "'");
    std::vector<std::pair<std::string, SyntheticSpec>> suite;
    for (const auto& f : files) suite.emplace_back(f.stem().string(), load_synthetic_spec(f));
    auto base = synthetic_train_config(suite.front().second);
    if (a.epochs) base.epochs = *a.epochs;
    const auto result = run_ablation(suite, a.seeds, base);
    std::ostringstream csv;
    write_ablation_csv(csv, result);
    std::cout << csv.str();
    if (!a.out.empty()) open_output(a.out) << csv.str();
    if (!a.runs_out.empty()) {
        auto os = open_output(a.runs_out);
        write_ablation_runs_csv(os, result);
    }
    return 0;
}

struct SyntheticArgs {
    std::string spec;
    std::string out;
};

int cmd_make_synthetic(const SyntheticArgs& a) {
    const auto spec = load_synthetic_spec(fs::path(a.spec));
    const auto scene = make_synthetic(spec);
    write_synthetic(a.out, scene, spec);
    std::cout << "wrote " << a.out << " (" << scene.ground_truth.size() << " primitives, " << scene.views.size()
              << " views)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tile-based Gaussian splatting trainer and renderer"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tsplat 0.1.0");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a scene from a run config");
    train->add_option("--config", train_args.config, "Run config (INI)")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", train_args.seed, "Override train.seed");
    train->add_flag("--deterministic", train_args.deterministic, "Single-threaded, bit-reproducible run");
    train->add_option("--threads", train_args.threads, "Tile worker threads");
    train->add_option("--output", train_args.output, "Override data.output");
    train->add_option("--set", train_args.overrides, "Override a config field: section.key=value");
    train->add_flag("--quiet", train_args.quiet, "No per-epoch progress");

    RenderArgs render_args;
    auto* render_cmd = app.add_subcommand("render", "Render a PLY scene from a camera file");
    render_cmd->add_option("--scene", render_args.scene, "Scene PLY")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--camera", render_args.camera, "Camera file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--out", render_args.out, "Output image (.png or .ppm)")->required();
    render_cmd->add_option("--background", render_args.background, "Background r,g,b");
    render_cmd->add_option("--kernel", render_args.kernel, "Gaussian kernel")
        ->check(CLI::IsMember({"scanline", "naive"}));
    render_cmd->add_flag("--half", render_args.half, "Use the binary16 blending path");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "PSNR and SSIM of a scene against a views directory");
    eval->add_option("--scene", eval_args.scene, "Scene PLY")->required()->check(CLI::ExistingFile);
    eval->add_option("--views", eval_args.views, "Directory of .cam files and images")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--background", eval_args.background, "Background r,g,b");
    eval->add_option("--out", eval_args.out, "Also write the CSV here");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time the forward and backward passes");
    bench->add_option("--n", bench_args.counts, "Primitive counts")->delimiter(',');
    bench->add_option("--out", bench_args.out, "Output CSV");
    bench->add_option("--width", bench_args.width, "Image width")->check(CLI::PositiveNumber);
    bench->add_option("--height", bench_args.height, "Image height")->check(CLI::PositiveNumber);
    bench->add_option("--repeats", bench_args.repeats, "Repeats per measurement")->check(CLI::PositiveNumber);
    bench->add_option("--threads", bench_args.threads, "Tile worker threads")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_args.seed, "Scene seed");

    AblateArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "Run the four ablation arms on a synthetic suite");
    ablate->add_option("--suite", ablate_args.suite, "Directory of synthetic spec .ini files, or one file")
        ->required()
        ->check(CLI::ExistingPath);
    ablate->add_option("--seeds", ablate_args.seeds, "Seeds per spec")->check(CLI::PositiveNumber);
    ablate->add_option("--out", ablate_args.out, "Summary CSV");
    ablate->add_option("--runs-out", ablate_args.runs_out, "Per-run CSV");
    ablate->add_option("--epochs", ablate_args.epochs, "Override the epoch count")->check(CLI::PositiveNumber);

    SyntheticArgs synth_args;
    auto* synth = app.add_subcommand("make-synthetic", "Generate a synthetic scene, cameras and targets");
    synth->add_option("--spec", synth_args.spec, "Synthetic spec (INI)")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", synth_args.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train) return cmd_train(train_args);
        if (*render_cmd) return cmd_render(render_args);
        if (*eval) return cmd_eval(eval_args);
        if (*bench) return cmd_bench(bench_args);
        if (*ablate) return cmd_ablate(ablate_args);
        if (*synth) return cmd_make_synthetic(synth_args);
    } catch (const std::exception& e) {
        std::cerr << "tsplat: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
