// SPDX-License-Identifier: Apache-2.0
#include "tsplat/synthetic.hpp"

#include "tsplat/camera_io.hpp"
#include "tsplat/config.hpp"
#include "tsplat/image_io.hpp"
#include "tsplat/ply.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace tsplat {

namespace {

constexpr double kRingRadius = 2.0;    // times the extent
constexpr double kFieldOfView = 45.0;  // degrees, horizontal
constexpr double kGaussianElevation = 25.0;
constexpr double kBoardElevation = 60.0;

Vec4<double> random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4<double> q(n(rng), n(rng), n(rng), n(rng));
    const double len = q.norm();
    return len > 1e-12 ? Vec4<double>(q / len) : Vec4<double>(1, 0, 0, 0);
}

ParamChannels<double> random_gaussians(const SyntheticSpec& spec, std::mt19937_64& rng) {
    const double e = spec.scene_extent;
    std::uniform_real_distribution<double> pos(-0.5 * e, 0.5 * e);
    std::uniform_real_distribution<double> log_s(std::log(0.03 * e), std::log(0.12 * e));
    std::normal_distribution<double> col(0.0, 1.5);
    std::uniform_real_distribution<double> op(logit(0.5), logit(0.95));
    ParamChannels<double> p;
    for (std::size_t i = 0; i < spec.n_gaussians; ++i) {
        RawParams<double> r;
        r.position = {pos(rng), pos(rng), pos(rng)};
        r.log_scale = {log_s(rng), log_s(rng), log_s(rng)};
        r.rotation = random_rotation(rng);
        r.color = {col(rng), col(rng), col(rng)};
        r.opacity_logit = op(rng);
        p.push_back(r);
    }
    return p;
}

ParamChannels<double> two_tone_board(const SyntheticSpec& spec, std::mt19937_64& rng) {
    const double e = spec.scene_extent;
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(spec.n_gaussians))));
    const double spacing = e / static_cast<double>(side);
    std::uniform_real_distribution<double> jitter(-0.25 * spacing, 0.25 * spacing);
    const Vec3<double> tone_a(logit(0.85), logit(0.25), logit(0.15));
    const Vec3<double> tone_b(logit(0.15), logit(0.35), logit(0.85));
    ParamChannels<double> p;
    for (std::size_t i = 0; i < spec.n_gaussians; ++i) {
        const double gx = static_cast<double>(i % side);
        const double gy = static_cast<double>(i / side);
        RawParams<double> r;
        r.position = {-0.5 * e + (gx + 0.5) * spacing + jitter(rng), -0.5 * e + (gy + 0.5) * spacing + jitter(rng),
                      0.0};
        r.log_scale = {std::log(0.6 * spacing), std::log(0.6 * spacing), std::log(0.01 * e)};
        r.rotation = {1.0, 0.0, 0.0, 0.0};
        r.color = r.position.x() < 0.0 ? tone_a : tone_b;
        r.opacity_logit = logit(0.9);
        p.push_back(r);
    }
    return p;
}

ParamChannels<double> perturbed_init(const SyntheticSpec& spec, const ParamChannels<double>& gt,
                                     std::mt19937_64& rng) {
    std::vector<std::uint32_t> idx(gt.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(spec.n_init, idx.size()));
    std::sort(idx.begin(), idx.end());
    std::normal_distribution<double> n(0.0, 1.0);
    const double sigma = spec.init_position_noise * spec.scene_extent;
    ParamChannels<double> p;
    for (auto i : idx) {
        auto r = gt.get(i);
        r.position += sigma * Vec3<double>(n(rng), n(rng), n(rng));
        r.log_scale.array() += std::log(1.5);
        r.color += 0.5 * Vec3<double>(n(rng), n(rng), n(rng));
        r.opacity_logit = 0.0;
        p.push_back(r);
    }
    return p;
}

} // namespace

void SyntheticSpec::validate() const {
    if (n_views < 1) throw ConfigError("synthetic spec needs n_views >= 1");
    if (width < 16 || height < 16) throw ConfigError("synthetic resolution must be at least 16 x 16");
    if (!(scene_extent > 0.0)) throw ConfigError("scene_extent must be positive");
    if (n_init > n_gaussians) throw ConfigError("n_init must not exceed n_gaussians");
}

SyntheticSpec parse_synthetic_spec(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
    }
    SyntheticSpec s;
    for (const auto& [section, body] : tree) {
        if (section != "synthetic") throw ConfigError("unknown synthetic spec section '" + section + "'");
        for (const auto& [key, node] : body) {
            const auto v = node.get_value<std::string>();
            std::istringstream in(v);
            bool ok = true;
            if (key == "n_gaussians") {
                ok = static_cast<bool>(in >> s.n_gaussians);
            } else if (key == "scene_extent") {
                ok = static_cast<bool>(in >> s.scene_extent);
            } else if (key == "n_views") {
                ok = static_cast<bool>(in >> s.n_views);
            } else if (key == "width") {
                ok = static_cast<bool>(in >> s.width);
            } else if (key == "height") {
                ok = static_cast<bool>(in >> s.height);
            } else if (key == "seed") {
                ok = static_cast<bool>(in >> s.seed);
            } else if (key == "n_init") {
                ok = static_cast<bool>(in >> s.n_init);
            } else if (key == "init_position_noise") {
                ok = static_cast<bool>(in >> s.init_position_noise);
            } else if (key == "background") {
                ok = static_cast<bool>(in >> s.background[0] >> s.background[1] >> s.background[2]);
            } else if (key == "target_kind") {
                if (v == "random_gaussians") {
                    s.target_kind = TargetKind::random_gaussians;
                } else if (v == "two_tone_board") {
                    s.target_kind = TargetKind::two_tone_board;
                } else {
                    ok = false;
                }
                in.setstate(std::ios::eofbit);
            } else {
                throw ConfigError("unknown synthetic spec key '" + key + "'");
            }
            if (!ok || !(in >> std::ws).eof()) throw ConfigError("cannot parse synthetic." + key + " = '" + v + "'");
        }
    }
    s.validate();
    return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open synthetic spec '" + path.string() + "'");
    return parse_synthetic_spec(is);
}

void write_synthetic_spec(std::ostream& os, const SyntheticSpec& s) {
    std::ostringstream o;
    o << std::setprecision(std::numeric_limits<double>::max_digits10);
    o << "[synthetic]\n"
      << "n_gaussians = " << s.n_gaussians << '\n'
      << "scene_extent = " << s.scene_extent << '\n'
      << "n_views = " << s.n_views << '\n'
      << "width = " << s.width << '\n'
      << "height = " << s.height << '\n'
      << "seed = " << s.seed << '\n'
      << "target_kind = " << (s.target_kind == TargetKind::random_gaussians ? "random_gaussians" : "two_tone_board")
      << '\n'
      << "n_init = " << s.n_init << '\n'
      << "init_position_noise = " << s.init_position_noise << '\n'
      << "background = " << s.background[0] << ' ' << s.background[1] << ' ' << s.background[2] << '\n';
    os << o.str();
}

std::vector<CameraView> ring_cameras(const SyntheticSpec& spec, const Vec3<double>& centroid) {
    const double elevation =
        (spec.target_kind == TargetKind::two_tone_board ? kBoardElevation : kGaussianElevation) * std::numbers::pi /
        180.0;
    const double radius = kRingRadius * spec.scene_extent;
    const double focal = 0.5 * spec.width / std::tan(0.5 * kFieldOfView * std::numbers::pi / 180.0);
    std::vector<CameraView> cams;
    for (int k = 0; k < spec.n_views; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / spec.n_views;
        const Vec3<double> eye = centroid + radius * Vec3<double>(std::cos(angle) * std::cos(elevation),
                                                                  std::sin(angle) * std::cos(elevation),
                                                                  std::sin(elevation));
        auto cam = CameraView::look_at(eye, centroid, Vec3<double>(0, 0, 1), focal, spec.width, spec.height);
        cam.far = 10.0 * radius;
        cams.push_back(cam);
    }
    return cams;
}

SyntheticScene make_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    auto gt64 = spec.target_kind == TargetKind::random_gaussians ? random_gaussians(spec, rng)
                                                                  : two_tone_board(spec, rng);
    auto init64 = perturbed_init(spec, gt64, rng);

    SyntheticScene out;
    out.ground_truth = Scene(gt64.cast<float>());
    out.initial = Scene(init64.cast<float>());
    const Scene64 reference = out.ground_truth.cast<double>();

    Vec3<double> centroid = Vec3<double>::Zero();
    for (const auto& p : reference.params().position) centroid += p;
    if (!reference.empty()) centroid /= static_cast<double>(reference.size());

    RasterConfig raster;
    raster.background = spec.background;
    const auto cams = ring_cameras(spec, centroid);
    for (std::size_t k = 0; k < cams.size(); ++k) {
        auto target = render(reference, cams[k], raster).output.color;
        std::ostringstream name;
        name << "view_" << std::setw(3) << std::setfill('0') << k;
        out.views.push_back({name.str(), cams[k], target.cast<float>()});
        out.targets64.push_back(std::move(target));
    }
    return out;
}

TrainConfig synthetic_train_config(const SyntheticSpec& spec) {
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.seed = spec.seed;
    // Rates tuned for 8 views x 60 epochs.
    cfg.lr.position = 2.56e-3;
    cfg.lr.position_final = 2.56e-4;
    cfg.lr.log_scale = 4e-2;
    cfg.lr.rotation = 4e-3;
    cfg.lr.color = 5e-2;
    cfg.densify.budget = spec.n_gaussians;
    cfg.raster.background = spec.background;
    return cfg;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticScene& scene, const SyntheticSpec& spec) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "views");
    write_ply(dir / "scene.ply", scene.ground_truth);
    write_ply(dir / "init.ply", scene.initial);
    for (std::size_t k = 0; k < scene.views.size(); ++k) {
        const auto& v = scene.views[k];
        write_camera(dir / "views" / (v.name + ".cam"), v.camera);
        write_png(dir / "views" / (v.name + ".png"), scene.targets64[k]);
    }
    {
        std::ofstream os(dir / "spec.ini");
        write_synthetic_spec(os, spec);
    }
    RunConfig run;
    run.train = synthetic_train_config(spec);
    run.init_scene = "init.ply";
    run.views = "views";
    run.output = "run";
    std::ofstream os(dir / "train.ini");
    if (!os) throw IoError("cannot write '" + (dir / "train.ini").string() + "'");
    write_config(os, run);
}

std::vector<TrainView<float>> load_views(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("views directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> cams;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".cam") cams.push_back(entry.path());
    }
    std::sort(cams.begin(), cams.end());
    std::vector<TrainView<float>> views;
    for (const auto& c : cams) {
        TrainView<float> v;
        v.name = c.stem().string();
        v.camera = read_camera(c);
        auto png = c;
        png.replace_extension(".png");
        auto ppm = c;
        ppm.replace_extension(".ppm");
        if (fs::exists(png)) {
            v.target = read_image(png);
        } else if (fs::exists(ppm)) {
            v.target = read_image(ppm);
        } else {
            throw IoError("no image found for camera '" + c.string() + "'");
        }
        if (v.target.width != v.camera.width || v.target.height != v.camera.height) {
            throw IoError("image size of view '" + v.name + "' does not match its camera");
        }
        views.push_back(std::move(v));
    }
    if (views.empty()) throw IoError("no *.cam files in '" + dir.string() + "'");
    return views;
}

} // namespace tsplat
