// SPDX-License-Identifier: Apache-2.0
#include "tsplat/config.hpp"
#include "tsplat/ply.hpp"
#include "tsplat/synthetic.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tsplat {

namespace {

[[noreturn]] void bad_value(const std::string& s) { throw ConfigError("cannot parse value '" + s + "'"); }

void parse(const std::string& s, std::string& out) { out = s; }

void parse(const std::string& s, double& out) {
    std::istringstream is(s);
    if (!(is >> out) || !(is >> std::ws).eof()) bad_value(s);
}

template <class I> requires std::is_integral_v<I> void parse(const std::string& s, I& out) {
    std::istringstream is(s);
    long long v = 0;
    if (!(is >> v) || !(is >> std::ws).eof()) bad_value(s);
    if (std::is_unsigned_v<I> && v < 0) bad_value(s);
    out = static_cast<I>(v);
}

void parse(const std::string& s, bool& out) {
    if (s == "true" || s == "1") {
        out = true;
    } else if (s == "false" || s == "0") {
        out = false;
    } else {
        bad_value(s);
    }
}

void parse(const std::string& s, Vec3<double>& out) {
    std::istringstream is(s);
    if (!(is >> out[0] >> out[1] >> out[2]) || !(is >> std::ws).eof()) bad_value(s);
}

void parse(const std::string& s, std::optional<double>& out) {
    if (s == "none" || s.empty()) {
        out.reset();
        return;
    }
    double v = 0.0;
    parse(s, v);
    out = v;
}

void parse(const std::string& s, DensifyMetric& out) {
    if (s == "gradient_variance") {
        out = DensifyMetric::gradient_variance;
    } else if (s == "position_gradient") {
        out = DensifyMetric::position_gradient;
    } else {
        bad_value(s);
    }
}

void parse(const std::string& s, OpacitySchedule& out) {
    if (s == "decay") {
        out = OpacitySchedule::decay;
    } else if (s == "hard_reset") {
        out = OpacitySchedule::hard_reset;
    } else {
        bad_value(s);
    }
}

void parse(const std::string& s, RasterKernel& out) {
    if (s == "scanline") {
        out = RasterKernel::scanline;
    } else if (s == "naive") {
        out = RasterKernel::naive;
    } else {
        bad_value(s);
    }
}

std::ostringstream precise() {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
}

std::string fmt(const std::string& v) { return v; }
std::string fmt(double v) {
    auto os = precise();
    os << v;
    return os.str();
}
template <class I> requires std::is_integral_v<I> std::string fmt(I v) {
    if constexpr (std::is_same_v<I, bool>) {
        return v ? "true" : "false";
    } else {
        return std::to_string(v);
    }
}
std::string fmt(const Vec3<double>& v) {
    auto os = precise();
    os << v[0] << ' ' << v[1] << ' ' << v[2];
    return os.str();
}
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }
std::string fmt(DensifyMetric m) {
    return m == DensifyMetric::gradient_variance ? "gradient_variance" : "position_gradient";
}
std::string fmt(OpacitySchedule s) { return s == OpacitySchedule::decay ? "decay" : "hard_reset"; }
std::string fmt(RasterKernel k) { return k == RasterKernel::scanline ? "scanline" : "naive"; }

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define TSPLAT_FIELD(KEY, MEMBER)                                                   \
    Field {                                                                         \
        KEY, [](const RunConfig& c) { return fmt(c.MEMBER); },                      \
            [](RunConfig& c, const std::string& s) { parse(s, c.MEMBER); }          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        TSPLAT_FIELD("data.init_scene", init_scene),
        TSPLAT_FIELD("data.views", views),
        TSPLAT_FIELD("data.output", output),
        TSPLAT_FIELD("train.epochs", train.epochs),
        TSPLAT_FIELD("train.loss_lambda", train.loss_lambda),
        TSPLAT_FIELD("train.resort_interval_epochs", train.resort_interval_epochs),
        TSPLAT_FIELD("train.seed", train.seed),
        TSPLAT_FIELD("lr.position", train.lr.position),
        TSPLAT_FIELD("lr.position_final", train.lr.position_final),
        TSPLAT_FIELD("lr.log_scale", train.lr.log_scale),
        TSPLAT_FIELD("lr.rotation", train.lr.rotation),
        TSPLAT_FIELD("lr.color", train.lr.color),
        TSPLAT_FIELD("lr.opacity", train.lr.opacity),
        TSPLAT_FIELD("lr.position_scaled_by_extent", train.lr.position_scaled_by_extent),
        TSPLAT_FIELD("adam.beta1", train.adam.beta1),
        TSPLAT_FIELD("adam.beta2", train.adam.beta2),
        TSPLAT_FIELD("adam.epsilon", train.adam.epsilon),
        TSPLAT_FIELD("densify.start_epoch", train.densify.start_epoch),
        TSPLAT_FIELD("densify.interval_epochs", train.densify.densify_interval_epochs),
        TSPLAT_FIELD("densify.decay_interval_epochs", train.densify.decay_interval_epochs),
        TSPLAT_FIELD("densify.decay_factor", train.densify.decay_factor),
        TSPLAT_FIELD("densify.decay_active_fraction", train.densify.decay_active_fraction),
        TSPLAT_FIELD("densify.budget", train.densify.budget),
        TSPLAT_FIELD("densify.prune_opacity", train.densify.prune_opacity),
        TSPLAT_FIELD("densify.split_scale_fraction", train.densify.split_scale_fraction),
        TSPLAT_FIELD("densify.split_scale_threshold", train.densify.split_scale_threshold),
        TSPLAT_FIELD("densify.metric", train.densify.metric),
        TSPLAT_FIELD("densify.opacity_schedule", train.densify.opacity_schedule),
        TSPLAT_FIELD("densify.reset_opacity", train.densify.reset_opacity),
        TSPLAT_FIELD("raster.alpha_min", train.raster.alpha_min),
        TSPLAT_FIELD("raster.alpha_max", train.raster.alpha_max),
        TSPLAT_FIELD("raster.t_stop", train.raster.t_stop),
        TSPLAT_FIELD("raster.background", train.raster.background),
        TSPLAT_FIELD("raster.cluster_culling", train.raster.cluster_culling),
        TSPLAT_FIELD("raster.kernel", train.raster.kernel),
        TSPLAT_FIELD("raster.threads", train.raster.threads),
        TSPLAT_FIELD("raster.dilation", train.raster.projection.dilation),
        TSPLAT_FIELD("raster.extent_sigma", train.raster.projection.extent_sigma),
        TSPLAT_FIELD("raster.frustum_guard", train.raster.projection.frustum_guard),
    };
    return table;
}

#undef TSPLAT_FIELD

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        find_field(key).set(cfg, value);
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_field(key).get(cfg); }

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
}

RunConfig parse_config(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw ConfigError("config key '" + section + "' must be inside a section");
        for (const auto& [key, value] : body) {
            set_config_value(cfg, section + "." + key, value.get_value<std::string>());
        }
    }
    cfg.train.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse_config(is);
}

void write_config(std::ostream& os, const RunConfig& cfg) {
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const auto sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) os << '\n';
            os << '[' << sec << "]\n";
            section = sec;
        }
        os << f.key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
    }
}

RunConfig resolve_paths(RunConfig cfg, const std::filesystem::path& base) {
    const auto fix = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    fix(cfg.init_scene);
    fix(cfg.views);
    fix(cfg.output);
    return cfg;
}

TrainResult<float> run_training(const RunConfig& cfg, const TrainObserver<float>* observer) {
    if (cfg.init_scene.empty()) throw ConfigError("data.init_scene is not set");
    if (cfg.views.empty()) throw ConfigError("data.views is not set");
    auto scene = read_ply<float>(std::filesystem::path(cfg.init_scene));
    const auto views = load_views(cfg.views);
    if (views.empty()) throw IoError("no views in '" + cfg.views + "'");
    return train<float>(cfg.train, std::move(scene), views, observer);
}

void write_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg, const TrainResult<float>& result) {
    std::filesystem::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw IoError("cannot write '" + (dir / name).string() + "'");
        return os;
    };
    write_ply(dir / "scene.ply", result.scene);
    {
        auto os = open("metrics.csv");
        write_metrics_csv(os, result.log);
    }
    {
        auto os = open("densify.csv");
        write_densify_log_header(os);
        for (const auto& r : result.densify_log) write_densify_log_row(os, r);
    }
    {
        auto os = open("timing.csv");
        write_timing_csv(os, result.log);
    }
    auto os = open("run.ini");
    write_config(os, cfg);
}

} // namespace tsplat
