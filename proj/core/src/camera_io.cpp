// SPDX-License-Identifier: Apache-2.0
#include "tsplat/camera_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tsplat {

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& key) {
    std::istringstream is(text);
    std::vector<double> out;
    double v = 0.0;
    while (is >> v) out.push_back(v);
    if (!is.eof() || out.size() != expected) {
        throw IoError("camera key '" + key + "' needs " + std::to_string(expected) + " numbers");
    }
    return out;
}

} // namespace

void write_camera(std::ostream& os, const CameraView& cam) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10);
    s << "width = " << cam.width << '\n';
    s << "height = " << cam.height << '\n';
    s << "focal = " << cam.focal.x() << ' ' << cam.focal.y() << '\n';
    s << "principal_point = " << cam.principal_point.x() << ' ' << cam.principal_point.y() << '\n';
    s << "near = " << cam.near << '\n';
    s << "far = " << cam.far << '\n';
    s << "world_to_camera =";
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) s << ' ' << cam.world_to_camera(r, c);
    s << '\n';
    os << s.str();
}

void write_camera(const std::filesystem::path& path, const CameraView& cam) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_camera(os, cam);
}

CameraView read_camera(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw IoError(std::string("malformed camera file: ") + e.what());
    }
    auto get = [&](const std::string& key) {
        const auto v = tree.get_optional<std::string>(key);
        if (!v) throw IoError("camera file is missing key '" + key + "'");
        return *v;
    };
    CameraView cam;
    cam.width = static_cast<int>(parse_numbers(get("width"), 1, "width")[0]);
    cam.height = static_cast<int>(parse_numbers(get("height"), 1, "height")[0]);
    const auto f = parse_numbers(get("focal"), 2, "focal");
    cam.focal = {f[0], f[1]};
    const auto pp = parse_numbers(get("principal_point"), 2, "principal_point");
    cam.principal_point = {pp[0], pp[1]};
    cam.near = parse_numbers(get("near"), 1, "near")[0];
    cam.far = parse_numbers(get("far"), 1, "far")[0];
    const auto m = parse_numbers(get("world_to_camera"), 16, "world_to_camera");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = m[static_cast<std::size_t>(r * 4 + c)];
    for (const auto& kv : tree) {
        static const char* known[] = {"width", "height", "focal", "principal_point", "near", "far", "world_to_camera"};
        if (std::find(std::begin(known), std::end(known), kv.first) == std::end(known)) {
            throw IoError("camera file has unknown key '" + kv.first + "'");
        }
    }
    try {
        cam.validate();
    } catch (const ConfigError& e) {
        throw IoError(std::string("invalid camera: ") + e.what());
    }
    return cam;
}

CameraView read_camera(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open camera file '" + path.string() + "'");
    return read_camera(is);
}

} // namespace tsplat
