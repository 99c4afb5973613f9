// SPDX-License-Identifier: Apache-2.0
#include "tsplat/ply.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace tsplat {

namespace {

constexpr std::array<const char*, 14> kProperties = {
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1",
    "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};

constexpr std::size_t kPropertyCount = kProperties.size();

template <class U> U from_little(U v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(U)];
        std::memcpy(b, &v, sizeof(U));
        for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
        std::memcpy(&v, b, sizeof(U));
        return v;
    }
}

std::size_t type_size(const std::string& t) {
    static const std::map<std::string, std::size_t> sizes = {
        {"char", 1}, {"uchar", 1}, {"int8", 1}, {"uint8", 1}, {"short", 2}, {"ushort", 2},
        {"int16", 2}, {"uint16", 2}, {"int", 4}, {"uint", 4}, {"int32", 4}, {"uint32", 4},
        {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
    const auto it = sizes.find(t);
    if (it == sizes.end()) throw IoError("ply: unsupported property type '" + t + "'");
    return it->second;
}

double decode(const std::string& t, const unsigned char* p) {
    auto get = [&](auto tag) {
        decltype(tag) v;
        std::memcpy(&v, p, sizeof(v));
        return static_cast<double>(from_little(v));
    };
    if (t == "float" || t == "float32") return get(float{});
    if (t == "double" || t == "float64") return get(double{});
    if (t == "char" || t == "int8") return get(std::int8_t{});
    if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
    if (t == "short" || t == "int16") return get(std::int16_t{});
    if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
    if (t == "int" || t == "int32") return get(std::int32_t{});
    return get(std::uint32_t{});
}

} // namespace

template <class T> void write_ply(std::ostream& os, const BasicScene<T>& scene) {
    const auto& p = scene.params();
    os << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << '\n';
    for (std::size_t k = 0; k < kPropertyCount; ++k) os << "property float " << kProperties[k] << '\n';
    os << "end_header\n";
    std::vector<float> row(kPropertyCount);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        std::size_t k = 0;
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(p.position[i][c]);
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(p.color[i][c]);
        row[k++] = static_cast<float>(p.opacity_logit[i]);
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(p.log_scale[i][c]);
        for (int c = 0; c < 4; ++c) row[k++] = static_cast<float>(p.rotation[i][c]);
        for (auto& v : row) v = from_little(v);
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!os) throw IoError("ply: write failed");
}

template <class T> void write_ply(const std::filesystem::path& path, const BasicScene<T>& scene) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_ply(os, scene);
}

template <class T> BasicScene<T> read_ply(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "ply") throw IoError("ply: missing magic line");
    std::size_t count = 0;
    bool in_vertex = false;
    bool seen_vertex = false;
    bool format_ok = false;
    struct Prop {
        std::string name;
        std::string type;
        std::size_t offset;
    };
    std::vector<Prop> props;
    std::size_t stride = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "end_header") break;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian") throw IoError("ply: only binary_little_endian is supported");
            format_ok = true;
        } else if (word == "element") {
            std::string name;
            std::size_t n = 0;
            ls >> name >> n;
            if (seen_vertex && name != "vertex") break;
            in_vertex = name == "vertex";
            if (in_vertex) {
                count = n;
                seen_vertex = true;
            }
        } else if (word == "property" && in_vertex) {
            std::string type, name;
            ls >> type;
            if (type == "list") throw IoError("ply: list properties are not supported on vertices");
            ls >> name;
            props.push_back({name, type, stride});
            stride += type_size(type);
        } else if (word != "comment" && word != "obj_info" && word != "property" && !word.empty()) {
            throw IoError("ply: unexpected header line '" + line + "'");
        }
    }
    if (!format_ok) throw IoError("ply: missing format line");
    if (!seen_vertex) throw IoError("ply: missing vertex element");

    std::array<const Prop*, kPropertyCount> slots{};
    for (std::size_t k = 0; k < kPropertyCount; ++k) {
        for (const auto& pr : props)
            if (pr.name == kProperties[k]) slots[k] = &pr;
        if (!slots[k]) throw IoError(std::string("ply: missing vertex property '") + kProperties[k] + "'");
    }

    ParamChannels<T> params;
    std::vector<unsigned char> buf(stride);
    for (std::size_t i = 0; i < count; ++i) {
        if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(stride))) {
            throw IoError("ply: truncated vertex data");
        }
        double v[kPropertyCount];
        for (std::size_t k = 0; k < kPropertyCount; ++k) v[k] = decode(slots[k]->type, buf.data() + slots[k]->offset);
        RawParams<T> r;
        r.position = Vec3<double>(v[0], v[1], v[2]).cast<T>();
        r.color = Vec3<double>(v[3], v[4], v[5]).cast<T>();
        r.opacity_logit = static_cast<T>(v[6]);
        r.log_scale = Vec3<double>(v[7], v[8], v[9]).cast<T>();
        r.rotation = Vec4<double>(v[10], v[11], v[12], v[13]).cast<T>();
        params.push_back(r);
    }
    return BasicScene<T>(std::move(params));
}

template <class T> BasicScene<T> read_ply(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    return read_ply<T>(is);
}

#define TSPLAT_INSTANTIATE(T)                                                        \
    template void write_ply<T>(std::ostream&, const BasicScene<T>&);                 \
    template void write_ply<T>(const std::filesystem::path&, const BasicScene<T>&);  \
    template BasicScene<T> read_ply<T>(std::istream&);                               \
    template BasicScene<T> read_ply<T>(const std::filesystem::path&);

TSPLAT_INSTANTIATE(float)
TSPLAT_INSTANTIATE(double)
#undef TSPLAT_INSTANTIATE

} // namespace tsplat
