// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/io/ply.h"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "byte_io.h"
#include "xsreg/core/error.h"

namespace xsreg::io {

namespace {

enum class Encoding { kAscii, kBinaryLittleEndian };

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_type(std::string_view s) {
    if (s == "char" || s == "int8") return ScalarType::kInt8;
    if (s == "uchar" || s == "uint8") return ScalarType::kUInt8;
    if (s == "short" || s == "int16") return ScalarType::kInt16;
    if (s == "ushort" || s == "uint16") return ScalarType::kUInt16;
    if (s == "int" || s == "int32") return ScalarType::kInt32;
    if (s == "uint" || s == "uint32") return ScalarType::kUInt32;
    if (s == "float" || s == "float32") return ScalarType::kFloat32;
    if (s == "double" || s == "float64") return ScalarType::kFloat64;
    return std::nullopt;
}

std::size_t type_size(ScalarType t) {
    switch (t) {
        case ScalarType::kInt8:
        case ScalarType::kUInt8: return 1;
        case ScalarType::kInt16:
        case ScalarType::kUInt16: return 2;
        case ScalarType::kInt32:
        case ScalarType::kUInt32:
        case ScalarType::kFloat32: return 4;
        case ScalarType::kFloat64: return 8;
    }
    return 0;
}

double load_scalar(ScalarType t, const unsigned char *p) {
    using detail::load_le;
    switch (t) {
        case ScalarType::kInt8: return load_le<int8_t>(p);
        case ScalarType::kUInt8: return load_le<uint8_t>(p);
        case ScalarType::kInt16: return load_le<int16_t>(p);
        case ScalarType::kUInt16: return load_le<uint16_t>(p);
        case ScalarType::kInt32: return load_le<int32_t>(p);
        case ScalarType::kUInt32: return load_le<uint32_t>(p);
        case ScalarType::kFloat32: return load_le<float>(p);
        case ScalarType::kFloat64: return load_le<double>(p);
    }
    return 0.0;
}

struct Property {
    std::string name;
    ScalarType type = ScalarType::kFloat32;
    bool is_list = false;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

struct Header {
    Encoding encoding = Encoding::kAscii;
    std::vector<Element> elements;
    std::size_t payload_offset = 0;
};

[[noreturn]] void fail(const std::filesystem::path &path, std::size_t offset, const std::string &what) {
    throw FormatError(fmt::format("{}: {} (byte offset {})", path.string(), what, offset));
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

Header parse_header(const std::string &data, const std::filesystem::path &path) {
    Header h;
    std::size_t pos = 0;
    bool saw_format = false;
    bool first = true;
    while (true) {
        const std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) fail(path, pos, "header is not terminated by end_header");
        std::string_view line(data.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t line_offset = pos;
        pos = eol + 1;
        const auto tok = split_ws(line);
        if (first) {
            if (tok.size() != 1 || tok[0] != "ply") fail(path, 0, "missing 'ply' magic");
            first = false;
            continue;
        }
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() < 2) fail(path, line_offset, "malformed format line");
            if (tok[1] == "ascii") {
                h.encoding = Encoding::kAscii;
            } else if (tok[1] == "binary_little_endian") {
                h.encoding = Encoding::kBinaryLittleEndian;
            } else {
                fail(path, line_offset, fmt::format("unsupported encoding '{}'", tok[1]));
            }
            saw_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) fail(path, line_offset, "malformed element line");
            Element e;
            e.name = std::string(tok[1]);
            auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), e.count);
            if (ec != std::errc() || ptr != tok[2].data() + tok[2].size()) {
                fail(path, line_offset, "malformed element count");
            }
            h.elements.push_back(std::move(e));
        } else if (tok[0] == "property") {
            if (h.elements.empty()) fail(path, line_offset, "property before any element");
            Property p;
            if (tok.size() == 5 && tok[1] == "list") {
                if (!parse_type(tok[2]) || !parse_type(tok[3])) fail(path, line_offset, "unknown list type");
                p.is_list = true;
                p.name = std::string(tok[4]);
            } else if (tok.size() == 3) {
                const auto t = parse_type(tok[1]);
                if (!t) fail(path, line_offset, fmt::format("unknown property type '{}'", tok[1]));
                p.type = *t;
                p.name = std::string(tok[2]);
            } else {
                fail(path, line_offset, "malformed property line");
            }
            h.elements.back().properties.push_back(std::move(p));
        } else {
            fail(path, line_offset, fmt::format("unexpected header keyword '{}'", tok[0]));
        }
    }
    if (!saw_format) fail(path, 0, "header has no format line");
    h.payload_offset = pos;
    return h;
}

struct VertexLayout {
    int x = -1, y = -1, z = -1, nx = -1, ny = -1, nz = -1;
};

VertexLayout locate(const Element &vertex, const std::filesystem::path &path, std::size_t offset) {
    VertexLayout l;
    for (int i = 0; i < static_cast<int>(vertex.properties.size()); ++i) {
        const auto &p = vertex.properties[i];
        if (p.is_list) fail(path, offset, "unknown element layout: list property in vertex element");
        if (p.name == "x") l.x = i;
        if (p.name == "y") l.y = i;
        if (p.name == "z") l.z = i;
        if (p.name == "nx") l.nx = i;
        if (p.name == "ny") l.ny = i;
        if (p.name == "nz") l.nz = i;
    }
    if (l.x < 0 || l.y < 0 || l.z < 0) fail(path, offset, "vertex element lacks x, y, z");
    for (int idx : {l.x, l.y, l.z}) {
        const auto t = vertex.properties[idx].type;
        if (t != ScalarType::kFloat32 && t != ScalarType::kFloat64) {
            fail(path, offset, "vertex coordinates must be float or double");
        }
    }
    return l;
}

PointCloud make_cloud(std::vector<Vec3> pts, std::vector<Vec3> nrm, bool with_normals) {
    if (!with_normals) return PointCloud(std::move(pts));
    for (auto &n : nrm) {
        const double len = n.norm();
        if (!std::isfinite(len) || len < 0.5) return PointCloud(std::move(pts));
        if (std::abs(len - 1.0) > 1e-6) n /= len;
    }
    return PointCloud(std::move(pts), std::move(nrm));
}

}  // namespace

PointCloud read_ply(const std::filesystem::path &path) {
    const std::string data = detail::read_file(path);
    const Header h = parse_header(data, path);

    std::size_t vertex_el = h.elements.size();
    for (std::size_t i = 0; i < h.elements.size(); ++i) {
        if (h.elements[i].name == "vertex") {
            vertex_el = i;
            break;
        }
    }
    if (vertex_el == h.elements.size()) fail(path, h.payload_offset, "no vertex element");
    const Element &vertex = h.elements[vertex_el];
    const VertexLayout l = locate(vertex, path, h.payload_offset);
    const bool with_normals = l.nx >= 0 && l.ny >= 0 && l.nz >= 0;

    std::vector<Vec3> pts(vertex.count);
    std::vector<Vec3> nrm(with_normals ? vertex.count : 0);

    if (h.encoding == Encoding::kBinaryLittleEndian) {
        std::size_t offset = h.payload_offset;
        for (std::size_t e = 0; e < vertex_el; ++e) {
            std::size_t stride = 0;
            for (const auto &p : h.elements[e].properties) {
                if (p.is_list) {
                    fail(path, offset, fmt::format("unknown element layout: list element '{}' precedes vertex",
                                                   h.elements[e].name));
                }
                stride += type_size(p.type);
            }
            offset += stride * h.elements[e].count;
        }
        std::vector<std::size_t> prop_offset;
        std::size_t stride = 0;
        for (const auto &p : vertex.properties) {
            prop_offset.push_back(stride);
            stride += type_size(p.type);
        }
        const std::size_t needed = offset + stride * vertex.count;
        if (needed > data.size()) {
            const std::size_t complete = data.size() > offset ? (data.size() - offset) / stride : 0;
            fail(path, offset + complete * stride,
                 fmt::format("truncated payload: header declares {} vertices ({} bytes ending at offset {}), "
                             "file has {} bytes; vertex {} is incomplete",
                             vertex.count, stride * vertex.count, needed, data.size(), complete));
        }
        const auto *base = reinterpret_cast<const unsigned char *>(data.data()) + offset;
        auto get = [&](const unsigned char *rec, int prop) {
            return load_scalar(vertex.properties[prop].type, rec + prop_offset[prop]);
        };
        for (std::size_t i = 0; i < vertex.count; ++i) {
            const unsigned char *rec = base + i * stride;
            pts[i] = Vec3(get(rec, l.x), get(rec, l.y), get(rec, l.z));
            if (with_normals) nrm[i] = Vec3(get(rec, l.nx), get(rec, l.ny), get(rec, l.nz));
            if (!pts[i].allFinite()) fail(path, offset + i * stride, fmt::format("vertex {} is not finite", i));
        }
        return make_cloud(std::move(pts), std::move(nrm), with_normals);
    }

    // ASCII: one element instance per line.
    std::size_t pos = h.payload_offset;
    auto next_line = [&](std::size_t &line_offset) -> std::optional<std::string_view> {
        while (pos < data.size()) {
            const std::size_t eol = std::min(data.find('\n', pos), data.size());
            std::string_view line(data.data() + pos, eol - pos);
            line_offset = pos;
            pos = eol + 1;
            if (!split_ws(line).empty()) return line;
        }
        line_offset = data.size();
        return std::nullopt;
    };
    std::size_t line_offset = 0;
    for (std::size_t e = 0; e < vertex_el; ++e) {
        for (std::size_t i = 0; i < h.elements[e].count; ++i) {
            if (!next_line(line_offset)) {
                fail(path, line_offset, fmt::format("truncated payload in element '{}'", h.elements[e].name));
            }
        }
    }
    for (std::size_t i = 0; i < vertex.count; ++i) {
        const auto line = next_line(line_offset);
        if (!line) {
            fail(path, line_offset,
                 fmt::format("truncated payload: header declares {} vertices, found {}", vertex.count, i));
        }
        const auto tok = split_ws(*line);
        if (tok.size() < vertex.properties.size()) {
            fail(path, line_offset, fmt::format("vertex {} has {} values, expected {}", i, tok.size(),
                                                vertex.properties.size()));
        }
        auto num = [&](int prop) {
            double v = 0.0;
            const auto sv = tok[prop];
            auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
            if (ec != std::errc() || ptr != sv.data() + sv.size()) {
                fail(path, line_offset, fmt::format("vertex {}: cannot parse '{}'", i, sv));
            }
            if (vertex.properties[prop].type == ScalarType::kFloat32) v = static_cast<float>(v);
            return v;
        };
        pts[i] = Vec3(num(l.x), num(l.y), num(l.z));
        if (with_normals) nrm[i] = Vec3(num(l.nx), num(l.ny), num(l.nz));
        if (!pts[i].allFinite()) fail(path, line_offset, fmt::format("vertex {} is not finite", i));
    }
    return make_cloud(std::move(pts), std::move(nrm), with_normals);
}

void write_ply(const PointCloud &cloud, const std::filesystem::path &path, bool binary) {
    const bool normals = cloud.has_normals();
    std::string out;
    out += "ply\n";
    out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
    out += fmt::format("element vertex {}\n", cloud.size());
    out += "property float x\nproperty float y\nproperty float z\n";
    if (normals) out += "property float nx\nproperty float ny\nproperty float nz\n";
    out += "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        float v[6];
        const Vec3 &p = cloud.point(i);
        v[0] = static_cast<float>(p.x());
        v[1] = static_cast<float>(p.y());
        v[2] = static_cast<float>(p.z());
        const int n = normals ? 6 : 3;
        if (normals) {
            const Vec3 &nv = cloud.normal(i);
            v[3] = static_cast<float>(nv.x());
            v[4] = static_cast<float>(nv.y());
            v[5] = static_cast<float>(nv.z());
        }
        if (binary) {
            for (int k = 0; k < n; ++k) detail::store_le(v[k], out);
        } else {
            // Shortest representation that round-trips the float exactly.
            for (int k = 0; k < n; ++k) {
                if (k) out += ' ';
                out += fmt::format("{}", v[k]);
            }
            out += '\n';
        }
    }
    detail::write_file(path, out);
}

}  // namespace xsreg::io
