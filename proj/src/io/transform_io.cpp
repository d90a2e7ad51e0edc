// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/io/transform_io.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <sstream>

#include "byte_io.h"
#include "xsreg/core/error.h"

namespace xsreg::io {

nlohmann::json transform_to_json(const RigidTransform &t) {
    const Mat4 m = t.matrix();
    nlohmann::json arr = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
    }
    return arr;
}

RigidTransform transform_from_json(const nlohmann::json &j) {
    if (!j.is_array() || j.size() != 16) {
        throw FormatError("transform must be an array of 16 numbers");
    }
    Mat4 m;
    for (int i = 0; i < 16; ++i) {
        if (!j[i].is_number()) throw FormatError(fmt::format("transform entry {} is not a number", i));
        m(i / 4, i % 4) = j[i].get<double>();
    }
    try {
        return RigidTransform::from_matrix(m);
    } catch (const PreconditionError &e) {
        throw FormatError(fmt::format("transform is not rigid: {}", e.what()));
    }
}

std::string transform_to_text(const RigidTransform &t) {
    const Mat4 m = t.matrix();
    std::string out;
    for (int r = 0; r < 4; ++r) {
        out += fmt::format("{:.17g} {:.17g} {:.17g} {:.17g}\n", m(r, 0), m(r, 1), m(r, 2), m(r, 3));
    }
    return out;
}

void write_transform(const RigidTransform &t, const std::filesystem::path &path) {
    if (path.extension() == ".json") {
        detail::write_file(path, transform_to_json(t).dump() + "\n");
    } else {
        detail::write_file(path, transform_to_text(t));
    }
}

RigidTransform read_transform(const std::filesystem::path &path) {
    const std::string text = detail::read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        try {
            return transform_from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::exception &e) {
            throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
        } catch (const FormatError &e) {
            throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
        }
    }
    std::istringstream in(text);
    nlohmann::json arr = nlohmann::json::array();
    double v;
    while (in >> v) arr.push_back(v);
    if (!in.eof()) throw FormatError(fmt::format("{}: non-numeric content", path.string()));
    try {
        return transform_from_json(arr);
    } catch (const FormatError &e) {
        throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace xsreg::io
