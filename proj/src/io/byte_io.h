// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "xsreg/core/error.h"

namespace xsreg::io::detail {

// Little-endian scalar decode/encode independent of host byte order.
template <typename T>
T load_le(const unsigned char *p) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(buf, p, sizeof(T));
    } else {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = p[sizeof(T) - 1 - i];
    }
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

template <typename T>
void store_le(T v, std::string &out) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    out.append(reinterpret_cast<const char *>(buf), sizeof(T));
}

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_file(const std::filesystem::path &path, const std::string &data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError(fmt::format("write failed for {}", path.string()));
}

}  // namespace xsreg::io::detail
