// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reference SPFH/FPFH by direct double loop. Written independently of the
// library: angles come from the classic acos-based role test and neighbours
// from an all-pairs distance scan.

#include <array>
#include <cmath>
#include <tuple>
#include <vector>

#include "xsreg/core/geometry.h"

namespace xsreg::test {

struct OraclePairBins {
    std::size_t i, j;
    std::array<int, 3> bins;
};

struct OracleFpfh {
    std::vector<std::array<double, 33>> spfh;
    std::vector<std::array<double, 33>> fpfh;
    std::vector<OraclePairBins> pair_bins;
};

inline bool oracle_pair(const Vec3 &p1, const Vec3 &n1, const Vec3 &p2, const Vec3 &n2, double &f_alpha,
                        double &f_phi, double &f_theta) {
    Vec3 dp = p2 - p1;
    const double len = std::sqrt(dp.dot(dp));
    if (len == 0.0) return false;
    dp = dp / len;
    const double a1 = std::acos(std::min(1.0, std::abs(n1.dot(dp))));
    const double a2 = std::acos(std::min(1.0, std::abs(n2.dot(dp))));
    bool swap = a1 > a2;
    if (a1 == a2) swap = std::make_tuple(p2.x(), p2.y(), p2.z()) < std::make_tuple(p1.x(), p1.y(), p1.z());
    Vec3 u = n1, nt = n2, line = dp;
    if (swap) {
        u = n2;
        nt = n1;
        line = -dp;
    }
    Vec3 v(line.y() * u.z() - line.z() * u.y(), line.z() * u.x() - line.x() * u.z(),
           line.x() * u.y() - line.y() * u.x());
    const double vn = std::sqrt(v.dot(v));
    if (vn < 1e-9) return false;
    v = v / vn;
    const Vec3 w(u.y() * v.z() - u.z() * v.y(), u.z() * v.x() - u.x() * v.z(), u.x() * v.y() - u.y() * v.x());
    f_alpha = v.dot(nt);
    f_phi = u.dot(line);
    f_theta = std::atan2(w.dot(nt), u.dot(nt));
    if (f_theta == -M_PI) f_theta = M_PI;
    return true;
}

inline int oracle_bin(double f, double lo, double hi) {
    int b = static_cast<int>(std::floor(11.0 * (f - lo) / (hi - lo)));
    if (b < 0) b = 0;
    if (b > 10) b = 10;
    return b;
}

inline OracleFpfh brute_force_fpfh(const PointCloud &c, double radius) {
    const std::size_t n = c.size();
    OracleFpfh out;
    out.spfh.assign(n, {});
    out.fpfh.assign(n, {});
    std::vector<std::vector<std::pair<std::size_t, double>>> nb(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = (c.point(i) - c.point(j)).norm();
            if (d > 0.0 && d <= radius) nb[i].emplace_back(j, d);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        int valid = 0;
        for (const auto &[j, d] : nb[i]) {
            double fa, fp, ft;
            if (!oracle_pair(c.point(i), c.normal(i), c.point(j), c.normal(j), fa, fp, ft)) continue;
            const std::array<int, 3> bins = {oracle_bin(fa, -1, 1), oracle_bin(fp, -1, 1),
                                             oracle_bin(ft, -M_PI, M_PI)};
            out.pair_bins.push_back({i, j, bins});
            out.spfh[i][bins[0]] += 1;
            out.spfh[i][11 + bins[1]] += 1;
            out.spfh[i][22 + bins[2]] += 1;
            ++valid;
        }
        if (valid > 0) {
            for (auto &v : out.spfh[i]) v = v * 100.0 / valid;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (nb[i].empty()) continue;
        std::array<double, 33> acc{};
        for (const auto &[j, d] : nb[i]) {
            for (int k = 0; k < 33; ++k) acc[k] += out.spfh[j][k] / d;
        }
        for (int k = 0; k < 33; ++k) out.fpfh[i][k] = out.spfh[i][k] + acc[k] / static_cast<double>(nb[i].size());
        for (int b = 0; b < 3; ++b) {
            double s = 0;
            for (int k = 0; k < 11; ++k) s += out.fpfh[i][11 * b + k];
            if (s > 0) {
                for (int k = 0; k < 11; ++k) out.fpfh[i][11 * b + k] *= 100.0 / s;
            }
        }
    }
    return out;
}

}  // namespace xsreg::test
