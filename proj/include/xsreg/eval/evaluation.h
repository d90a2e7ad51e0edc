// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsreg/core/geometry.h"

namespace xsreg::eval {

/// ||t_est - t_gt|| in centimeters.
double translation_error(const RigidTransform &est, const RigidTransform &gt);
/// Geodesic angle between the rotations, in degrees.
double rotation_error(const RigidTransform &est, const RigidTransform &gt);
/// Alternative TE: RMS displacement between est(p) and gt(p) over the cloud, in centimeters.
double point_rms_error(const RigidTransform &est, const RigidTransform &gt, const PointCloud &cloud);

enum class TranslationMetric { kTranslation, kPointRms };

struct Thresholds {
    double te_cm = 0.4;
    double re_deg = 15.0;
    TranslationMetric metric = TranslationMetric::kTranslation;

    void validate() const;
};

/// Strict inequality on both thresholds.
bool is_success(double te_cm, double re_deg, const Thresholds &thr);

struct EvalRecord {
    std::string pair_id;
    std::string method;
    double te_cm = 0.0;
    double re_deg = 0.0;
    bool success = false;
    double wall_time = 0.0;
    std::string error;  // non-empty when the method failed on this pair
};

struct MethodSummary {
    std::string method;
    std::size_t pairs = 0;
    std::size_t successes = 0;
    double recall = 0.0;
    // Over successful pairs only; NaN when there are none.
    double te_mean_cm = 0.0;
    double te_std_cm = 0.0;
    double re_mean_deg = 0.0;
    double re_std_deg = 0.0;
    double time_mean_s = 0.0;  // over all pairs
};

struct BenchmarkReport {
    Thresholds thresholds;
    std::vector<MethodSummary> methods;
    std::vector<EvalRecord> records;  // sorted by (method order, pair id)
};

/// Success flags are recomputed from the thresholds. Methods appear in
/// `method_order` when given, otherwise sorted by name. The result does not
/// depend on the order of `records`.
BenchmarkReport aggregate(std::vector<EvalRecord> records, const Thresholds &thr,
                          const std::vector<std::string> &method_order = {});

std::string format_table(const BenchmarkReport &report);
nlohmann::json report_to_json(const BenchmarkReport &report);
std::string report_to_csv(const BenchmarkReport &report);

// Pair manifest: a JSON list of {"id"?, "source_ply", "target_ply", "gt_transform"}.
// Relative paths resolve against the manifest directory.
struct PairEntry {
    std::string id;
    std::filesystem::path source_ply;
    std::filesystem::path target_ply;
    RigidTransform gt;
};

std::vector<PairEntry> read_manifest(const std::filesystem::path &path);
void write_manifest(const std::vector<PairEntry> &pairs, const std::filesystem::path &path);

struct PairData {
    const PairEntry &entry;
    const PointCloud &source;
    const PointCloud &target;
};

struct MethodBinding {
    std::string name;
    /// Returns the estimated source-to-target transform; throwing marks the pair failed.
    std::function<RigidTransform(const PairData &)> run;
};

struct BenchmarkOptions {
    Thresholds thresholds;
    std::size_t workers = 1;
};

/// Loads every pair once, runs each method on each pair and aggregates.
/// Only the method call is timed. Unreadable pairs fail every method.
BenchmarkReport run_benchmark(const std::vector<PairEntry> &pairs, const std::vector<MethodBinding> &methods,
                              const BenchmarkOptions &options);

}  // namespace xsreg::eval
