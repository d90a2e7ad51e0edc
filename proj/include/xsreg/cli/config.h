// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xsreg/core/error.h"
#include "xsreg/eval/evaluation.h"
#include "xsreg/features/fpfh.h"
#include "xsreg/preprocess/preprocess.h"
#include "xsreg/registration/registration.h"

namespace xsreg::cli {

/// Bad command line or configuration; maps to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Every tunable the command-line tool exposes. Keys are dotted paths such as
/// "icp.max_corr_dist"; see config_keys().
struct RunConfig {
    uint64_t seed = 0;
    std::size_t workers = 0;  // 0: one per available core
    preprocess::PreprocessParams preprocess;
    features::FeatureParams features;
    registration::RansacParams ransac;
    registration::IcpParams icp;
    eval::Thresholds thresholds;

    std::size_t effective_workers() const;
};

/// A set of dotted-key assignments from one origin (a file, the flags).
struct ConfigLayer {
    std::string origin;
    nlohmann::json values = nlohmann::json::object();  // flat: key -> scalar
};

/// Nested objects become dotted keys: {"icp": {"max_iters": 5}} -> {"icp.max_iters": 5}.
nlohmann::json flatten(const nlohmann::json &doc);

/// JSON document, nested or with dotted keys.
ConfigLayer load_config_file(const std::filesystem::path &path);

/// "key=value" items; the value is read as JSON when it parses, else as a string.
ConfigLayer parse_assignments(const std::vector<std::string> &items, const std::string &origin = "--set");

/// Applies layers over the built-in defaults, later layers winning, then
/// validates. Unknown keys, wrong types and invalid values throw UsageError
/// naming the key and its origin.
RunConfig resolve(const std::vector<ConfigLayer> &layers);

/// The effective configuration as a flat dotted-key object.
nlohmann::json config_to_json(const RunConfig &config);

std::vector<std::string> config_keys();

/// Parameters as actually used: the run seed feeds preprocessing and RANSAC.
preprocess::PreprocessParams preprocess_params(const RunConfig &config);
registration::RansacParams ransac_params(const RunConfig &config, uint64_t stream);

/// Internal registration methods.
inline const std::vector<std::string> kInternalMethods = {"global", "icp", "global-icp"};

/// Runs `method` (global, icp, global-icp); `init` seeds icp. RANSAC draws
/// from derive_seed(config.seed, stream).
registration::RegistrationResult register_with(const std::string &method, const PointCloud &source,
                                               const PointCloud &target, const RunConfig &config,
                                               uint64_t stream, const RigidTransform &init = {});

/// Benchmark binding for an internal method; each pair gets the RANSAC
/// stream stable_hash(pair id), so results do not depend on scheduling.
eval::MethodBinding internal_method(const std::string &method, const RunConfig &config);

}  // namespace xsreg::cli
