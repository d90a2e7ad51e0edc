// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/cli/config.h"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>

#include "xsreg/core/parallel.h"
#include "xsreg/core/sampling.h"

namespace xsreg::cli {

namespace {

using nlohmann::json;

struct Key {
    std::string name;
    std::function<json(const RunConfig &)> get;
    // Returns an error message, or "" on success.
    std::function<std::string(RunConfig &, const json &)> set;
};

template <class F>
Key real(std::string name, F field) {
    return {name, [field](const RunConfig &c) { return json(field(const_cast<RunConfig &>(c))); },
            [field](RunConfig &c, const json &v) -> std::string {
                if (!v.is_number()) return "expected a number";
                field(c) = v.get<double>();
                return "";
            }};
}

template <class F>
Key count(std::string name, F field) {
    return {name, [field](const RunConfig &c) { return json(field(const_cast<RunConfig &>(c))); },
            [field](RunConfig &c, const json &v) -> std::string {
                if (!v.is_number_unsigned()) return "expected a non-negative integer";
                field(c) = v.get<uint64_t>();
                return "";
            }};
}

template <class F>
Key flag(std::string name, F field) {
    return {name, [field](const RunConfig &c) { return json(field(const_cast<RunConfig &>(c))); },
            [field](RunConfig &c, const json &v) -> std::string {
                if (!v.is_boolean()) return "expected true or false";
                field(c) = v.get<bool>();
                return "";
            }};
}

template <class E, class F>
Key choice(std::string name, std::vector<std::pair<std::string, E>> options, F field) {
    auto get = [field, options](const RunConfig &c) {
        const E e = field(const_cast<RunConfig &>(c));
        for (const auto &[label, value] : options) {
            if (value == e) return json(label);
        }
        return json();
    };
    auto set = [field, options](RunConfig &c, const json &v) -> std::string {
        std::string labels;
        for (const auto &[label, value] : options) {
            if (v.is_string() && v.get<std::string>() == label) {
                field(c) = value;
                return "";
            }
            labels += (labels.empty() ? "" : ", ") + label;
        }
        return "expected one of " + labels;
    };
    return {name, get, set};
}

const std::vector<std::pair<std::string, preprocess::Axis>> kAxes = {
    {"x", preprocess::Axis::kX}, {"y", preprocess::Axis::kY}, {"z", preprocess::Axis::kZ}};

const std::vector<Key> &keys() {
    using registration::IcpVariant;
    static const std::vector<Key> table = {
        count("seed", [](RunConfig &c) -> uint64_t & { return c.seed; }),
        count("workers", [](RunConfig &c) -> std::size_t & { return c.workers; }),

        real("preprocess.clamp_min", [](RunConfig &c) -> double & { return c.preprocess.clamp_min; }),
        real("preprocess.clamp_max", [](RunConfig &c) -> double & { return c.preprocess.clamp_max; }),
        real("preprocess.plane_dist", [](RunConfig &c) -> double & { return c.preprocess.plane_dist; }),
        count("preprocess.plane_iters", [](RunConfig &c) -> std::size_t & { return c.preprocess.plane_iters; }),
        real("preprocess.plane_min_inlier_frac",
             [](RunConfig &c) -> double & { return c.preprocess.plane_min_inlier_frac; }),
        real("preprocess.outlier_radius", [](RunConfig &c) -> double & { return c.preprocess.outlier_radius; }),
        count("preprocess.outlier_min_neighbors",
              [](RunConfig &c) -> std::size_t & { return c.preprocess.outlier_min_neighbors; }),
        choice("preprocess.crop_z_axis", kAxes,
               [](RunConfig &c) -> preprocess::Axis & { return c.preprocess.crop_z_axis; }),
        real("preprocess.crop_z_frac", [](RunConfig &c) -> double & { return c.preprocess.crop_z_frac; }),
        choice("preprocess.crop_y_axis", kAxes,
               [](RunConfig &c) -> preprocess::Axis & { return c.preprocess.crop_y_axis; }),
        real("preprocess.crop_y_frac", [](RunConfig &c) -> double & { return c.preprocess.crop_y_frac; }),
        count("preprocess.subsample_n", [](RunConfig &c) -> std::size_t & { return c.preprocess.subsample_n; }),
        flag("preprocess.subsample_before_crop",
             [](RunConfig &c) -> bool & { return c.preprocess.subsample_before_crop; }),

        count("features.normal_k", [](RunConfig &c) -> std::size_t & { return c.features.normal_k; }),
        real("features.feature_radius", [](RunConfig &c) -> double & { return c.features.feature_radius; }),
        real("features.voxel_size", [](RunConfig &c) -> double & { return c.features.voxel_size; }),

        real("ransac.max_corr_dist", [](RunConfig &c) -> double & { return c.ransac.max_corr_dist; }),
        count("ransac.sample_size", [](RunConfig &c) -> std::size_t & { return c.ransac.sample_size; }),
        count("ransac.max_iters", [](RunConfig &c) -> std::size_t & { return c.ransac.max_iters; }),
        real("ransac.confidence", [](RunConfig &c) -> double & { return c.ransac.confidence; }),
        real("ransac.edge_ratio", [](RunConfig &c) -> double & { return c.ransac.edge_ratio; }),
        flag("ransac.mutual_filter", [](RunConfig &c) -> bool & { return c.ransac.mutual_filter; }),

        real("icp.max_corr_dist", [](RunConfig &c) -> double & { return c.icp.max_corr_dist; }),
        count("icp.max_iters", [](RunConfig &c) -> std::size_t & { return c.icp.max_iters; }),
        real("icp.rel_rmse_tol", [](RunConfig &c) -> double & { return c.icp.rel_rmse_tol; }),
        choice("icp.variant",
               std::vector<std::pair<std::string, IcpVariant>>{{"point-to-point", IcpVariant::kPointToPoint},
                                                               {"point-to-plane", IcpVariant::kPointToPlane}},
               [](RunConfig &c) -> IcpVariant & { return c.icp.variant; }),

        real("thresholds.te_cm", [](RunConfig &c) -> double & { return c.thresholds.te_cm; }),
        real("thresholds.re_deg", [](RunConfig &c) -> double & { return c.thresholds.re_deg; }),
        choice("thresholds.metric",
               std::vector<std::pair<std::string, eval::TranslationMetric>>{
                   {"translation", eval::TranslationMetric::kTranslation},
                   {"point-rms", eval::TranslationMetric::kPointRms}},
               [](RunConfig &c) -> eval::TranslationMetric & { return c.thresholds.metric; }),
    };
    return table;
}

void flatten_into(const json &doc, const std::string &prefix, json &out) {
    for (const auto &[k, v] : doc.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten_into(v, key, out);
        } else {
            out[key] = v;
        }
    }
}

template <class Params>
void validate_section(const Params &p, const char *section) {
    try {
        p.validate();
    } catch (const Error &e) {
        throw UsageError(fmt::format("invalid {} parameters: {}", section, e.what()));
    }
}

}  // namespace

std::size_t RunConfig::effective_workers() const { return workers == 0 ? default_workers() : workers; }

json flatten(const json &doc) {
    json out = json::object();
    flatten_into(doc, "", out);
    return out;
}

ConfigLayer load_config_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw UsageError(fmt::format("config file '{}': cannot open", path.string()));
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error &e) {
        throw UsageError(fmt::format("config file '{}': {}", path.string(), e.what()));
    }
    if (!doc.is_object()) throw UsageError(fmt::format("config file '{}': expected a JSON object", path.string()));
    return {fmt::format("config file '{}'", path.string()), flatten(doc)};
}

ConfigLayer parse_assignments(const std::vector<std::string> &items, const std::string &origin) {
    ConfigLayer layer{origin, json::object()};
    for (const auto &item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw UsageError(fmt::format("{}: expected key=value, got '{}'", origin, item));
        }
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        layer.values[key] = value;
    }
    return layer;
}

RunConfig resolve(const std::vector<ConfigLayer> &layers) {
    RunConfig config;
    for (const auto &layer : layers) {
        for (const auto &[name, value] : layer.values.items()) {
            const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key &k) { return k.name == name; });
            if (it == keys().end()) throw UsageError(fmt::format("{}: unknown key '{}'", layer.origin, name));
            const std::string problem = it->set(config, value);
            if (!problem.empty()) {
                throw UsageError(fmt::format("{}: key '{}': {}, got {}", layer.origin, name, problem, value.dump()));
            }
        }
    }
    validate_section(config.preprocess, "preprocess");
    validate_section(config.features, "features");
    validate_section(config.ransac, "ransac");
    validate_section(config.icp, "icp");
    validate_section(config.thresholds, "thresholds");
    return config;
}

json config_to_json(const RunConfig &config) {
    json out = json::object();
    for (const auto &k : keys()) out[k.name] = k.get(config);
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> names;
    for (const auto &k : keys()) names.push_back(k.name);
    return names;
}

preprocess::PreprocessParams preprocess_params(const RunConfig &config) {
    auto p = config.preprocess;
    p.seed = config.seed;
    return p;
}

registration::RansacParams ransac_params(const RunConfig &config, uint64_t stream) {
    auto p = config.ransac;
    p.seed = derive_seed(config.seed, stream);
    return p;
}

registration::RegistrationResult register_with(const std::string &method, const PointCloud &source,
                                               const PointCloud &target, const RunConfig &config,
                                               uint64_t stream, const RigidTransform &init) {
    if (method == "global") {
        return registration::register_global(source, target, ransac_params(config, stream), config.features,
                                             config.icp.max_corr_dist);
    }
    if (method == "icp") return registration::icp(source, target, init, config.icp);
    if (method == "global-icp") {
        return registration::register_global_icp(source, target, ransac_params(config, stream), config.icp,
                                                 config.features);
    }
    throw UsageError(fmt::format("unknown method '{}' (expected global, icp or global-icp)", method));
}

eval::MethodBinding internal_method(const std::string &method, const RunConfig &config) {
    if (std::find(kInternalMethods.begin(), kInternalMethods.end(), method) == kInternalMethods.end()) {
        throw UsageError(fmt::format("unknown method '{}' (expected global, icp or global-icp)", method));
    }
    return {method, [method, config](const eval::PairData &pair) {
                return register_with(method, pair.source, pair.target, config, stable_hash(pair.entry.id))
                    .transform;
            }};
}

}  // namespace xsreg::cli
