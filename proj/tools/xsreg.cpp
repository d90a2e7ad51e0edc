// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

// xsreg: convert, preprocess, register, synthesize and benchmark.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "xsreg/bridge/bridge.h"
#include "xsreg/cli/config.h"
#include "xsreg/core/sampling.h"
#include "xsreg/io/depth.h"
#include "xsreg/io/ply.h"
#include "xsreg/io/transform_io.h"
#include "xsreg/io/volume.h"
#include "xsreg/synth/synth.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace xsreg;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<uint64_t> seed;
    std::optional<std::size_t> workers;
    std::vector<CLI::Option *> json_opts;  // one per subcommand
    std::string json_path;
    mutable json effective;  // echoed in every JSON result

    cli::RunConfig resolve() const {
        std::vector<cli::ConfigLayer> layers;
        if (!config.empty()) layers.push_back(cli::load_config_file(config));
        auto flags = cli::parse_assignments(sets, "--set");
        if (seed) flags.values["seed"] = *seed;
        if (workers) flags.values["workers"] = *workers;
        layers.push_back(flags);
        const auto cfg = cli::resolve(layers);
        effective = cli::config_to_json(cfg);
        return cfg;
    }

    bool json_given() const {
        return std::any_of(json_opts.begin(), json_opts.end(), [](const CLI::Option *o) { return o->count() > 0; });
    }
    bool json_to_stdout() const { return json_given() && json_path.empty(); }

    void emit(json result, const std::string &human) const {
        result["config"] = effective;
        if (json_given() && !json_path.empty()) {
            std::ofstream out(json_path);
            if (!out) throw Error(fmt::format("cannot write '{}'", json_path));
            out << result.dump(2) << "\n";
        }
        if (json_to_stdout()) {
            std::cout << result.dump(2) << "\n";
        } else if (!human.empty()) {
            std::cout << human;
        }
    }
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "JSON configuration file (nested or dotted keys)");
    cmd->add_option("--set", c.sets, "override one key, e.g. --set icp.max_iters=80 (repeatable)");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--workers", c.workers, "worker threads (default: available cores)");
    c.json_opts.push_back(
        cmd->add_option("--json", c.json_path, "write a JSON result to PATH, or to stdout without PATH")->expected(0, 1));
}

void require_file(const fs::path &path, const std::string &what) {
    if (!fs::is_regular_file(path)) throw Error(fmt::format("{} '{}': no such file", what, path.string()));
}

// Library errors do not always know the file they came from.
template <class F>
auto on_file(const fs::path &path, const std::string &what, F &&f) {
    require_file(path, what);
    try {
        return f();
    } catch (const Error &e) {
        if (std::string(e.what()).find(path.string()) != std::string::npos) throw;
        throw Error(fmt::format("{} '{}': {}", what, path.string(), e.what()));
    }
}

fs::path raw_for(const fs::path &meta, const std::string &raw) {
    if (!raw.empty()) return raw;
    fs::path p = meta;
    return p.replace_extension(".raw");
}

io::DepthFrame load_depth(const std::string &meta, const std::string &raw) {
    const fs::path raw_path = raw_for(meta, raw);
    require_file(raw_path, "depth payload");
    return on_file(meta, "depth frame", [&] { return io::read_depth_pair(meta, raw_path); });
}

io::ScalarVolume load_volume(const std::string &meta, const std::string &raw) {
    const fs::path raw_path = raw_for(meta, raw);
    require_file(raw_path, "volume payload");
    return on_file(meta, "volume", [&] { return io::read_volume(meta, raw_path); });
}

PointCloud load_ply(const std::string &path, const std::string &what) {
    return on_file(path, what, [&] { return io::read_ply(path); });
}

json stages_json(const std::vector<preprocess::StageCount> &stages) {
    json out = json::array();
    for (const auto &s : stages) out.push_back({{"stage", s.stage}, {"points", s.points}});
    return out;
}

void log_stages(const std::vector<preprocess::StageCount> &stages) {
    for (const auto &s : stages) fmt::print(stderr, "  {:<24} {:>9}\n", s.stage, s.points);
}

// convert ---------------------------------------------------------------

struct ConvertArgs {
    std::string depth, volume, ply, raw, out;
    std::optional<double> iso;
    double min_m = 0.0;
    double max_m = std::numeric_limits<double>::max();
    bool ascii = false;
};

int run_convert(const ConvertArgs &a, const Common &c) {
    c.resolve();
    const int inputs = !a.depth.empty() + !a.volume.empty() + !a.ply.empty();
    if (inputs != 1) throw cli::UsageError("convert: give exactly one of --depth, --volume, --ply");
    if (!a.volume.empty() && !a.iso) throw cli::UsageError("convert: --volume needs --iso");

    PointCloud cloud;
    json result = {{"command", "convert"}, {"output", a.out}};
    if (!a.depth.empty()) {
        if (!(a.min_m >= 0.0 && a.min_m < a.max_m)) throw cli::UsageError("convert: need 0 <= --min < --max");
        cloud = io::reproject_depth(load_depth(a.depth, a.raw), a.min_m, a.max_m);
    } else if (!a.volume.empty()) {
        auto iso = io::extract_isosurface_points(load_volume(a.volume, a.raw), *a.iso);
        if (iso.iso_out_of_range) {
            fmt::print(stderr, "warning: iso {} is outside the volume's value range; output is empty\n", *a.iso);
            result["warning"] = "iso outside value range";
        }
        cloud = std::move(iso.cloud);
    } else {
        cloud = load_ply(a.ply, "input PLY");
    }
    io::write_ply(cloud, a.out, !a.ascii);
    result["points"] = cloud.size();
    c.emit(result, fmt::format("{} points -> {}\n", cloud.size(), a.out));
    return 0;
}

// preprocess ------------------------------------------------------------

struct PreprocessArgs {
    std::string in, volume, depth, raw, out;
    std::optional<double> iso;
};

int run_preprocess_source(const PreprocessArgs &a, const Common &c) {
    const auto cfg = c.resolve();
    if (a.in.empty() == a.volume.empty()) throw cli::UsageError("preprocess-source: give exactly one of --in, --volume");
    if (!a.volume.empty() && !a.iso) throw cli::UsageError("preprocess-source: --volume needs --iso");
    PointCloud input;
    if (!a.in.empty()) {
        input = load_ply(a.in, "input PLY");
    } else {
        auto iso = io::extract_isosurface_points(load_volume(a.volume, a.raw), *a.iso);
        if (iso.iso_out_of_range) {
            throw Error(fmt::format("volume '{}': iso {} is outside the value range", a.volume, *a.iso));
        }
        input = std::move(iso.cloud);
    }
    const auto prepared = preprocess::prepare_source_detailed(input, cli::preprocess_params(cfg));
    io::write_ply(prepared.cloud, a.out);
    fmt::print(stderr, "preprocess-source:\n");
    log_stages(prepared.stages);
    const json result = {{"command", "preprocess-source"},
                         {"output", a.out},
                         {"points", prepared.cloud.size()},
                         {"stages", stages_json(prepared.stages)}};
    c.emit(result, fmt::format("{} points -> {}\n", prepared.cloud.size(), a.out));
    return 0;
}

int run_preprocess_target(const PreprocessArgs &a, const Common &c) {
    const auto cfg = c.resolve();
    const auto frame = load_depth(a.depth, a.raw);
    const auto prepared = preprocess::prepare_target(frame, cli::preprocess_params(cfg));
    io::write_ply(prepared.cloud, a.out);
    fmt::print(stderr, "preprocess-target ({:.1f} ms):\n", 1e3 * prepared.seconds);
    log_stages(prepared.stages);
    json result = {{"command", "preprocess-target"},
                   {"output", a.out},
                   {"points", prepared.cloud.size()},
                   {"stages", stages_json(prepared.stages)},
                   {"plane_removed", prepared.plane_removed},
                   {"seconds", prepared.seconds}};
    if (prepared.plane) {
        const auto &pl = *prepared.plane;
        result["plane"] = {{"normal", {pl.normal.x(), pl.normal.y(), pl.normal.z()}},
                           {"offset", pl.offset},
                           {"inliers", pl.inlier_count}};
    }
    c.emit(result, fmt::format("{} points -> {}\n", prepared.cloud.size(), a.out));
    return 0;
}

// register --------------------------------------------------------------

struct RegisterArgs {
    std::string source, target, method = "global-icp", out, gt, init;
};

int run_register(const RegisterArgs &a, const Common &c) {
    const auto cfg = c.resolve();
    if (std::find(cli::kInternalMethods.begin(), cli::kInternalMethods.end(), a.method) ==
        cli::kInternalMethods.end()) {
        throw cli::UsageError(fmt::format("register: unknown --method '{}' (expected global, icp or global-icp)", a.method));
    }
    const auto source = load_ply(a.source, "source PLY");
    const auto target = load_ply(a.target, "target PLY");
    RigidTransform init;
    if (!a.init.empty()) init = on_file(a.init, "initial transform", [&] { return io::read_transform(a.init); });
    std::optional<RigidTransform> gt;
    if (!a.gt.empty()) gt = on_file(a.gt, "ground-truth transform", [&] { return io::read_transform(a.gt); });

    const auto r = cli::register_with(a.method, source, target, cfg, 0, init);
    if (!a.out.empty()) io::write_transform(r.transform, a.out);

    json result = {{"command", "register"},
                   {"method", a.method},
                   {"transform", io::transform_to_json(r.transform)},
                   {"fitness", r.fitness},
                   {"inlier_rmse", r.inlier_rmse},
                   {"iterations", r.iterations},
                   {"refinement_rejected", r.refinement_rejected},
                   {"wall_time", r.wall_time}};
    std::string human = io::transform_to_text(r.transform);
    human += fmt::format("fitness {:.4f}  inlier_rmse {:.6f} m  time {:.3f} s\n", r.fitness, r.inlier_rmse,
                         r.wall_time);
    if (gt) {
        const double te = eval::translation_error(r.transform, *gt);
        const double re = eval::rotation_error(r.transform, *gt);
        const bool ok = eval::is_success(te, re, cfg.thresholds);
        result["te_cm"] = te;
        result["re_deg"] = re;
        result["success"] = ok;
        human += fmt::format("TE {:.4f} cm  RE {:.4f} deg  {}\n", te, re, ok ? "success" : "failure");
    }
    c.emit(result, human);
    return 0;
}

// synth -----------------------------------------------------------------

struct SynthArgs {
    std::size_t subjects = 10;
    std::size_t views = 3;
    std::string difficulty = "paper-like";
    std::size_t source_n = 10000;
    std::string out;
};

int run_synth(const SynthArgs &a, const Common &c) {
    const auto cfg = c.resolve();
    synth::SuiteOptions opts;
    opts.subjects = a.subjects;
    opts.views = a.views;
    try {
        opts.difficulty = synth::parse_difficulty(a.difficulty);
    } catch (const Error &e) {
        throw cli::UsageError(fmt::format("--difficulty: {}", e.what()));
    }
    opts.seed = cfg.seed;
    opts.source_n = a.source_n;
    opts.workers = cfg.effective_workers();
    try {
        opts.validate();
    } catch (const PreconditionError &e) {
        throw cli::UsageError(fmt::format("synth: {}", e.what()));
    }
    fmt::print(stderr, "synth: generating {} pairs ({})\n", a.subjects * a.views, a.difficulty);
    const auto suite = synth::generate_suite(opts);
    const auto pairs = synth::write_suite(suite, a.out, cli::preprocess_params(cfg), opts.workers);
    const fs::path manifest = fs::path(a.out) / "manifest.json";
    const json result = {{"command", "synth"},
                         {"pairs", pairs.size()},
                         {"difficulty", a.difficulty},
                         {"manifest", manifest.string()}};
    c.emit(result, fmt::format("{} pairs -> {}\n", pairs.size(), manifest.string()));
    return 0;
}

// benchmark -------------------------------------------------------------

struct BenchmarkArgs {
    std::string manifest;
    std::string methods = "global,global-icp";
    std::vector<std::string> backends;
    double backend_timeout = 60.0;
    bool persistent = false;
    std::string csv, out;
};

std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) items.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return items;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

int run_benchmark(const BenchmarkArgs &a, const Common &c) {
    const auto cfg = c.resolve();
    std::vector<eval::MethodBinding> methods;
    for (const auto &name : split_list(a.methods)) methods.push_back(cli::internal_method(name, cfg));
    for (const auto &spec : a.backends) {
        try {
            methods.push_back(bridge::make_method(bridge::parse_binding(spec, a.backend_timeout, a.persistent)));
        } catch (const PreconditionError &e) {
            throw cli::UsageError(fmt::format("--backend '{}': {}", spec, e.what()));
        }
    }
    if (methods.empty()) throw cli::UsageError("benchmark: no methods given");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (methods[i].name == methods[j].name) {
                throw cli::UsageError(fmt::format("benchmark: method name '{}' used twice", methods[i].name));
            }
        }
    }
    const auto pairs = on_file(a.manifest, "manifest", [&] { return eval::read_manifest(a.manifest); });

    eval::BenchmarkOptions opts;
    opts.thresholds = cfg.thresholds;
    opts.workers = cfg.effective_workers();
    fmt::print(stderr, "benchmark: {} pairs x {} methods, {} workers\n", pairs.size(), methods.size(), opts.workers);
    const auto report = eval::run_benchmark(pairs, methods, opts);
    for (const auto &r : report.records) {
        if (!r.error.empty()) fmt::print(stderr, "  {} / {}: {}\n", r.method, r.pair_id, r.error);
    }

    json result = eval::report_to_json(report);
    result["command"] = "benchmark";
    result["config"] = c.effective;
    if (!a.out.empty()) write_text(a.out, result.dump(2) + "\n");
    if (!a.csv.empty()) write_text(a.csv, eval::report_to_csv(report));
    c.emit(result, eval::format_table(report));
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"xsreg: cross-source point cloud registration toolkit"};
    app.require_subcommand(1);
    Common common;

    ConvertArgs conv;
    auto *convert = app.add_subcommand("convert", "depth frame, volume or PLY to PLY");
    convert->add_option("--depth", conv.depth, "depth frame metadata (.json)");
    convert->add_option("--volume", conv.volume, "volume metadata (.json)");
    convert->add_option("--ply", conv.ply, "PLY file to re-encode");
    convert->add_option("--raw", conv.raw, "payload file (default: metadata path with .raw)");
    convert->add_option("--iso", conv.iso, "isosurface value for --volume");
    convert->add_option("--min", conv.min_m, "minimum depth in meters for --depth");
    convert->add_option("--max", conv.max_m, "maximum depth in meters for --depth");
    convert->add_flag("--ascii", conv.ascii, "write ASCII PLY");
    convert->add_option("--out", conv.out, "output PLY")->required();
    add_common(convert, common);

    PreprocessArgs pre;
    auto *pre_src = app.add_subcommand("preprocess-source", "subsample and crop a volume-derived cloud");
    pre_src->add_option("--in", pre.in, "input PLY");
    pre_src->add_option("--volume", pre.volume, "volume metadata (.json)");
    pre_src->add_option("--raw", pre.raw, "volume payload (default: metadata path with .raw)");
    pre_src->add_option("--iso", pre.iso, "isosurface value for --volume");
    pre_src->add_option("--out", pre.out, "output PLY")->required();
    add_common(pre_src, common);

    auto *pre_tgt = app.add_subcommand("preprocess-target", "reproject and clean a depth frame");
    pre_tgt->add_option("--depth", pre.depth, "depth frame metadata (.json)")->required();
    pre_tgt->add_option("--raw", pre.raw, "depth payload (default: metadata path with .raw)");
    pre_tgt->add_option("--out", pre.out, "output PLY")->required();
    add_common(pre_tgt, common);

    RegisterArgs reg;
    auto *regc = app.add_subcommand("register", "estimate the source-to-target transform");
    regc->add_option("--source", reg.source, "source PLY")->required();
    regc->add_option("--target", reg.target, "target PLY")->required();
    regc->add_option("--method", reg.method, "global, icp or global-icp")->capture_default_str();
    regc->add_option("--init", reg.init, "initial transform for icp");
    regc->add_option("--gt", reg.gt, "ground-truth transform; reports TE and RE");
    regc->add_option("--out", reg.out, "transform output file");
    add_common(regc, common);

    SynthArgs syn;
    auto *sync = app.add_subcommand("synth", "generate a synthetic benchmark suite");
    sync->add_option("--subjects", syn.subjects, "number of head models")->capture_default_str();
    sync->add_option("--views", syn.views, "views per subject")->capture_default_str();
    sync->add_option("--difficulty", syn.difficulty, "easy or paper-like")->capture_default_str();
    sync->add_option("--source-points", syn.source_n, "points per source cloud")->capture_default_str();
    sync->add_option("--out", syn.out, "output directory")->required();
    add_common(sync, common);

    BenchmarkArgs bench;
    auto *benc = app.add_subcommand("benchmark", "evaluate methods over a manifest");
    benc->add_option("--manifest", bench.manifest, "pair manifest")->required();
    benc->add_option("--methods", bench.methods, "comma-separated internal methods")->capture_default_str();
    benc->add_option("--backend", bench.backends, "external method NAME=COMMAND (repeatable)");
    benc->add_option("--backend-timeout", bench.backend_timeout, "seconds per backend request")
        ->capture_default_str();
    benc->add_flag("--persistent", bench.persistent, "keep backend processes alive across pairs");
    benc->add_option("--csv", bench.csv, "per-pair CSV output");
    benc->add_option("--out", bench.out, "JSON report output");
    add_common(benc, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (convert->parsed()) return run_convert(conv, common);
        if (pre_src->parsed()) return run_preprocess_source(pre, common);
        if (pre_tgt->parsed()) return run_preprocess_target(pre, common);
        if (regc->parsed()) return run_register(reg, common);
        if (sync->parsed()) return run_synth(syn, common);
        if (benc->parsed()) return run_benchmark(bench, common);
    } catch (const cli::UsageError &e) {
        fmt::print(stderr, "xsreg: error: {}\n", e.what());
        return 1;
    } catch (const std::exception &e) {
        fmt::print(stderr, "xsreg: error: {}\n", e.what());
        return 2;
    }
    return 1;
}
