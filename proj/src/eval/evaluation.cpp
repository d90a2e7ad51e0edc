// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/eval/evaluation.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "xsreg/core/error.h"
#include "xsreg/core/parallel.h"
#include "xsreg/io/ply.h"
#include "xsreg/io/transform_io.h"

namespace xsreg::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanStd {
    double mean = kNaN;
    double std = kNaN;
};

// Population standard deviation; values arrive in a fixed order.
MeanStd mean_std(const std::vector<double> &v) {
    if (v.empty()) return {};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string csv_num(double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); }

std::string csv_text(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

double translation_error(const RigidTransform &est, const RigidTransform &gt) {
    return (est.translation() - gt.translation()).norm() * 100.0;
}

double rotation_error(const RigidTransform &est, const RigidTransform &gt) {
    return rotation_angle(est.rotation().transpose() * gt.rotation()) * 180.0 / M_PI;
}

double point_rms_error(const RigidTransform &est, const RigidTransform &gt, const PointCloud &cloud) {
    if (cloud.empty()) throw PreconditionError("point RMS error needs a non-empty cloud");
    double sum = 0.0;
    for (const auto &p : cloud.points()) sum += (est.apply(p) - gt.apply(p)).squaredNorm();
    return std::sqrt(sum / static_cast<double>(cloud.size())) * 100.0;
}

void Thresholds::validate() const {
    if (!(te_cm > 0.0) || !(re_deg > 0.0)) throw PreconditionError("success thresholds must be positive");
}

bool is_success(double te_cm, double re_deg, const Thresholds &thr) {
    return te_cm < thr.te_cm && re_deg < thr.re_deg;
}

BenchmarkReport aggregate(std::vector<EvalRecord> records, const Thresholds &thr,
                          const std::vector<std::string> &method_order) {
    thr.validate();
    if (records.empty()) throw PreconditionError("cannot aggregate an empty record set");

    std::vector<std::string> order = method_order;
    std::set<std::string> seen(order.begin(), order.end());
    std::set<std::string> extra;
    for (const auto &r : records) {
        if (!seen.count(r.method)) extra.insert(r.method);
    }
    order.insert(order.end(), extra.begin(), extra.end());
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i], i);

    for (auto &r : records) r.success = r.error.empty() && is_success(r.te_cm, r.re_deg, thr);
    std::stable_sort(records.begin(), records.end(), [&](const EvalRecord &a, const EvalRecord &b) {
        const auto ra = rank.at(a.method), rb = rank.at(b.method);
        if (ra != rb) return ra < rb;
        return a.pair_id < b.pair_id;
    });

    BenchmarkReport report;
    report.thresholds = thr;
    for (const auto &name : order) {
        MethodSummary s;
        s.method = name;
        std::vector<double> te, re;
        double time_sum = 0.0;
        for (const auto &r : records) {
            if (r.method != name) continue;
            ++s.pairs;
            time_sum += r.wall_time;
            if (r.success) {
                ++s.successes;
                te.push_back(r.te_cm);
                re.push_back(r.re_deg);
            }
        }
        if (s.pairs == 0) continue;
        s.recall = static_cast<double>(s.successes) / static_cast<double>(s.pairs);
        const auto t = mean_std(te), q = mean_std(re);
        s.te_mean_cm = t.mean;
        s.te_std_cm = t.std;
        s.re_mean_deg = q.mean;
        s.re_std_deg = q.std;
        s.time_mean_s = time_sum / static_cast<double>(s.pairs);
        report.methods.push_back(s);
    }
    report.records = std::move(records);
    return report;
}

std::string format_table(const BenchmarkReport &report) {
    auto pm = [](double mean, double sd) {
        return std::isfinite(mean) ? fmt::format("{:.2f} ± {:.2f}", mean, sd) : std::string("-");
    };
    std::size_t width = 6;
    for (const auto &m : report.methods) width = std::max(width, m.method.size());
    std::string out = fmt::format("{:<{}}  {:>6}  {:>15}  {:>15}  {:>8}\n", "Method", width, "Recall", "TE (cm)",
                                  "RE (deg)", "T (s)");
    for (const auto &m : report.methods) {
        out += fmt::format("{:<{}}  {:>6.2f}  {:>15}  {:>15}  {:>8.3f}\n", m.method, width, m.recall,
                           pm(m.te_mean_cm, m.te_std_cm), pm(m.re_mean_deg, m.re_std_deg), m.time_mean_s);
    }
    return out;
}

nlohmann::json report_to_json(const BenchmarkReport &report) {
    nlohmann::json j;
    j["thresholds"] = {{"te_cm", report.thresholds.te_cm},
                       {"re_deg", report.thresholds.re_deg},
                       {"te_metric", report.thresholds.metric == TranslationMetric::kTranslation ? "translation"
                                                                                                  : "point-rms"}};
    j["methods"] = nlohmann::json::array();
    for (const auto &m : report.methods) {
        j["methods"].push_back({{"method", m.method},
                                {"recall", m.recall},
                                {"te_mean_cm", num_or_null(m.te_mean_cm)},
                                {"te_std_cm", num_or_null(m.te_std_cm)},
                                {"re_mean_deg", num_or_null(m.re_mean_deg)},
                                {"re_std_deg", num_or_null(m.re_std_deg)},
                                {"time_mean_s", m.time_mean_s},
                                {"pairs", m.pairs},
                                {"successes", m.successes}});
    }
    j["records"] = nlohmann::json::array();
    for (const auto &r : report.records) {
        nlohmann::json rec = {{"pair", r.pair_id},
                              {"method", r.method},
                              {"te_cm", num_or_null(r.te_cm)},
                              {"re_deg", num_or_null(r.re_deg)},
                              {"success", r.success},
                              {"time_s", r.wall_time}};
        if (!r.error.empty()) rec["error"] = r.error;
        j["records"].push_back(std::move(rec));
    }
    return j;
}

std::string report_to_csv(const BenchmarkReport &report) {
    std::string out = "method,recall,te_mean_cm,te_std_cm,re_mean_deg,re_std_deg,time_mean_s\n";
    for (const auto &m : report.methods) {
        out += fmt::format("{},{},{},{},{},{},{}\n", csv_text(m.method), m.recall, csv_num(m.te_mean_cm),
                           csv_num(m.te_std_cm), csv_num(m.re_mean_deg), csv_num(m.re_std_deg),
                           csv_num(m.time_mean_s));
    }
    return out;
}

std::vector<PairEntry> read_manifest(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw FormatError(fmt::format("{}: cannot open manifest", path.string()));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!j.is_array()) throw FormatError(fmt::format("{}: manifest must be a JSON list", path.string()));
    const auto base = path.parent_path();
    std::vector<PairEntry> out;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto &e = j[i];
        auto fail = [&](const std::string &what) {
            throw FormatError(fmt::format("{}: entry {}: {}", path.string(), i, what));
        };
        if (!e.is_object()) fail("not an object");
        for (const char *key : {"source_ply", "target_ply", "gt_transform"}) {
            if (!e.contains(key)) fail(fmt::format("missing '{}'", key));
        }
        if (!e["source_ply"].is_string() || !e["target_ply"].is_string()) fail("paths must be strings");
        PairEntry p;
        p.id = e.contains("id") && e["id"].is_string() ? e["id"].get<std::string>() : fmt::format("pair{:03}", i);
        if (!ids.insert(p.id).second) fail(fmt::format("duplicate id '{}'", p.id));
        p.source_ply = base / e["source_ply"].get<std::string>();
        p.target_ply = base / e["target_ply"].get<std::string>();
        try {
            p.gt = io::transform_from_json(e["gt_transform"]);
        } catch (const FormatError &err) {
            fail(err.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_manifest(const std::vector<PairEntry> &pairs, const std::filesystem::path &path) {
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path &p) {
        const auto r = base.empty() ? p : p.lexically_relative(base);
        return (r.empty() ? p : r).generic_string();
    };
    nlohmann::json j = nlohmann::json::array();
    for (const auto &p : pairs) {
        j.push_back({{"id", p.id},
                     {"source_ply", rel(p.source_ply)},
                     {"target_ply", rel(p.target_ply)},
                     {"gt_transform", io::transform_to_json(p.gt)}});
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw FormatError(fmt::format("{}: cannot write manifest", path.string()));
}

BenchmarkReport run_benchmark(const std::vector<PairEntry> &pairs, const std::vector<MethodBinding> &methods,
                              const BenchmarkOptions &options) {
    options.thresholds.validate();
    if (pairs.empty()) throw PreconditionError("benchmark needs at least one pair");
    if (methods.empty()) throw PreconditionError("benchmark needs at least one method");
    std::set<std::string> names;
    for (const auto &m : methods) {
        if (!names.insert(m.name).second) throw PreconditionError(fmt::format("duplicate method '{}'", m.name));
    }

    struct Loaded {
        PointCloud source, target;
        std::string error;
    };
    std::vector<Loaded> loaded(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        try {
            loaded[i].source = io::read_ply(pairs[i].source_ply);
            loaded[i].target = io::read_ply(pairs[i].target_ply);
        } catch (const std::exception &e) {
            loaded[i].error = fmt::format("load: {}", e.what());
        }
    }

    const std::size_t tasks = pairs.size() * methods.size();
    std::vector<EvalRecord> records(tasks);
    auto run_task = [&](std::size_t k) {
        const std::size_t pi = k / methods.size(), mi = k % methods.size();
        EvalRecord &rec = records[k];
        rec.pair_id = pairs[pi].id;
        rec.method = methods[mi].name;
        rec.te_cm = kNaN;
        rec.re_deg = kNaN;
        if (!loaded[pi].error.empty()) {
            rec.error = loaded[pi].error;
            return;
        }
        const PairData data{pairs[pi], loaded[pi].source, loaded[pi].target};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const RigidTransform est = methods[mi].run(data);
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.te_cm = options.thresholds.metric == TranslationMetric::kTranslation
                            ? translation_error(est, pairs[pi].gt)
                            : point_rms_error(est, pairs[pi].gt, data.source);
            rec.re_deg = rotation_error(est, pairs[pi].gt);
        } catch (const std::exception &e) {
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.error = e.what();
            if (rec.error.empty()) rec.error = "unknown error";
        } catch (...) {
            rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.error = "unknown error";
        }
    };

    parallel_for(tasks, options.workers, run_task);

    std::vector<std::string> order;
    for (const auto &m : methods) order.push_back(m.name);
    return aggregate(std::move(records), options.thresholds, order);
}

}  // namespace xsreg::eval
