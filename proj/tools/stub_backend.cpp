// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

// Test backend speaking the bridge protocol, with fault injection.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <thread>

#include "xsreg/eval/evaluation.h"
#include "xsreg/io/transform_io.h"

namespace {

void respond_ok(const std::string &id, const xsreg::RigidTransform &t) {
    nlohmann::json j = {{"id", id}, {"status", "ok"}, {"transform", xsreg::io::transform_to_json(t)}};
    std::cout << j.dump() << "\n" << std::flush;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"xsreg stub backend"};
    std::string mode = "identity";
    std::string manifest;
    double sleep_s = 0.0;
    std::string slow_id;
    bool persistent = false;
    app.add_option("--mode", mode, "identity|gt|sleep|garbage|random-bytes|crash|exit|error")
        ->check(CLI::IsMember({"identity", "gt", "sleep", "garbage", "random-bytes", "crash", "exit", "error"}));
    app.add_option("--manifest", manifest, "pair manifest (gt mode)");
    app.add_option("--sleep", sleep_s, "seconds to sleep before answering");
    app.add_option("--slow-id", slow_id, "sleep only for this request id");
    app.add_flag("--persistent", persistent, "serve requests until end of input");
    CLI11_PARSE(app, argc, argv);

    std::map<std::string, xsreg::RigidTransform> gt;
    if (mode == "gt") {
        if (manifest.empty()) {
            std::cerr << "gt mode needs --manifest\n";
            return 2;
        }
        for (const auto &e : xsreg::eval::read_manifest(manifest)) gt[e.id] = e.gt;
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(line);
        } catch (const std::exception &) {
            std::cerr << "bad request\n";
            return 2;
        }
        const std::string id = req.value("id", "");
        if (sleep_s > 0.0 && (slow_id.empty() || slow_id == id)) std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));

        if (mode == "identity" || mode == "sleep") {
            respond_ok(id, {});
        } else if (mode == "gt") {
            auto it = gt.find(id);
            if (it == gt.end()) {
                std::cout << nlohmann::json{{"id", id}, {"status", "error"}, {"message", "unknown id"}}.dump() << "\n"
                          << std::flush;
            } else {
                respond_ok(id, it->second);
            }
        } else if (mode == "garbage") {
            std::cout << "this is not json\n" << std::flush;
        } else if (mode == "random-bytes") {
            std::mt19937_64 rng(std::hash<std::string>{}(id));
            std::uniform_int_distribution<int> byte(0, 255);
            std::string junk(256 + rng() % 4096, '\0');
            for (char &c : junk) c = static_cast<char>(byte(rng));
            std::cout << junk << "\n" << std::flush;
        } else if (mode == "crash") {
            std::cerr << "stub: crashing on " << id << "\n";
            std::abort();
        } else if (mode == "exit") {
            std::cerr << "stub: giving up on " << id << "\n";
            return 3;
        } else {
            std::cout << nlohmann::json{{"id", id}, {"status", "error"}, {"message", "stub failure"}}.dump() << "\n"
                      << std::flush;
        }
        if (!persistent) break;
    }
    return 0;
}
