// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xsreg/core/error.h"
#include "xsreg/core/geometry.h"
#include "xsreg/eval/evaluation.h"
#include "xsreg/registration/registration.h"

namespace xsreg::bridge {

/// External registration program driven over line-delimited JSON.
///
/// Request (one line):  {"id": str, "source_ply": str, "target_ply": str}
/// Response (one line): {"id": str, "status": "ok" | "error",
///                       "transform": [16 numbers, row-major 4x4], "message": str?}
struct BackendBinding {
    std::string name;
    std::string command;  // run through /bin/sh -c
    std::filesystem::path working_dir;
    double timeout_s = 60.0;
    bool persistent = false;  // keep children alive across requests

    void validate() const;
};

/// Why an external registration produced no transform. what() is the
/// failure text recorded in the benchmark ("timeout", "protocol error: ...",
/// "exit status N: ...", "backend error: ...", "launch failed: ...").
class BackendError : public Error {
public:
    enum class Kind { kTimeout, kProtocol, kExit, kBackend, kLaunch };
    BackendError(Kind kind, const std::string &message) : Error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string request_line(const std::string &id, const std::filesystem::path &source,
                         const std::filesystem::path &target);

/// Validates a response line against the request id. Accepts transforms whose
/// rotation block is orthonormal within 1e-3 (then projected onto SO(3)) and
/// whose last row is 0 0 0 1 within 1e-6.
RigidTransform parse_response(const std::string &line, const std::string &id);

/// A running child process with pipes to its standard streams. The child is
/// placed in its own process group, which is killed on destruction.
class ChildProcess {
public:
    ChildProcess(const std::string &command, const std::filesystem::path &working_dir);
    ~ChildProcess();
    ChildProcess(const ChildProcess &) = delete;
    ChildProcess &operator=(const ChildProcess &) = delete;

    /// Sends one request line and waits for one response line.
    /// Throws BackendError; the child is unusable afterwards unless the
    /// response was well formed.
    RigidTransform request(const std::string &id, const std::filesystem::path &source,
                           const std::filesystem::path &target, double timeout_s, bool close_input);

    /// Waits for exit until the deadline; returns the exit code or throws on timeout.
    int wait(double timeout_s);
    void kill();
    /// False once the process has exited (it is reaped then).
    bool alive();
    const std::string &stderr_text() const { return stderr_; }

private:
    bool pump(int timeout_ms);  // reads available output; false when both streams closed
    std::string take_line();

    int pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    int err_ = -1;
    bool reaped_ = false;
    int status_ = 0;
    std::string out_buf_;
    std::string stderr_;
};

/// One request per process: launch, send, read, wait for exit.
registration::RegistrationResult register_external(const BackendBinding &binding, const std::string &id,
                                                   const std::filesystem::path &source,
                                                   const std::filesystem::path &target);

/// Idle persistent children, one in-flight request each; broken children
/// are discarded and replaced on demand.
class BackendPool {
public:
    explicit BackendPool(BackendBinding binding);
    RigidTransform request(const std::string &id, const std::filesystem::path &source,
                           const std::filesystem::path &target);

private:
    BackendBinding binding_;
    std::mutex mutex_;
    std::vector<std::unique_ptr<ChildProcess>> idle_;
};

/// Benchmark method backed by `binding`. Failures become error records.
eval::MethodBinding make_method(const BackendBinding &binding);

/// Parses NAME=COMMAND.
BackendBinding parse_binding(const std::string &spec, double timeout_s, bool persistent);

}  // namespace xsreg::bridge
