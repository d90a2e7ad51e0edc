// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/bridge/bridge.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>

namespace xsreg::bridge {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxLine = 1 << 20;
constexpr std::size_t kMaxStderr = 64 * 1024;

// A dying child must surface as EPIPE on write, not terminate the harness.
void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string tail(const std::string &s, std::size_t n = 400) {
    std::string t = s.size() > n ? s.substr(s.size() - n) : s;
    while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
    return t;
}

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::max<long long>(0, left));
}

Clock::time_point deadline_after(double seconds) {
    return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

void close_fd(int &fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

void BackendBinding::validate() const {
    if (name.empty()) throw PreconditionError("backend name is empty");
    if (command.empty()) throw PreconditionError(fmt::format("backend '{}': command is empty", name));
    if (!(timeout_s > 0.0) || !std::isfinite(timeout_s)) {
        throw PreconditionError(fmt::format("backend '{}': timeout must be positive", name));
    }
}

std::string request_line(const std::string &id, const std::filesystem::path &source,
                         const std::filesystem::path &target) {
    nlohmann::json j = {{"id", id}, {"source_ply", source.string()}, {"target_ply", target.string()}};
    return j.dump() + "\n";
}

RigidTransform parse_response(const std::string &line, const std::string &id) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: response is not JSON");
    }
    if (!j.is_object()) throw BackendError(BackendError::Kind::kProtocol, "protocol error: response is not an object");
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>() != id) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: id mismatch");
    }
    if (!j.contains("status") || !j["status"].is_string()) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: missing status");
    }
    const std::string status = j["status"].get<std::string>();
    if (status == "error") {
        std::string msg = j.contains("message") && j["message"].is_string() ? j["message"].get<std::string>() : "";
        throw BackendError(BackendError::Kind::kBackend, "backend error: " + (msg.empty() ? "unspecified" : msg));
    }
    if (status != "ok") throw BackendError(BackendError::Kind::kProtocol, "protocol error: unknown status");
    if (!j.contains("transform") || !j["transform"].is_array() || j["transform"].size() != 16) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: transform must have 16 numbers");
    }
    Mat4 m;
    for (int k = 0; k < 16; ++k) {
        const auto &v = j["transform"][static_cast<std::size_t>(k)];
        if (!v.is_number()) throw BackendError(BackendError::Kind::kProtocol, "protocol error: non-numeric transform");
        m(k / 4, k % 4) = v.get<double>();
    }
    if (!m.allFinite()) throw BackendError(BackendError::Kind::kProtocol, "protocol error: non-finite transform");
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-6) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: last row must be 0 0 0 1");
    }
    const Mat3 r = m.topLeftCorner<3, 3>();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-3 || r.determinant() <= 0.0) {
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: transform is not rigid");
    }
    return RigidTransform::from_matrix_projected(m);
}

ChildProcess::ChildProcess(const std::string &command, const std::filesystem::path &working_dir) {
    ignore_sigpipe();
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw BackendError(BackendError::Kind::kLaunch, "launch failed: pipe");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw BackendError(BackendError::Kind::kLaunch, "launch failed: pipe");
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        throw BackendError(BackendError::Kind::kLaunch, "launch failed: pipe");
    }
    const std::string dir = working_dir.string();
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
        throw BackendError(BackendError::Kind::kLaunch, "launch failed: fork");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::signal(SIGPIPE, SIG_DFL);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        if (!dir.empty() && ::chdir(dir.c_str()) != 0) {
            const char msg[] = "cannot enter working directory\n";
            (void)!::write(STDERR_FILENO, msg, sizeof(msg) - 1);
            ::_exit(126);
        }
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    pid_ = pid;
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    in_ = in_pipe[1];
    out_ = out_pipe[0];
    err_ = err_pipe[0];
    ::fcntl(out_, F_SETFL, O_NONBLOCK);
    ::fcntl(err_, F_SETFL, O_NONBLOCK);
}

ChildProcess::~ChildProcess() {
    kill();
    close_fd(in_);
    close_fd(out_);
    close_fd(err_);
}

void ChildProcess::kill() {
    if (pid_ > 0 && !reaped_) {
        ::kill(-pid_, SIGKILL);
        ::kill(pid_, SIGKILL);
        while (::waitpid(pid_, &status_, 0) < 0 && errno == EINTR) {
        }
        reaped_ = true;
    }
}

bool ChildProcess::alive() {
    if (!reaped_ && ::waitpid(pid_, &status_, WNOHANG) == pid_) reaped_ = true;
    return !reaped_;
}

bool ChildProcess::pump(int timeout_ms) {
    pollfd fds[2];
    nfds_t n = 0;
    if (out_ >= 0) fds[n++] = {out_, POLLIN, 0};
    if (err_ >= 0) fds[n++] = {err_, POLLIN, 0};
    if (n == 0) return false;
    const int rc = ::poll(fds, n, timeout_ms);
    if (rc < 0 && errno != EINTR) throw BackendError(BackendError::Kind::kLaunch, "launch failed: poll");
    if (rc <= 0) return true;
    char buf[8192];
    for (nfds_t i = 0; i < n; ++i) {
        if (fds[i].revents == 0) continue;
        int &fd = fds[i].fd == out_ ? out_ : err_;
        std::string &sink = &fd == &out_ ? out_buf_ : stderr_;
        for (;;) {
            const ssize_t got = ::read(fd, buf, sizeof(buf));
            if (got > 0) {
                if (&fd == &err_) {
                    if (sink.size() < kMaxStderr) sink.append(buf, static_cast<std::size_t>(got));
                } else {
                    sink.append(buf, static_cast<std::size_t>(got));
                }
                continue;
            }
            if (got == 0 || (errno != EAGAIN && errno != EINTR)) close_fd(fd);
            break;
        }
    }
    return out_ >= 0 || err_ >= 0;
}

std::string ChildProcess::take_line() {
    const auto nl = out_buf_.find('\n');
    if (nl == std::string::npos) return {};
    std::string line = out_buf_.substr(0, nl);
    out_buf_.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

int ChildProcess::wait(double timeout_s) {
    const auto deadline = deadline_after(timeout_s);
    for (;;) {
        if (!reaped_) {
            const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
            if (r == pid_) reaped_ = true;
        }
        if (reaped_) {
            // Collect what the child wrote before exiting; a leftover grandchild
            // holding the pipes open must not stall us.
            const auto drain = std::min(deadline, deadline_after(0.1));
            while ((out_ >= 0 || err_ >= 0) && remaining_ms(drain) > 0) pump(std::min(remaining_ms(drain), 10));
            if (WIFEXITED(status_)) return WEXITSTATUS(status_);
            if (WIFSIGNALED(status_)) return 128 + WTERMSIG(status_);
            return -1;
        }
        if (remaining_ms(deadline) == 0) {
            kill();
            throw BackendError(BackendError::Kind::kTimeout, "timeout");
        }
        pump(std::min(remaining_ms(deadline), 20));
    }
}

RigidTransform ChildProcess::request(const std::string &id, const std::filesystem::path &source,
                                     const std::filesystem::path &target, double timeout_s, bool close_input) {
    const auto deadline = deadline_after(timeout_s);
    const std::string req = request_line(id, source, target);
    std::size_t sent = 0;
    while (sent < req.size()) {
        const ssize_t w = ::write(in_, req.data() + sent, req.size() - sent);
        if (w < 0) {
            if (errno == EINTR) continue;
            break;  // the child is gone; its exit status explains why
        }
        sent += static_cast<std::size_t>(w);
    }
    if (close_input) close_fd(in_);

    std::string line;
    bool have_line = false;
    for (;;) {
        if (out_buf_.find('\n') != std::string::npos) {
            line = take_line();
            have_line = true;
            break;
        }
        if (out_buf_.size() > kMaxLine) {
            kill();
            throw BackendError(BackendError::Kind::kProtocol, "protocol error: response line too long");
        }
        if (out_ < 0) break;  // stdout closed without a full line
        const int left = remaining_ms(deadline);
        if (left == 0) {
            kill();
            throw BackendError(BackendError::Kind::kTimeout, "timeout");
        }
        pump(std::min(left, 50));
    }

    if (!have_line) {
        const int code = wait(std::max(0.05, std::chrono::duration<double>(deadline - Clock::now()).count()));
        if (code != 0) {
            throw BackendError(BackendError::Kind::kExit,
                               fmt::format("exit status {}: {}", code, tail(stderr_)));
        }
        throw BackendError(BackendError::Kind::kProtocol, "protocol error: no response line");
    }
    return parse_response(line, id);
}

registration::RegistrationResult register_external(const BackendBinding &binding, const std::string &id,
                                                   const std::filesystem::path &source,
                                                   const std::filesystem::path &target) {
    binding.validate();
    const auto t0 = Clock::now();
    ChildProcess child(binding.command, binding.working_dir);
    RigidTransform t;
    try {
        t = child.request(id, source, target, binding.timeout_s, true);
    } catch (const BackendError &e) {
        if (e.kind() == BackendError::Kind::kProtocol || e.kind() == BackendError::Kind::kBackend) {
            // A crash that left garbage behind is reported as the crash.
            int code = 0;
            try {
                code = child.wait(0.5);
            } catch (const BackendError &) {
                throw e;
            }
            if (code != 0) {
                throw BackendError(BackendError::Kind::kExit,
                                   fmt::format("exit status {}: {}", code, tail(child.stderr_text())));
            }
        }
        throw;
    }
    const double left = binding.timeout_s - std::chrono::duration<double>(Clock::now() - t0).count();
    const int code = child.wait(std::max(left, 0.05));
    if (code != 0) {
        throw BackendError(BackendError::Kind::kExit, fmt::format("exit status {}: {}", code, tail(child.stderr_text())));
    }
    registration::RegistrationResult r;
    r.transform = t;
    r.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

BackendPool::BackendPool(BackendBinding binding) : binding_(std::move(binding)) { binding_.validate(); }

RigidTransform BackendPool::request(const std::string &id, const std::filesystem::path &source,
                                    const std::filesystem::path &target) {
    std::unique_ptr<ChildProcess> child;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        // Children that exited while idle are dropped, not blamed on this request.
        while (!child && !idle_.empty()) {
            child = std::move(idle_.back());
            idle_.pop_back();
            if (!child->alive()) child.reset();
        }
    }
    if (!child) child = std::make_unique<ChildProcess>(binding_.command, binding_.working_dir);
    RigidTransform t;
    try {
        t = child->request(id, source, target, binding_.timeout_s, false);
    } catch (const BackendError &e) {
        if (e.kind() == BackendError::Kind::kBackend) {
            std::lock_guard<std::mutex> lock(mutex_);
            idle_.push_back(std::move(child));
        }
        throw;
    }
    std::lock_guard<std::mutex> lock(mutex_);
    idle_.push_back(std::move(child));
    return t;
}

eval::MethodBinding make_method(const BackendBinding &binding) {
    binding.validate();
    if (binding.persistent) {
        auto pool = std::make_shared<BackendPool>(binding);
        return {binding.name, [pool](const eval::PairData &d) {
                    return pool->request(d.entry.id, d.entry.source_ply, d.entry.target_ply);
                }};
    }
    return {binding.name, [binding](const eval::PairData &d) {
                return register_external(binding, d.entry.id, d.entry.source_ply, d.entry.target_ply).transform;
            }};
}

BackendBinding parse_binding(const std::string &spec, double timeout_s, bool persistent) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw PreconditionError(fmt::format("backend '{}': expected NAME=COMMAND", spec));
    }
    BackendBinding b;
    b.name = spec.substr(0, eq);
    b.command = spec.substr(eq + 1);
    b.timeout_s = timeout_s;
    b.persistent = persistent;
    b.validate();
    return b;
}

}  // namespace xsreg::bridge
