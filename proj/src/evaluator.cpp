#include "spearmm/evaluator.hpp"

#include "spearmm/merger.hpp"

#include "json.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>

namespace spearmm {

namespace {

struct Fd {
    int fd = -1;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

struct ChildOutput {
    int status = 0;
    bool timed_out = false;
    std::string out;
    std::string err;
};

ChildOutput run_shell(const std::string & cmdline, std::chrono::milliseconds timeout) {
    int out_pipe[2], err_pipe[2];
    if (::pipe(out_pipe) != 0) throw EvaluatorError("pipe() failed");
    if (::pipe(err_pipe) != 0) {
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        throw EvaluatorError("pipe() failed");
    }
    Fd out_r{out_pipe[0]}, out_w{out_pipe[1]}, err_r{err_pipe[0]}, err_w{err_pipe[1]};

    const pid_t pid = ::fork();
    if (pid < 0) throw EvaluatorError("fork() failed");
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_w.fd, STDOUT_FILENO);
        ::dup2(err_w.fd, STDERR_FILENO);
        ::close(out_r.fd);
        ::close(err_r.fd);
        ::close(out_w.fd);
        ::close(err_w.fd);
        ::execl("/bin/sh", "sh", "-c", cmdline.c_str(), static_cast<char *>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_w.reset();
    err_w.reset();

    ChildOutput res;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::array<char, 4096> buf{};
    bool out_open = true, err_open = true;
    while (out_open || err_open) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            res.timed_out = true;
            break;
        }
        pollfd fds[2] = {{out_open ? out_r.fd : -1, POLLIN, 0}, {err_open ? err_r.fd : -1, POLLIN, 0}};
        const int rc = ::poll(fds, 2, static_cast<int>(std::min<long long>(left.count(), 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
            if (n > 0) {
                (i == 0 ? res.out : res.err).append(buf.data(), static_cast<std::size_t>(n));
            } else {
                (i == 0 ? out_open : err_open) = false;
            }
        }
    }
    if (res.timed_out) {
        ::kill(-pid, SIGKILL);
    }
    while (::waitpid(pid, &res.status, 0) < 0 && errno == EINTR) {
    }
    return res;
}

} // namespace

std::string shell_quote(const std::string & s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') q += "'\\''";
        else q += c;
    }
    return q + "'";
}

EvalScores parse_eval_output(const std::string & text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &) {
        throw EvaluatorError("evaluator output is not a JSON object");
    }
    auto field = [&](const char * key) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
            throw EvaluatorError(std::string("evaluator output lacks numeric '") + key + "'");
        }
        const double v = j[key].get<double>();
        if (!(v >= 0.0 && v <= 1.0)) {
            throw EvaluatorError(std::string("evaluator '") + key + "' outside [0,1]");
        }
        return v;
    };
    return {field("domain_score"), field("general_score")};
}

EvalScores CommandEvaluator::evaluate(const EvalRequest & request) {
    const auto res = run_shell(command_ + " --model " + shell_quote(request.model_path.string()), timeout_);
    if (res.timed_out) {
        throw EvaluatorError("evaluator timed out after " + std::to_string(timeout_.count()) + " ms");
    }
    if (!WIFEXITED(res.status) || WEXITSTATUS(res.status) != 0) {
        std::string msg = "evaluator failed";
        if (WIFEXITED(res.status)) msg += " with exit code " + std::to_string(WEXITSTATUS(res.status));
        if (!res.err.empty()) msg += ": " + res.err.substr(0, 512);
        throw EvaluatorError(msg);
    }
    return parse_eval_output(res.out);
}

EvalScores proxy_scores(const Checkpoint & base, const Checkpoint & adapted, const Checkpoint & merged) {
    const Alignment al = aligned_pairs(base, adapted);
    double d_ab = 0.0, d_mb = 0.0, d_ma = 0.0;
    for (const auto & pair : al.pairs) {
        const TensorRecord * m = merged.find(pair.adapted->name);
        if (!m || m->data.size() != pair.adapted->data.size()) {
            throw EvaluatorError("merged checkpoint lacks tensor '" + pair.adapted->name + "'");
        }
        d_ab += frobenius_distance(pair.adapted->data, pair.base->data);
        d_mb += frobenius_distance(m->data, pair.base->data);
        d_ma += frobenius_distance(m->data, pair.adapted->data);
    }
    if (d_ab == 0.0) {
        return {1.0, 1.0};
    }
    return {std::clamp(1.0 - d_ma / d_ab, 0.0, 1.0), std::clamp(1.0 - d_mb / d_ab, 0.0, 1.0)};
}

EvalScores ProxyEvaluator::evaluate(const EvalRequest & request) {
    return proxy_scores(base_, adapted_, request.merged);
}

} // namespace spearmm
