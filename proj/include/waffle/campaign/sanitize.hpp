#pragma once

#include <cerrno>
#include <csignal>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "waffle/attack/run.hpp"
#include "waffle/util/errors.hpp"

namespace waffle {

struct SanitizerOutcome {
    std::vector<std::string> lines;
    std::vector<bool> passed_through;  // true where the input fell through on timeout
    bool timed_out = false;
};

// Runs `command` through /bin/sh with the inputs on stdin, one text per
// line; expects the same number of lines back, order preserving. The
// subprocess is invoked once for the whole batch. A stalled line past the
// per-line timeout kills the child and passes the remaining inputs through
// unsanitized (flagged); a wrong line count or nonzero exit status is an
// error.
inline SanitizerOutcome run_sanitizer(const std::string& command, const std::vector<std::string>& inputs,
                                      double per_line_timeout_sec = 30.0) {
    // The child may legitimately ignore stdin; writes then raise EPIPE
    // instead of killing the process.
    std::signal(SIGPIPE, SIG_IGN);

    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw IoError("sanitizer: pipe() failed");

    pid_t pid = fork();
    if (pid < 0) throw IoError("sanitizer: fork() failed");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    std::thread writer([fd = to_child[1], &inputs]() {
        for (const auto& line : inputs) {
            std::string payload = line + "\n";
            std::size_t off = 0;
            while (off < payload.size()) {
                ssize_t n = write(fd, payload.data() + off, payload.size() - off);
                if (n <= 0) {
                    close(fd);
                    return;
                }
                off += static_cast<std::size_t>(n);
            }
        }
        close(fd);
    });

    SanitizerOutcome outcome;
    outcome.passed_through.assign(inputs.size(), false);

    std::string buffer;
    bool killed = false;
    bool overflow = false;
    const int timeout_ms = per_line_timeout_sec <= 0 ? -1 : static_cast<int>(per_line_timeout_sec * 1000.0);

    int fd = from_child[0];
    for (;;) {
        struct pollfd pfd {fd, POLLIN, 0};
        int ready = poll(&pfd, 1, timeout_ms);
        if (ready == 0) {
            // current line stalled past its deadline
            kill(pid, SIGKILL);
            killed = true;
            outcome.timed_out = true;
            break;
        }
        if (ready < 0) {
            if (errno == EINTR) continue;
            kill(pid, SIGKILL);
            killed = true;
            break;
        }
        char chunk[4096];
        ssize_t n = read(fd, chunk, sizeof(chunk));
        if (n <= 0) break;  // EOF
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            outcome.lines.push_back(buffer.substr(0, pos));
            buffer.erase(0, pos + 1);
        }
        if (outcome.lines.size() > inputs.size()) {
            kill(pid, SIGKILL);
            killed = true;
            overflow = true;
            break;
        }
    }
    if (!buffer.empty()) outcome.lines.push_back(buffer);  // unterminated final line
    close(fd);
    writer.join();

    int status = 0;
    waitpid(pid, &status, 0);

    if (overflow) throw DataError("sanitizer wrote more lines than it was given");

    if (outcome.timed_out) {
        // everything not yet produced falls back to the input, flagged
        for (std::size_t i = outcome.lines.size(); i < inputs.size(); ++i) {
            outcome.lines.push_back(inputs[i]);
            outcome.passed_through[i] = true;
        }
        if (outcome.lines.size() > inputs.size())
            throw DataError("sanitizer wrote more lines than it was given");
        return outcome;
    }
    if (!killed) {
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
            throw DataError("sanitizer exited with nonzero status");
    }
    if (outcome.lines.size() != inputs.size())
        throw DataError("sanitizer line count mismatch: sent " + std::to_string(inputs.size()) +
                        ", received " + std::to_string(outcome.lines.size()));
    return outcome;
}

struct SanitizeEvalOutput {
    AuditReport before;  // perturbed texts, unmodified
    AuditReport after;   // sanitizer output
    Dataset sanitized;
    std::vector<bool> passed_through;  // per dataset example
    bool timed_out = false;
};

// Feeds every segment of every perturbed example through the sanitizer
// (one text per line, segments flattened in order) and recomputes the
// audit metrics before and after.
inline SanitizeEvalOutput sanitize_evaluate(const Dataset& clean, const Dataset& perturbed,
                                            const std::string& sanitizer_command,
                                            const MultiExitClassifier& model, const PolicyConfig& policy,
                                            const TextPipeline& pipeline,
                                            double per_line_timeout_sec = 30.0, unsigned workers = 1) {
    if (clean.size() != perturbed.size())
        throw DataError("sanitize_evaluate: clean/perturbed size mismatch");
    if (perturbed.empty()) throw DataError("sanitize_evaluate: empty dataset");

    std::vector<std::string> lines;
    for (const auto& ex : perturbed)
        for (const auto& seg : ex.segments) lines.push_back(seg);

    auto outcome = run_sanitizer(sanitizer_command, lines, per_line_timeout_sec);

    SanitizeEvalOutput out;
    out.timed_out = outcome.timed_out;
    out.sanitized = perturbed;
    out.passed_through.assign(perturbed.size(), false);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < out.sanitized.size(); ++i) {
        for (auto& seg : out.sanitized[i].segments) {
            seg = outcome.lines.at(cursor);
            if (outcome.passed_through[cursor]) out.passed_through[i] = true;
            ++cursor;
        }
    }

    out.before = evaluate_pair(clean, perturbed, model, policy, pipeline, "pre-sanitize", workers);
    out.after = evaluate_pair(clean, out.sanitized, model, policy, pipeline,
                              "sanitized[" + sanitizer_command + "]", workers);
    return out;
}

}  // namespace waffle
