#include "mbrd/external_scorer.hpp"

#include <csignal>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "mbrd/errors.hpp"

namespace mbrd {

using nlohmann::json;

ExternalScorerConfig load_scorer_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open scorer config: " + path);
    }
    json doc;
    try {
        in >> doc;
        ExternalScorerConfig cfg;
        cfg.command = doc.at("command").get<std::vector<std::string>>();
        if (cfg.command.empty()) {
            throw ValidationError("scorer config has an empty command");
        }
        if (doc.contains("batch_size")) {
            cfg.batch_size = doc.at("batch_size").get<int>();
        }
        if (doc.contains("timeout_ms")) {
            cfg.timeout_ms = doc.at("timeout_ms").get<int>();
        }
        if (doc.contains("id")) {
            cfg.id = doc.at("id").get<std::string>();
        }
        if (doc.contains("range")) {
            auto r = doc.at("range").get<std::vector<double>>();
            if (r.size() != 2 || !(r[0] < r[1])) {
                throw ValidationError("scorer range must be [lo, hi] with lo < hi");
            }
            cfg.range = {r[0], r[1]};
        }
        if (cfg.batch_size < 1) {
            throw ValidationError("scorer batch_size must be >= 1");
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError("malformed scorer config " + path + ": " + e.what());
    }
}

struct ExternalScorer::Process {
    pid_t pid = -1;
    int to_child = -1;    // our write end of the child's stdin
    int from_child = -1;  // our read end of the child's stdout
    std::string read_buffer;

    ~Process() {
        if (to_child >= 0) close(to_child);
        if (from_child >= 0) close(from_child);
        if (pid > 0) {
            kill(pid, SIGTERM);
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid, &status, WNOHANG) != 0) {
                    return;
                }
                usleep(10 * 1000);
            }
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
        }
    }
};

namespace {

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

ExternalScorer::ExternalScorer(ExternalScorerConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) {
        throw ValidationError("external scorer needs a command");
    }
}

ExternalScorer::~ExternalScorer() = default;

void ExternalScorer::ensure_started() const {
    if (process_) {
        return;
    }
    // A dying child must surface as a read/write error, not a SIGPIPE kill.
    std::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2];   // parent -> child
    int out_pipe[2];  // child -> parent
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
        throw ScorerError("cannot create scorer pipes");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        throw ScorerError("cannot fork scorer process");
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        std::vector<char*> argv;
        argv.reserve(config_.command.size() + 1);
        for (const std::string& arg : config_.command) {
            argv.push_back(const_cast<char*>(arg.c_str()));
        }
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    set_nonblocking(in_pipe[1]);
    set_nonblocking(out_pipe[0]);

    process_ = std::make_unique<Process>();
    process_->pid = pid;
    process_->to_child = in_pipe[1];
    process_->from_child = out_pipe[0];
}

std::vector<std::pair<std::string, double>> ExternalScorer::score_batch_ids(
    const std::vector<std::tuple<std::string, std::string, std::string>>& pairs) const {
    std::lock_guard<std::mutex> lock(channel_mutex_);
    ensure_started();

    std::vector<std::pair<std::string, double>> results;
    results.reserve(pairs.size());

    for (size_t chunk_begin = 0; chunk_begin < pairs.size();
         chunk_begin += static_cast<size_t>(config_.batch_size)) {
        const size_t chunk_end =
            std::min(pairs.size(), chunk_begin + static_cast<size_t>(config_.batch_size));

        std::string outbox;
        std::unordered_map<std::string, size_t> pending;  // id -> result slot
        for (size_t i = chunk_begin; i < chunk_end; ++i) {
            const auto& [id, hyp, ref] = pairs[i];
            if (!pending.emplace(id, results.size() + (i - chunk_begin)).second) {
                throw ScorerError("duplicate request id '" + id + "'");
            }
            json req{{"id", id}, {"hyp", hyp}, {"ref", ref}};
            outbox += req.dump();
            outbox += '\n';
        }
        results.resize(results.size() + (chunk_end - chunk_begin));

        // Duplex pump: keep writing requests while draining responses so a
        // chunk larger than the pipe capacity cannot deadlock.
        size_t written = 0;
        size_t received = 0;
        const size_t expected = chunk_end - chunk_begin;
        while (received < expected) {
            pollfd fds[2];
            nfds_t nfds = 0;
            fds[nfds].fd = process_->from_child;
            fds[nfds].events = POLLIN;
            ++nfds;
            if (written < outbox.size()) {
                fds[nfds].fd = process_->to_child;
                fds[nfds].events = POLLOUT;
                ++nfds;
            }
            const int ready = poll(fds, nfds, config_.timeout_ms);
            if (ready < 0) {
                throw ScorerError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (ready == 0) {
                std::string missing;
                for (const auto& [id, slot] : pending) {
                    missing = id;
                    break;
                }
                throw ScorerError("scorer timed out after " + std::to_string(config_.timeout_ms) +
                                  " ms; response missing for id '" + missing + "'");
            }
            if (nfds > 1 && (fds[1].revents & (POLLOUT | POLLERR))) {
                const ssize_t n = write(process_->to_child, outbox.data() + written,
                                        outbox.size() - written);
                if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
                    throw ScorerError(std::string("scorer closed its input: ") +
                                      std::strerror(errno));
                }
                if (n > 0) {
                    written += static_cast<size_t>(n);
                }
            }
            if (fds[0].revents & (POLLIN | POLLHUP)) {
                char buf[4096];
                const ssize_t n = read(process_->from_child, buf, sizeof(buf));
                if (n == 0) {
                    throw ScorerError("scorer exited before answering all requests");
                }
                if (n < 0) {
                    if (errno == EAGAIN || errno == EWOULDBLOCK) {
                        continue;
                    }
                    throw ScorerError(std::string("scorer read failed: ") + std::strerror(errno));
                }
                process_->read_buffer.append(buf, static_cast<size_t>(n));
                size_t newline;
                while ((newline = process_->read_buffer.find('\n')) != std::string::npos) {
                    const std::string line = process_->read_buffer.substr(0, newline);
                    process_->read_buffer.erase(0, newline + 1);
                    if (line.empty()) {
                        continue;
                    }
                    json resp;
                    try {
                        resp = json::parse(line);
                    } catch (const json::exception& e) {
                        throw ScorerError(std::string("malformed scorer response: ") + e.what());
                    }
                    if (!resp.contains("id") || !resp.contains("score") ||
                        !resp["score"].is_number()) {
                        throw ScorerError("scorer response must carry id and numeric score: " +
                                          line);
                    }
                    const std::string id = resp["id"].get<std::string>();
                    auto it = pending.find(id);
                    if (it == pending.end()) {
                        throw ScorerError("scorer answered unexpected id '" + id + "'");
                    }
                    const double value = resp["score"].get<double>();
                    if (value < config_.range.first || value > config_.range.second) {
                        throw ScorerError("scorer returned out-of-range score " +
                                          std::to_string(value) + " for id '" + id + "'");
                    }
                    results[it->second] = {id, value};
                    pending.erase(it);
                    received += 1;
                }
            }
        }
    }
    return results;
}

double ExternalScorer::score(const std::string& hyp, const std::string& ref) const {
    std::vector<std::tuple<std::string, std::string, std::string>> pairs;
    pairs.emplace_back("0", hyp, ref);
    return score_batch_ids(pairs)[0].second;
}

std::vector<double> ExternalScorer::score_batch(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
    std::vector<std::tuple<std::string, std::string, std::string>> with_ids;
    with_ids.reserve(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        with_ids.emplace_back(std::to_string(i), pairs[i].first, pairs[i].second);
    }
    const auto scored = score_batch_ids(with_ids);
    std::vector<double> out;
    out.reserve(scored.size());
    for (const auto& [id, value] : scored) {
        out.push_back(value);
    }
    return out;
}

}  // namespace mbrd
