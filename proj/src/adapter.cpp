#include "tilecount/adapter.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "tilecount/errors.hpp"

namespace tilecount {

using nlohmann::json;

ExternalAdapter::ExternalAdapter(const std::string& command) {
    int to_pipe[2];   // parent -> child
    int from_pipe[2]; // child -> parent
    if (pipe(to_pipe) != 0) throw IoError("pipe() failed");
    if (pipe(from_pipe) != 0) {
        close(to_pipe[0]);
        close(to_pipe[1]);
        throw IoError("pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {to_pipe[0], to_pipe[1], from_pipe[0], from_pipe[1]}) close(fd);
        throw IoError("fork() failed");
    }
    if (pid == 0) {
        // Own process group so teardown can reach the shell and anything
        // it spawns; SIG_IGN dispositions survive exec, so restore the
        // defaults the adapter expects.
        setpgid(0, 0);
        dup2(to_pipe[0], STDIN_FILENO);
        dup2(from_pipe[1], STDOUT_FILENO);
        for (int fd : {to_pipe[0], to_pipe[1], from_pipe[0], from_pipe[1]}) close(fd);
        signal(SIGTERM, SIG_DFL);
        signal(SIGINT, SIG_DFL);
        signal(SIGPIPE, SIG_DFL);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid); // either side may win the race; both set the same group
    close(to_pipe[0]);
    close(from_pipe[1]);
    child_pid_ = pid;
    to_child_ = to_pipe[1];
    from_child_ = from_pipe[0];
    // A dying child must surface as an error, not kill the parent.
    signal(SIGPIPE, SIG_IGN);
}

ExternalAdapter::~ExternalAdapter() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (child_pid_ > 0) {
        // Whole process group: the shell may or may not have exec'd into
        // the adapter, and the adapter may have children of its own.
        kill(-child_pid_, SIGTERM);
        int status = 0;
        bool reaped = false;
        for (int i = 0; i < 100 && !reaped; ++i) {
            reaped = waitpid(child_pid_, &status, WNOHANG) == child_pid_;
            if (!reaped) usleep(10 * 1000);
        }
        kill(-child_pid_, SIGKILL);
        if (!reaped) waitpid(child_pid_, &status, WNOHANG);
    }
}

bool ExternalAdapter::alive() const {
    if (child_pid_ <= 0 || poisoned_) return false;
    return kill(child_pid_, 0) == 0;
}

void ExternalAdapter::fail(const std::string&) { poisoned_ = true; }

std::string ExternalAdapter::read_line(int timeout_ms) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            fail("timeout");
            throw BackendError(BackendError::Kind::Timeout,
                               "adapter did not reply within " + std::to_string(timeout_ms) + " ms");
        }
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(std::max<long long>(1, remaining)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll");
            throw IoError(std::string("poll() failed: ") + std::strerror(errno));
        }
        if (rc == 0) continue; // loop re-checks the deadline
        char chunk[4096];
        const ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("read");
            throw IoError(std::string("read() failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            fail("eof");
            throw BackendError(BackendError::Kind::ProcessExit, "adapter process closed its output");
        }
        buffer_.append(chunk, static_cast<size_t>(n));
    }
}

std::vector<Detection> ExternalAdapter::detect(const std::string& image_id, const Tile& tile,
                                               const std::string& tile_path, int timeout_ms) {
    if (poisoned_)
        throw BackendError(BackendError::Kind::Other,
                           "adapter stream is out of sync after an earlier failure");
    const long id = next_request_id_++;
    json req = {{"request_id", id},
                {"image_id", image_id},
                {"tile",
                 {{"row", tile.row},
                  {"col", tile.col},
                  {"side", tile.side},
                  {"origin_x", tile.origin_x},
                  {"origin_y", tile.origin_y}}},
                {"tile_path", tile_path}};
    const std::string line = req.dump() + "\n";
    size_t off = 0;
    while (off < line.size()) {
        const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("write");
            throw BackendError(BackendError::Kind::ProcessExit,
                               "adapter stdin closed (" + std::string(std::strerror(errno)) + ")");
        }
        off += static_cast<size_t>(n);
    }

    const std::string reply = read_line(timeout_ms);
    json doc = json::parse(reply, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        fail("parse");
        throw BackendError(BackendError::Kind::Protocol, "adapter reply is not a JSON object: " +
                                                             reply.substr(0, 200));
    }
    if (!doc.contains("request_id") || !doc["request_id"].is_number_integer() ||
        doc["request_id"].get<long>() != id) {
        fail("id");
        throw BackendError(BackendError::Kind::Protocol, "adapter reply has mismatched request_id");
    }
    if (!doc.contains("boxes") || !doc["boxes"].is_array()) {
        fail("boxes");
        throw BackendError(BackendError::Kind::Protocol, "adapter reply missing 'boxes' array");
    }
    std::vector<Detection> out;
    const double side = tile.side;
    for (const auto& b : doc["boxes"]) {
        for (const char* k : {"x", "y", "w", "h", "score"}) {
            if (!b.contains(k) || !b[k].is_number()) {
                fail("box");
                throw BackendError(BackendError::Kind::Protocol,
                                   "adapter box missing numeric '" + std::string(k) + "'");
            }
        }
        const double score = b["score"].get<double>();
        if (score < 0.0 || score > 1.0) {
            fail("score");
            throw BackendError(BackendError::Kind::Protocol,
                               "adapter box score " + std::to_string(score) + " outside [0, 1]");
        }
        const BBox raw{b["x"].get<double>(), b["y"].get<double>(), b["w"].get<double>(),
                       b["h"].get<double>()};
        const BBox clipped = clip_box(raw, 0.0, 0.0, side, side);
        if (clipped.area() <= 0.0) continue; // entirely outside the tile
        out.push_back({clipped, score});
    }
    return out;
}

ExternalBackend::ExternalBackend(const std::string& command, Options opts)
    : adapter_(std::make_unique<ExternalAdapter>(command)), opts_(opts) {}

std::vector<Detection> ExternalBackend::detect(const TileTask& task) {
    return adapter_->detect(task.image_id, task.tile, task.tile_path, opts_.timeout_ms);
}

} // namespace tilecount
