#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tilecount/detect.hpp"

namespace tilecount {

/// Bridge to an external detection process speaking line-delimited JSON on
/// stdin/stdout. One request per line:
///   {"request_id": N, "image_id": "...", "tile": {"row", "col", "side",
///    "origin_x", "origin_y"}, "tile_path": "..."}
/// and one response per line:
///   {"request_id": N, "boxes": [{"x", "y", "w", "h", "score"}, ...]}
/// Strictly serial per process. Failures map to BackendError kinds:
/// Timeout (no reply within the deadline), ProcessExit (pipe closed),
/// Protocol (unparseable line, request_id mismatch, score out of range).
class ExternalAdapter {
public:
    /// Starts `command` through /bin/sh -c. Throws IoError on spawn failure.
    explicit ExternalAdapter(const std::string& command);
    ~ExternalAdapter();

    ExternalAdapter(const ExternalAdapter&) = delete;
    ExternalAdapter& operator=(const ExternalAdapter&) = delete;

    /// One request/response exchange. Returned boxes are clipped to the
    /// tile square. After any failure the stream is out of sync and the
    /// adapter refuses further requests.
    std::vector<Detection> detect(const std::string& image_id, const Tile& tile,
                                  const std::string& tile_path, int timeout_ms);

    bool alive() const;

private:
    std::string read_line(int timeout_ms);
    void fail(const std::string& why);

    int child_pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    long next_request_id_ = 0;
    bool poisoned_ = false;
    std::string buffer_;
};

/// DetectorBackend over one ExternalAdapter process (serial only).
class ExternalBackend final : public DetectorBackend {
public:
    struct Options {
        int timeout_ms = 10000;
        bool send_pixels = true; // dump tile images and pass their paths
    };

    ExternalBackend(const std::string& command, Options opts);

    std::vector<Detection> detect(const TileTask& task) override;
    bool concurrent_safe() const override { return false; }
    bool needs_pixels() const override { return opts_.send_pixels; }
    std::string name() const override { return "adapter"; }

private:
    std::unique_ptr<ExternalAdapter> adapter_;
    Options opts_;
};

} // namespace tilecount
