#include <doctest.h>

#include <string>

#include "tilecount/adapter.hpp"
#include "tilecount/errors.hpp"
#include "helpers.hpp"

using namespace tilecount;

namespace {

std::string stub_path() {
    return testutil::env_or("TILECOUNT_STUB_ADAPTER", "./tilecount-stub-adapter");
}

const Tile kTile{1, 2, 640, 1280, 640};

} // namespace

TEST_CASE("echo adapter returns empty detections") {
    ExternalAdapter adapter(stub_path() + " empty");
    const auto dets = adapter.detect("img0", kTile, "", 5000);
    CHECK(dets.empty());
    // The stream stays usable across requests.
    CHECK(adapter.detect("img1", kTile, "", 5000).empty());
}

TEST_CASE("scripted adapter round-trips one box") {
    ExternalAdapter adapter(stub_path() + " onebox");
    const auto dets = adapter.detect("img0", kTile, "/tmp/tile.png", 5000);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].bbox == BBox{10, 10, 20, 20});
    CHECK(dets[0].score == doctest::Approx(0.9));
}

TEST_CASE("adapter that never replies raises a timeout") {
    ExternalAdapter adapter(stub_path() + " hang");
    try {
        adapter.detect("img0", kTile, "", 300);
        FAIL("expected a timeout");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::Timeout);
    }
    // After a failure the stream is poisoned.
    CHECK_THROWS_AS(adapter.detect("img0", kTile, "", 300), BackendError);
}

TEST_CASE("adapter protocol violations are distinct error kinds") {
    SUBCASE("garbage line") {
        ExternalAdapter adapter(stub_path() + " garbage");
        try {
            adapter.detect("img0", kTile, "", 5000);
            FAIL("expected a protocol error");
        } catch (const BackendError& e) {
            CHECK(e.kind() == BackendError::Kind::Protocol);
        }
    }
    SUBCASE("mismatched request id") {
        ExternalAdapter adapter(stub_path() + " badid");
        try {
            adapter.detect("img0", kTile, "", 5000);
            FAIL("expected a protocol error");
        } catch (const BackendError& e) {
            CHECK(e.kind() == BackendError::Kind::Protocol);
        }
    }
    SUBCASE("process exits immediately") {
        ExternalAdapter adapter(stub_path() + " exit");
        try {
            adapter.detect("img0", kTile, "", 5000);
            FAIL("expected a process-exit error");
        } catch (const BackendError& e) {
            CHECK(e.kind() == BackendError::Kind::ProcessExit);
        }
    }
}

TEST_CASE("adapter boxes are clipped to the tile square") {
    // The scripted box (10, 10, 20, 20) fits; synthesize an out-of-bounds
    // reply through a tiny shell adapter instead.
    ExternalAdapter adapter(
        "while read line; do id=$(echo \"$line\" | sed 's/.*\"request_id\": *\\([0-9]*\\).*/\\1/');"
        " echo '{\"request_id\": '$id', \"boxes\": [{\"x\": 600, \"y\": -5, \"w\": 100, \"h\": 30,"
        " \"score\": 0.5}, {\"x\": 1000, \"y\": 1000, \"w\": 5, \"h\": 5, \"score\": 0.4}]}'; done");
    const auto dets = adapter.detect("img0", kTile, "", 5000);
    REQUIRE(dets.size() == 1); // the fully-outside box vanishes
    CHECK(dets[0].bbox.x == doctest::Approx(600.0));
    CHECK(dets[0].bbox.y == doctest::Approx(0.0));
    CHECK(dets[0].bbox.right() <= 640.0 + 1e-9);
}

TEST_CASE("external backend exposes the serial contract") {
    ExternalBackend backend(stub_path() + " empty", {.timeout_ms = 5000, .send_pixels = false});
    CHECK_FALSE(backend.concurrent_safe());
    CHECK_FALSE(backend.needs_pixels());
    TileTask task;
    task.image_id = "img";
    task.tile = kTile;
    CHECK(backend.detect(task).empty());
}
