#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "attnpipe/detector.hpp"
#include "attnpipe/net.hpp"
#include "attnpipe/pipeline.hpp"
#include "attnpipe/protocol.hpp"

namespace attnpipe {

inline constexpr std::chrono::milliseconds kDefaultRequestTimeout{30000};

/// Detector server speaking the wire protocol. Each connection is served on
/// its own thread; requests are independent of each other.
class WorkerServer {
public:
    /// Binds immediately; throws ConnectionError when the address is taken.
    WorkerServer(const Endpoint& listen, const Detector& detector);
    ~WorkerServer();
    WorkerServer(const WorkerServer&) = delete;
    WorkerServer& operator=(const WorkerServer&) = delete;

    Endpoint endpoint() const { return listener_.local_endpoint(); }

    /// Accept loop; returns after stop().
    void run();
    /// Runs the accept loop on a background thread.
    void start();
    void stop();
    /// Only flags the accept loop to return; safe from a signal handler.
    void request_stop() noexcept { stopping_ = true; }

    /// Reply to one decoded request. Exposed for tests.
    wire::Message handle(const wire::Message& request) const;

private:
    void serve_connection(Socket socket);

    const Detector& detector_;
    Listener listener_;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex mutex_;
    std::list<std::thread> connections_;
};

/// One persistent connection to a worker; at most one request in flight.
class WorkerClient {
public:
    explicit WorkerClient(Endpoint endpoint, std::chrono::milliseconds timeout = kDefaultRequestTimeout);

    const Endpoint& endpoint() const noexcept { return endpoint_; }

    DetectorProfile health();

    /// Sends the tiles and returns one result per tile in tile order.
    /// send_ms receives the time spent writing the request.
    std::vector<CropResult> evaluate(long frame_id, std::span<const Tile> tiles, double* send_ms = nullptr);

private:
    wire::Message round_trip(wire::Message request, double* send_ms);

    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    Socket socket_;
};

/// One-shot evaluation of tiles on a worker, results keyed by crop id in
/// request order.
std::vector<CropResult> remote_detect(std::span<const Tile> tiles, const Endpoint& endpoint, long frame_id = 0,
                                      std::chrono::milliseconds timeout = kDefaultRequestTimeout);

}  // namespace attnpipe
