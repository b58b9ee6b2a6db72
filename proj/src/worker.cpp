#include "attnpipe/worker.hpp"

#include <iostream>
#include <map>
#include <set>

#include "attnpipe/error.hpp"
#include "attnpipe/timing.hpp"

namespace attnpipe {

namespace {

constexpr std::chrono::milliseconds kPollInterval{100};

}  // namespace

WorkerServer::WorkerServer(const Endpoint& listen, const Detector& detector)
    : detector_(detector), listener_(listen) {}

WorkerServer::~WorkerServer() { stop(); }

void WorkerServer::start() {
    accept_thread_ = std::thread([this] { run(); });
}

void WorkerServer::run() {
    while (!stopping_) {
        Socket s = listener_.accept(kPollInterval);
        if (!s.valid()) {
            continue;
        }
        s.set_timeout(kDefaultRequestTimeout);
        std::lock_guard lock(mutex_);
        connections_.emplace_back([this, sock = std::move(s)]() mutable { serve_connection(std::move(sock)); });
    }
}

void WorkerServer::stop() {
    stopping_ = true;
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    listener_.close();
    std::list<std::thread> threads;
    {
        std::lock_guard lock(mutex_);
        threads.swap(connections_);
    }
    for (auto& t : threads) {
        if (t.joinable()) {
            t.join();
        }
    }
}

wire::Message WorkerServer::handle(const wire::Message& request) const {
    const auto type = request.type();
    if (type == wire::kHealth) {
        return wire::make_health_ok(detector_.profile());
    }
    if (type != wire::kEvalRequest) {
        return wire::make_error("unsupported", "unsupported message type '" + type + "'");
    }

    std::vector<Tile> tiles;
    long frame_id = 0;
    try {
        tiles = wire::parse_eval_request(request);
        frame_id = request.header.at("frame_id").get<long>();
    } catch (const std::exception& e) {
        return wire::make_error("malformed", e.what());
    }

    std::vector<CropResult> results;
    results.reserve(tiles.size());
    for (const auto& tile : tiles) {
        try {
            results.push_back(CropResult{tile.crop.crop_id, detector_.detect(tile)});
        } catch (const std::exception& e) {
            std::cerr << "worker: frame " << frame_id << " crop " << tile.crop.crop_id << ": " << e.what() << '\n';
            return wire::make_error("decode_failed", "crop " + std::to_string(tile.crop.crop_id) + ": " + e.what());
        }
    }
    return wire::make_eval_response(frame_id, results);
}

void WorkerServer::serve_connection(Socket socket) {
    while (!stopping_) {
        if (!socket.wait_readable(kPollInterval)) {
            continue;
        }
        wire::Message reply;
        try {
            const auto request = wire::read_message(socket);
            reply = handle(request);
        } catch (const ProtocolError& e) {
            reply = wire::make_error("malformed", e.what());
        } catch (const std::exception&) {
            return;
        }
        try {
            wire::write_message(socket, std::move(reply));
        } catch (const std::exception&) {
            return;
        }
    }
}

WorkerClient::WorkerClient(Endpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

wire::Message WorkerClient::round_trip(wire::Message request, double* send_ms) {
    try {
        if (!socket_.valid()) {
            socket_ = Socket::connect(endpoint_, timeout_);
        }
        Stopwatch send;
        wire::write_message(socket_, std::move(request));
        if (send_ms != nullptr) {
            *send_ms = send.elapsed_ms();
        }
        auto reply = wire::read_message(socket_);
        if (reply.type() == wire::kError) {
            throw RemoteError(reply.header.value("code", std::string("unknown")),
                              reply.header.value("message", std::string()));
        }
        return reply;
    } catch (const ConnectionError& e) {
        socket_.close();
        throw ConnectionError(endpoint_.str() + ": " + e.what());
    } catch (const TimeoutError& e) {
        socket_.close();
        throw TimeoutError(endpoint_.str() + ": " + e.what());
    } catch (const ProtocolError& e) {
        socket_.close();
        throw ProtocolError(endpoint_.str() + ": " + e.what());
    }
}

DetectorProfile WorkerClient::health() {
    const auto reply = round_trip(wire::make_health(), nullptr);
    try {
        return wire::parse_health_ok(reply);
    } catch (const ProtocolError& e) {
        throw ProtocolError(endpoint_.str() + ": " + e.what());
    }
}

std::vector<CropResult> WorkerClient::evaluate(long frame_id, std::span<const Tile> tiles, double* send_ms) {
    const auto reply = round_trip(wire::make_eval_request(frame_id, tiles), send_ms);
    long got_frame = 0;
    std::vector<CropResult> results;
    try {
        results = wire::parse_eval_response(reply, got_frame);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(endpoint_.str() + ": " + e.what());
    }
    if (got_frame != frame_id) {
        throw ProtocolError(endpoint_.str() + ": response for frame " + std::to_string(got_frame) + ", expected " +
                            std::to_string(frame_id));
    }

    std::map<int, std::size_t> slot;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        slot.emplace(tiles[i].crop.crop_id, i);
    }
    std::vector<std::optional<CropResult>> ordered(tiles.size());
    for (auto& r : results) {
        const auto it = slot.find(r.crop_id);
        if (it == slot.end()) {
            throw ProtocolError(endpoint_.str() + ": response has unknown crop_id " + std::to_string(r.crop_id));
        }
        if (ordered[it->second]) {
            throw ProtocolError(endpoint_.str() + ": duplicate crop_id " + std::to_string(r.crop_id));
        }
        ordered[it->second] = std::move(r);
    }
    std::vector<CropResult> out;
    out.reserve(tiles.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (!ordered[i]) {
            throw ProtocolError(endpoint_.str() + ": response lacks crop_id " +
                                std::to_string(tiles[i].crop.crop_id));
        }
        out.push_back(std::move(*ordered[i]));
    }
    return out;
}

std::vector<CropResult> remote_detect(std::span<const Tile> tiles, const Endpoint& endpoint, long frame_id,
                                      std::chrono::milliseconds timeout) {
    WorkerClient client(endpoint, timeout);
    return client.evaluate(frame_id, tiles);
}

}  // namespace attnpipe
