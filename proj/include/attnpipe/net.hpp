#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace attnpipe {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// Parses "host:port". Throws ConfigError.
    static Endpoint parse(std::string_view text);
    std::string str() const { return host + ":" + std::to_string(port); }

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// Connected stream socket. Blocking I/O bounded by a per-call timeout.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    /// Throws ConnectionError or TimeoutError.
    static Socket connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }
    int release() noexcept;
    void close() noexcept;

    void set_timeout(std::chrono::milliseconds timeout);
    void write_all(std::span<const std::uint8_t> data);
    /// Fills data completely or throws; ConnectionError on orderly close.
    void read_exact(std::span<std::uint8_t> data);
    /// Waits until readable; false on timeout.
    bool wait_readable(std::chrono::milliseconds timeout) const;

private:
    int fd_ = -1;
};

/// Listening socket.
class Listener {
public:
    /// Binds host:port (port 0 picks a free one). Throws ConnectionError.
    explicit Listener(const Endpoint& endpoint);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    Endpoint local_endpoint() const { return bound_; }
    /// Accepted connection, or an invalid socket after `timeout`.
    Socket accept(std::chrono::milliseconds timeout);
    void close() noexcept;

private:
    int fd_ = -1;
    Endpoint bound_;
};

}  // namespace attnpipe
