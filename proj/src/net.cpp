#include "attnpipe/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <memory>

#include "attnpipe/error.hpp"

namespace attnpipe {

namespace {

std::string errno_text() { return std::strerror(errno); }

struct AddrInfoDeleter {
    void operator()(addrinfo* ai) const { freeaddrinfo(ai); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) {
        hints.ai_flags = AI_PASSIVE;
    }
    addrinfo* res = nullptr;
    const auto port = std::to_string(ep.port);
    const int rc = getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) {
        throw ConnectionError("cannot resolve " + ep.str() + ": " + gai_strerror(rc));
    }
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(res);
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
        throw ConfigError("endpoint must be host:port, got '" + std::string(text) + "'");
    }
    Endpoint ep;
    ep.host = std::string(text.substr(0, colon));
    unsigned value = 0;
    const auto digits = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || value > 65535) {
        throw ConfigError("bad port in endpoint '" + std::string(text) + "'");
    }
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.release();
    }
    return *this;
}

int Socket::release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

void Socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Socket Socket::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    const auto ai = resolve(endpoint, false);
    Socket sock(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!sock.valid()) {
        throw ConnectionError("socket: " + errno_text());
    }
    const int flags = fcntl(sock.fd_, F_GETFL, 0);
    fcntl(sock.fd_, F_SETFL, flags | O_NONBLOCK);
    if (::connect(sock.fd_, ai->ai_addr, ai->ai_addrlen) != 0) {
        if (errno != EINPROGRESS) {
            throw ConnectionError("connect to " + endpoint.str() + ": " + errno_text());
        }
        pollfd pfd{sock.fd_, POLLOUT, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
        if (rc == 0) {
            throw TimeoutError("connect to " + endpoint.str() + " timed out");
        }
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(sock.fd_, SOL_SOCKET, SO_ERROR, &err, &len);
        if (rc < 0 || err != 0) {
            throw ConnectionError("connect to " + endpoint.str() + ": " + std::strerror(err != 0 ? err : errno));
        }
    }
    fcntl(sock.fd_, F_SETFL, flags);
    const int one = 1;
    setsockopt(sock.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    sock.set_timeout(timeout);
    return sock;
}

void Socket::set_timeout(std::chrono::milliseconds timeout) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void Socket::write_all(std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                throw TimeoutError("send timed out");
            }
            throw ConnectionError("send: " + errno_text());
        }
        sent += static_cast<std::size_t>(n);
    }
}

void Socket::read_exact(std::span<std::uint8_t> data) {
    std::size_t got = 0;
    while (got < data.size()) {
        const auto n = ::recv(fd_, data.data() + got, data.size() - got, 0);
        if (n == 0) {
            throw ConnectionError("connection closed by peer");
        }
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                throw TimeoutError("receive timed out");
            }
            throw ConnectionError("recv: " + errno_text());
        }
        got += static_cast<std::size_t>(n);
    }
}

bool Socket::wait_readable(std::chrono::milliseconds timeout) const {
    pollfd pfd{fd_, POLLIN, 0};
    return ::poll(&pfd, 1, static_cast<int>(timeout.count())) > 0;
}

Listener::Listener(const Endpoint& endpoint) {
    const auto ai = resolve(endpoint, true);
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) {
        throw ConnectionError("socket: " + errno_text());
    }
    if (::bind(fd_, ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(fd_, 64) != 0) {
        const auto msg = "cannot bind " + endpoint.str() + ": " + errno_text();
        close();
        throw ConnectionError(msg);
    }
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_.host = endpoint.host.empty() ? "0.0.0.0" : endpoint.host;
    bound_.port = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

Socket Listener::accept(std::chrono::milliseconds timeout) {
    if (fd_ < 0) {
        return Socket{};
    }
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) {
        return Socket{};
    }
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
        return Socket{};
    }
    const int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

}  // namespace attnpipe
