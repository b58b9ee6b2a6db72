#pragma once

#include <stdexcept>
#include <string>

namespace attnpipe {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input file, malformed config or unknown preset.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Peer could not be reached or the connection dropped.
class ConnectionError : public Error {
public:
    using Error::Error;
};

/// Peer did not answer within the request timeout.
class TimeoutError : public Error {
public:
    using Error::Error;
};

/// Peer answered with something that violates the wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Peer answered with an ERROR message.
class RemoteError : public Error {
public:
    RemoteError(std::string code, const std::string& message)
        : Error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// A pipeline stage failed; the message carries stage name and frame id.
class StageError : public Error {
public:
    StageError(std::string stage, long frame_id, const std::string& cause)
        : Error(stage + " failed on frame " + std::to_string(frame_id) + ": " + cause),
          stage_(std::move(stage)),
          frame_id_(frame_id) {}

    const std::string& stage() const noexcept { return stage_; }
    long frame_id() const noexcept { return frame_id_; }

private:
    std::string stage_;
    long frame_id_;
};

}  // namespace attnpipe
