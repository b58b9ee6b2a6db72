#pragma once

// Wire format. Every message is
//
//   u32 big-endian N | N bytes UTF-8 JSON header | payload
//
// where the header always carries "type" and "payload_size". Header objects
// are serialized with sorted keys, so equal messages are equal bytes.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnpipe/detector.hpp"
#include "attnpipe/net.hpp"
#include "attnpipe/pipeline.hpp"

namespace attnpipe::wire {

inline constexpr const char* kEvalRequest = "EVAL_REQUEST";
inline constexpr const char* kEvalResponse = "EVAL_RESPONSE";
inline constexpr const char* kHealth = "HEALTH";
inline constexpr const char* kHealthOk = "HEALTH_OK";
inline constexpr const char* kError = "ERROR";

inline constexpr std::uint32_t kMaxHeaderBytes = 64u << 20;
inline constexpr std::uint64_t kMaxPayloadBytes = 2ull << 30;

struct Message {
    nlohmann::json header;
    std::vector<std::uint8_t> payload;

    std::string type() const;
};

/// Length prefix, header bytes and payload. Sets header["payload_size"].
std::vector<std::uint8_t> encode(Message message);

/// Decodes exactly one message from a buffer. Throws ProtocolError.
Message decode(std::span<const std::uint8_t> bytes);

void write_message(Socket& socket, Message message);
/// Throws ProtocolError on a malformed header, ConnectionError/TimeoutError
/// on transport failures.
Message read_message(Socket& socket);

Message make_eval_request(long frame_id, std::span<const Tile> tiles);
/// Rebuilds tiles, including the crop geometry carried in the header.
std::vector<Tile> parse_eval_request(const Message& message);

Message make_eval_response(long frame_id, std::span<const CropResult> results);
std::vector<CropResult> parse_eval_response(const Message& message, long& frame_id);

Message make_health();
Message make_health_ok(const DetectorProfile& profile);
DetectorProfile parse_health_ok(const Message& message);

Message make_error(const std::string& code, const std::string& text);

nlohmann::json to_json(const CropDetection& d);
CropDetection crop_detection_from_json(const nlohmann::json& j);

}  // namespace attnpipe::wire
