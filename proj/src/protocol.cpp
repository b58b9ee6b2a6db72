#include "attnpipe/protocol.hpp"

#include <cstring>

#include "attnpipe/error.hpp"

namespace attnpipe::wire {

using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

json parse_header(std::span<const std::uint8_t> bytes) {
    json header = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw ProtocolError("message header is not a JSON object");
    }
    if (!header.contains("type") || !header["type"].is_string()) {
        throw ProtocolError("message header has no type");
    }
    if (!header.contains("payload_size") || !header["payload_size"].is_number_unsigned()) {
        throw ProtocolError("message header has no payload_size");
    }
    if (header["payload_size"].get<std::uint64_t>() > kMaxPayloadBytes) {
        throw ProtocolError("payload too large");
    }
    return header;
}

template <typename T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) {
        throw ProtocolError(std::string("missing field '") + name + "'");
    }
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ProtocolError(std::string("bad field '") + name + "'");
    }
}

void expect_type(const Message& m, const char* type) {
    if (m.type() != type) {
        throw ProtocolError("expected " + std::string(type) + ", got " + m.type());
    }
}

}  // namespace

std::string Message::type() const {
    if (header.is_object() && header.contains("type") && header["type"].is_string()) {
        return header["type"].get<std::string>();
    }
    return {};
}

std::vector<std::uint8_t> encode(Message message) {
    message.header["payload_size"] = static_cast<std::uint64_t>(message.payload.size());
    const std::string header = message.header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(4 + header.size() + message.payload.size());
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), message.payload.begin(), message.payload.end());
    return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw ProtocolError("truncated length prefix");
    }
    const std::uint32_t n = get_u32(bytes.data());
    if (bytes.size() < 4 + std::size_t{n}) {
        throw ProtocolError("truncated header");
    }
    Message m;
    m.header = parse_header(bytes.subspan(4, n));
    const auto size = m.header["payload_size"].get<std::uint64_t>();
    if (bytes.size() != 4 + n + size) {
        throw ProtocolError("payload size does not match header");
    }
    m.payload.assign(bytes.begin() + 4 + n, bytes.end());
    return m;
}

void write_message(Socket& socket, Message message) { socket.write_all(encode(std::move(message))); }

Message read_message(Socket& socket) {
    std::uint8_t prefix[4];
    socket.read_exact(prefix);
    const std::uint32_t n = get_u32(prefix);
    if (n > kMaxHeaderBytes) {
        throw ProtocolError("header too large");
    }
    std::vector<std::uint8_t> header(n);
    socket.read_exact(header);
    Message m;
    m.header = parse_header(header);
    m.payload.resize(m.header["payload_size"].get<std::uint64_t>());
    socket.read_exact(m.payload);
    return m;
}

Message make_eval_request(long frame_id, std::span<const Tile> tiles) {
    Message m;
    m.header["type"] = kEvalRequest;
    m.header["frame_id"] = frame_id;
    json crops = json::array();
    std::size_t total = 0;
    for (const auto& t : tiles) {
        total += t.pixels.rgb.size();
    }
    m.payload.reserve(total);
    for (const auto& t : tiles) {
        const auto& c = t.crop;
        crops.push_back({{"crop_id", c.crop_id},
                         {"width", t.pixels.width},
                         {"height", t.pixels.height},
                         {"row", c.row},
                         {"col", c.col},
                         {"x", c.global_rect.x()},
                         {"y", c.global_rect.y()},
                         {"side", c.global_rect.w()},
                         {"frame_w", c.frame_w},
                         {"frame_h", c.frame_h}});
        m.payload.insert(m.payload.end(), t.pixels.rgb.begin(), t.pixels.rgb.end());
    }
    m.header["crops"] = std::move(crops);
    return m;
}

std::vector<Tile> parse_eval_request(const Message& message) {
    expect_type(message, kEvalRequest);
    const auto frame_id = field<long>(message.header, "frame_id");
    const auto& crops = message.header.at("crops");
    if (!crops.is_array()) {
        throw ProtocolError("crops must be an array");
    }
    std::vector<Tile> tiles;
    std::size_t offset = 0;
    for (const auto& c : crops) {
        Tile t;
        t.frame_id = frame_id;
        const int width = field<int>(c, "width");
        const int height = field<int>(c, "height");
        t.crop.crop_id = field<int>(c, "crop_id");
        if (width < 1 || height < 1) {
            throw ProtocolError("crop " + std::to_string(t.crop.crop_id) + ": bad tile dimensions");
        }
        const std::size_t bytes = static_cast<std::size_t>(width) * height * 3;
        if (offset + bytes > message.payload.size()) {
            throw ProtocolError("crop " + std::to_string(t.crop.crop_id) + ": payload shorter than declared tiles");
        }
        t.crop.row = c.value("row", 0);
        t.crop.col = c.value("col", 0);
        const int side = c.value("side", width);
        try {
            t.crop.global_rect = Rect(c.value("x", 0), c.value("y", 0), side, side);
        } catch (const std::invalid_argument&) {
            throw ProtocolError("crop " + std::to_string(t.crop.crop_id) + ": bad geometry");
        }
        t.crop.scale = static_cast<double>(side) / kModelSide;
        t.crop.frame_w = c.value("frame_w", side);
        t.crop.frame_h = c.value("frame_h", side);
        t.pixels.width = width;
        t.pixels.height = height;
        t.pixels.rgb.assign(message.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                            message.payload.begin() + static_cast<std::ptrdiff_t>(offset + bytes));
        offset += bytes;
        tiles.push_back(std::move(t));
    }
    if (offset != message.payload.size()) {
        throw ProtocolError("payload longer than declared tiles");
    }
    return tiles;
}

json to_json(const CropDetection& d) {
    return json{{"x", d.rect.x},     {"y", d.rect.y},          {"w", d.rect.w},
                {"h", d.rect.h},     {"class", d.label},       {"confidence", d.confidence}};
}

CropDetection crop_detection_from_json(const json& j) {
    CropDetection d;
    d.rect = BoxF{field<double>(j, "x"), field<double>(j, "y"), field<double>(j, "w"), field<double>(j, "h")};
    d.label = field<std::string>(j, "class");
    d.confidence = field<double>(j, "confidence");
    return d;
}

Message make_eval_response(long frame_id, std::span<const CropResult> results) {
    Message m;
    m.header["type"] = kEvalResponse;
    m.header["frame_id"] = frame_id;
    json arr = json::array();
    for (const auto& r : results) {
        json dets = json::array();
        for (const auto& d : r.detections) {
            dets.push_back(to_json(d));
        }
        arr.push_back({{"crop_id", r.crop_id}, {"detections", std::move(dets)}});
    }
    m.header["results"] = std::move(arr);
    return m;
}

std::vector<CropResult> parse_eval_response(const Message& message, long& frame_id) {
    expect_type(message, kEvalResponse);
    frame_id = field<long>(message.header, "frame_id");
    const auto& results = message.header.at("results");
    if (!results.is_array()) {
        throw ProtocolError("results must be an array");
    }
    std::vector<CropResult> out;
    for (const auto& r : results) {
        CropResult cr;
        cr.crop_id = field<int>(r, "crop_id");
        for (const auto& d : r.at("detections")) {
            cr.detections.push_back(crop_detection_from_json(d));
        }
        out.push_back(std::move(cr));
    }
    return out;
}

Message make_health() {
    Message m;
    m.header["type"] = kHealth;
    return m;
}

Message make_health_ok(const DetectorProfile& profile) {
    Message m;
    m.header["type"] = kHealthOk;
    m.header["input_side"] = profile.input_side;
    m.header["classes"] = profile.supported_classes;
    return m;
}

DetectorProfile parse_health_ok(const Message& message) {
    expect_type(message, kHealthOk);
    DetectorProfile p;
    p.input_side = field<int>(message.header, "input_side");
    p.supported_classes = field<std::vector<std::string>>(message.header, "classes");
    return p;
}

Message make_error(const std::string& code, const std::string& text) {
    Message m;
    m.header["type"] = kError;
    m.header["code"] = code;
    m.header["message"] = text;
    return m;
}

}  // namespace attnpipe::wire
