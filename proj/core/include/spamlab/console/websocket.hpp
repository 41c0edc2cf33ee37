#pragma once

// Minimal RFC 6455 framing for browser clients: the HTTP upgrade handshake
// and text/close/ping frames. Each text frame carries one protocol message.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spamlab::console::ws {

/// Sec-WebSocket-Accept for a client key.
std::string accept_key(std::string_view client_key);

/// Parses an HTTP upgrade request; returns the client key, or nullopt when
/// the request is not a WebSocket upgrade.
std::optional<std::string> upgrade_key(std::string_view request);

std::string handshake_response(std::string_view client_key);

enum class Opcode : std::uint8_t { CONTINUATION = 0x0, TEXT = 0x1, BINARY = 0x2, CLOSE = 0x8, PING = 0x9, PONG = 0xA };

/// Server-to-client frame (unmasked).
std::string encode_frame(std::string_view payload, Opcode op = Opcode::TEXT);

/// Client-to-server frame with the given mask (used by tests and tools).
std::string encode_masked_frame(std::string_view payload, std::uint32_t mask, Opcode op = Opcode::TEXT);

struct Message {
  Opcode opcode = Opcode::TEXT;
  std::string payload;
};

/// Incremental decoder; fragmented messages are reassembled.
class Decoder {
 public:
  /// Appends bytes and returns every complete message. Throws
  /// std::runtime_error on a protocol violation.
  std::vector<Message> feed(std::string_view bytes);

 private:
  std::string buffer_;
  std::string fragments_;
  Opcode fragment_op_ = Opcode::TEXT;
};

}  // namespace spamlab::console::ws
