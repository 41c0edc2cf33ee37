#include "spamlab/console/websocket.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include <openssl/evp.h>

namespace spamlab::console::ws {
namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string header_frame(std::size_t n, Opcode op, bool masked) {
  std::string h;
  h += static_cast<char>(0x80 | static_cast<unsigned>(op));
  const unsigned char mask_bit = masked ? 0x80 : 0x00;
  if (n < 126) {
    h += static_cast<char>(mask_bit | n);
  } else if (n <= 0xffff) {
    h += static_cast<char>(mask_bit | 126);
    h += static_cast<char>((n >> 8) & 0xff);
    h += static_cast<char>(n & 0xff);
  } else {
    h += static_cast<char>(mask_bit | 127);
    for (int i = 7; i >= 0; --i) h += static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xff);
  }
  return h;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string in = std::string(client_key) + std::string(kGuid);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(in.data(), in.size(), digest, &len, EVP_sha1(), nullptr) != 1) throw std::runtime_error("SHA-1 failed");
  unsigned char out[64];
  const int n = EVP_EncodeBlock(out, digest, static_cast<int>(len));
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

std::optional<std::string> upgrade_key(std::string_view request) {
  if (request.substr(0, 4) != "GET ") return std::nullopt;
  bool upgrade = false;
  std::optional<std::string> key;
  std::size_t pos = request.find('\n');
  while (pos != std::string_view::npos && pos + 1 < request.size()) {
    const auto next = request.find('\n', pos + 1);
    const auto line = request.substr(pos + 1, next == std::string_view::npos ? std::string_view::npos : next - pos - 1);
    pos = next;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto name = lower(trim(line.substr(0, colon)));
    const auto value = trim(line.substr(colon + 1));
    if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
    if (name == "sec-websocket-key") key = value;
  }
  if (!upgrade || !key || key->empty()) return std::nullopt;
  return key;
}

std::string handshake_response(std::string_view client_key) {
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: " +
         accept_key(client_key) + "\r\n\r\n";
}

std::string encode_frame(std::string_view payload, Opcode op) {
  return header_frame(payload.size(), op, false) + std::string(payload);
}

std::string encode_masked_frame(std::string_view payload, std::uint32_t mask, Opcode op) {
  std::string out = header_frame(payload.size(), op, true);
  const unsigned char m[4] = {static_cast<unsigned char>(mask >> 24), static_cast<unsigned char>(mask >> 16),
                              static_cast<unsigned char>(mask >> 8), static_cast<unsigned char>(mask)};
  out.append(reinterpret_cast<const char*>(m), 4);
  for (std::size_t i = 0; i < payload.size(); ++i) out += static_cast<char>(payload[i] ^ m[i % 4]);
  return out;
}

std::vector<Message> Decoder::feed(std::string_view bytes) {
  buffer_.append(bytes);
  std::vector<Message> out;
  for (;;) {
    if (buffer_.size() < 2) break;
    const auto b0 = static_cast<unsigned char>(buffer_[0]);
    const auto b1 = static_cast<unsigned char>(buffer_[1]);
    const bool fin = b0 & 0x80;
    const auto op = static_cast<Opcode>(b0 & 0x0f);
    const bool masked = b1 & 0x80;
    std::uint64_t n = b1 & 0x7f;
    std::size_t off = 2;
    if (n == 126) {
      if (buffer_.size() < 4) break;
      n = (static_cast<std::uint64_t>(static_cast<unsigned char>(buffer_[2])) << 8) |
          static_cast<unsigned char>(buffer_[3]);
      off = 4;
    } else if (n == 127) {
      if (buffer_.size() < 10) break;
      n = 0;
      for (int i = 0; i < 8; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[2 + static_cast<std::size_t>(i)]);
      off = 10;
    }
    if (n > (1u << 24)) throw std::runtime_error("websocket frame too large");
    if (!masked) throw std::runtime_error("client frames must be masked");
    if (buffer_.size() < off + 4 + n) break;
    const auto* mask = reinterpret_cast<const unsigned char*>(buffer_.data() + off);
    std::string payload(n, '\0');
    for (std::size_t i = 0; i < n; ++i) payload[i] = static_cast<char>(buffer_[off + 4 + i] ^ mask[i % 4]);
    buffer_.erase(0, off + 4 + n);

    const bool control = static_cast<unsigned>(op) & 0x8;
    if (control) {
      out.push_back({op, std::move(payload)});
      continue;
    }
    if (op != Opcode::CONTINUATION) {
      fragment_op_ = op;
      fragments_.clear();
    }
    fragments_ += payload;
    if (fin) {
      out.push_back({fragment_op_, std::move(fragments_)});
      fragments_.clear();
    }
  }
  return out;
}

}  // namespace spamlab::console::ws
