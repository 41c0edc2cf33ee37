#pragma once

// Wire protocol of the control service: one JSON document per message,
// newline-delimited on plain TCP. Envelope: {"type", "seq", ...}.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spamlab/scenario.hpp"

namespace spamlab::console {

enum class Verb : std::uint8_t { SET_ATTACK, START_ATTACK, STOP_ATTACK, SET_JAMMING, RESTART_RECEIVER, PAUSE, RESUME };
std::string_view to_string(Verb v);
std::optional<Verb> parse_verb(std::string_view s);

struct Command {
  std::string id;
  Verb verb = Verb::PAUSE;
  nlohmann::json payload = nlohmann::json::object();
};

/// Thrown for a message that cannot become a command; `id` is set when the
/// message carried one.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string id = {}) : std::runtime_error(what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

Command parse_command(std::string_view text);

/// Patch a command turns into; nullopt for PAUSE and RESUME.
std::optional<scenario::TimedPatch> to_patch(const Command& c);

nlohmann::json channel_json(const scenario::ChannelPoint& c);
nlohmann::json pvt_json(const scenario::PvtPoint& p);

/// Frame body (type and seq are added at send time).
nlohmann::json frame_body(const scenario::TimelinePoint& point, const std::vector<detect::Alert>& alerts,
                          const nlohmann::json& profiles, std::string_view run_state);

/// Full state for a joining client.
nlohmann::json snapshot_body(const scenario::Scenario& s, std::string_view run_state);

nlohmann::json ack_body(const Command& c, double applied_t_s);
nlohmann::json error_body(const std::string& id, const std::string& reason);

/// Serializes with the envelope fields set.
std::string encode(nlohmann::json body, std::string_view type, std::uint64_t seq);

}  // namespace spamlab::console
