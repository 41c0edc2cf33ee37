#include "spamlab/console/protocol.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace spamlab::console {
namespace {

using nlohmann::json;

std::string value_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    const double d = v.get<double>();
    for (int digits = 15; digits <= 17; ++digits) {
      std::ostringstream os;
      os << std::setprecision(digits) << d;
      if (digits == 17 || std::stod(os.str()) == d) return os.str();
    }
  }
  throw ProtocolError("field values must be strings, numbers or booleans");
}

std::size_t index_of(const json& payload) {
  if (!payload.contains("index")) return 0;
  const auto& i = payload["index"];
  if (!i.is_number_integer() || i.get<long long>() < 0) throw ProtocolError("index must be a non-negative integer");
  return static_cast<std::size_t>(i.get<long long>());
}

std::string nonspace(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_of(" \t\r\n=") != std::string::npos)
    throw ProtocolError(what + " must be a non-empty token without spaces or '='");
  return s;
}

}  // namespace

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::SET_ATTACK: return "SET_ATTACK";
    case Verb::START_ATTACK: return "START_ATTACK";
    case Verb::STOP_ATTACK: return "STOP_ATTACK";
    case Verb::SET_JAMMING: return "SET_JAMMING";
    case Verb::RESTART_RECEIVER: return "RESTART_RECEIVER";
    case Verb::PAUSE: return "PAUSE";
    case Verb::RESUME: return "RESUME";
  }
  return "?";
}

std::optional<Verb> parse_verb(std::string_view s) {
  for (auto v : {Verb::SET_ATTACK, Verb::START_ATTACK, Verb::STOP_ATTACK, Verb::SET_JAMMING, Verb::RESTART_RECEIVER,
                 Verb::PAUSE, Verb::RESUME})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

Command parse_command(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    throw ProtocolError("malformed JSON");
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  std::string id;
  if (auto it = j.find("id"); it != j.end() && it->is_string()) id = it->get<std::string>();
  if (j.value("type", std::string()) != "command") throw ProtocolError("expected type \"command\"", id);
  if (id.empty()) throw ProtocolError("command needs a non-empty string id");
  Command c;
  c.id = id;
  const auto verb = j.value("verb", std::string());
  auto v = parse_verb(verb);
  if (!v) throw ProtocolError("unknown verb '" + verb + "'", id);
  c.verb = *v;
  if (auto p = j.find("payload"); p != j.end() && !p->is_null()) {
    if (!p->is_object()) throw ProtocolError("payload must be an object", id);
    c.payload = *p;
  }
  try {
    (void)to_patch(c);
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what(), id);
  }
  return c;
}

std::optional<scenario::TimedPatch> to_patch(const Command& c) {
  scenario::TimedPatch p;
  switch (c.verb) {
    case Verb::PAUSE:
    case Verb::RESUME: return std::nullopt;
    case Verb::START_ATTACK:
    case Verb::STOP_ATTACK:
      p.assignments.emplace_back("attack" + std::to_string(index_of(c.payload)) + ".active",
                                 c.verb == Verb::START_ATTACK ? "true" : "false");
      return p;
    case Verb::SET_ATTACK:
    case Verb::SET_JAMMING: {
      const std::string prefix = (c.verb == Verb::SET_ATTACK ? "attack" : "jamming") + std::to_string(index_of(c.payload));
      const auto it = c.payload.find("fields");
      if (it == c.payload.end() || !it->is_object() || it->empty()) throw ProtocolError("payload.fields must be a non-empty object");
      for (const auto& [k, v] : it->items())
        p.assignments.emplace_back(prefix + "." + nonspace(k, "field name"), nonspace(value_text(v), "field value"));
      return p;
    }
    case Verb::RESTART_RECEIVER: {
      const auto mode = c.payload.value("mode", std::string());
      if (!rx::parse_start_mode(mode)) throw ProtocolError("mode must be COLD, WARM or HOT");
      p.assignments.emplace_back("receiver.restart", mode);
      return p;
    }
  }
  return std::nullopt;
}

json channel_json(const scenario::ChannelPoint& c) {
  return {{"svid", c.svid},
          {"band", std::string(to_string(c.band))},
          {"state", std::string(rx::to_string(c.state))},
          {"doppler_hz", c.doppler_hz},
          {"code_phase_chips", c.code_phase_chips},
          {"cn0_dbhz", std::isfinite(c.cn0_dbhz) ? json(c.cn0_dbhz) : json(nullptr)},
          {"nav_decoded", c.nav_decoded}};
}

json pvt_json(const scenario::PvtPoint& p) {
  if (!p.valid) return nullptr;
  return {{"time_s", p.time_s},
          {"position_ecef_m", {p.position_ecef_m.x(), p.position_ecef_m.y(), p.position_ecef_m.z()}},
          {"position_error_m", p.position_error_m},
          {"authenticated_fraction", p.authenticated_fraction},
          {"used_svids", p.used_svids}};
}

json frame_body(const scenario::TimelinePoint& point, const std::vector<detect::Alert>& alerts, const json& profiles,
                std::string_view run_state) {
  json chans = json::array();
  for (const auto& c : point.channels) chans.push_back(channel_json(c));
  json al = json::array();
  for (const auto& a : alerts) al.push_back(detect::to_json(a));
  return {{"t_s", point.t_s},     {"state", std::string(run_state)}, {"channels", chans},
          {"pvt", pvt_json(point.pvt)}, {"alerts", al},                {"profiles", profiles}};
}

json snapshot_body(const scenario::Scenario& s, std::string_view run_state) {
  json body;
  const auto& tl = s.timeline();
  if (!tl.points.empty()) {
    body = frame_body(tl.points.back(), {}, scenario::profile_summary(s.attacks(), s.jamming()), run_state);
  } else {
    json chans = json::array();
    for (const auto& c : s.channel_snapshot()) {
      scenario::ChannelPoint p;
      p.svid = c.svid;
      p.band = c.band;
      p.state = c.state;
      p.doppler_hz = c.doppler_hz;
      p.code_phase_chips = c.code_phase_chips;
      p.cn0_dbhz = c.cn0_dbhz;
      p.nav_decoded = c.nav_decoded;
      chans.push_back(channel_json(p));
    }
    body = {{"t_s", s.time_s()},      {"state", std::string(run_state)}, {"channels", chans},
            {"pvt", nullptr},         {"alerts", json::array()},
            {"profiles", scenario::profile_summary(s.attacks(), s.jamming())}};
  }
  json recent = json::array();
  for (const auto& a : s.alerts()) recent.push_back(detect::to_json(a));
  body["alert_history"] = recent;
  body["scenario"] = {{"name", s.spec().name},
                      {"seed", s.spec().seed},
                      {"duration_s", s.spec().duration_s},
                      {"cadence_hz", s.spec().telemetry_cadence_hz},
                      {"time_s", s.time_s()}};
  return body;
}

json ack_body(const Command& c, double t) {
  return {{"id", c.id}, {"verb", std::string(to_string(c.verb))}, {"ok", true}, {"applied_t_s", t}};
}

json error_body(const std::string& id, const std::string& reason) {
  return {{"id", id.empty() ? json(nullptr) : json(id)}, {"ok", false}, {"reason", reason}};
}

std::string encode(json body, std::string_view type, std::uint64_t seq) {
  body["type"] = std::string(type);
  body["seq"] = seq;
  return body.dump();
}

}  // namespace spamlab::console
