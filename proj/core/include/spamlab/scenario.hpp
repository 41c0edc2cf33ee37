#pragma once

// Block-by-block scenario execution: legitimate lanes, attacker lanes,
// thermal noise, receiver, PVT, telemetry and streaming detectors. Live
// changes arrive as timed patches; the applied patch log replays a session.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spamlab/classify.hpp"
#include "spamlab/detect.hpp"
#include "spamlab/scenario_spec.hpp"

namespace spamlab::scenario {

/// One patch-log line: `<t_s> <target>=<value> ...`. Targets are
/// `attackN.<field>` (bare fields address attack 0), `jammingN.<field>` and
/// `receiver.restart`.
struct TimedPatch {
  double t_s = 0.0;
  std::vector<std::pair<std::string, std::string>> assignments;
};

using PatchLog = std::vector<TimedPatch>;

/// Throws ParseError naming the line.
PatchLog parse_patch_log(std::istream& in);
PatchLog load_patch_log(const std::filesystem::path& path);
std::string format_patch(const TimedPatch& p);
void write_patch_log(std::ostream& out, const PatchLog& log);

struct RunResult {
  std::string name;
  std::uint64_t seed = 0;
  Timeline timeline;
  OutcomeRecord outcome;
  ClassifyConfig classification;
  std::optional<AttackWindow> window;
  std::vector<detect::Alert> alerts;
  PatchLog applied_patches;
  std::vector<std::string> warnings;
};

/// Summary of the attacker configuration, as reported in telemetry.
nlohmann::json profile_summary(const std::vector<attack::AttackProfile>& attacks,
                               const std::vector<attack::JammingProfile>& jamming);

class Scenario {
 public:
  /// Validates the spec (ConfigError lists every problem) before any
  /// synthesis. Scheduled patches apply at the first block starting at or
  /// after their time.
  explicit Scenario(ScenarioSpec spec, PatchLog scheduled = {});
  ~Scenario();
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  double time_s() const;
  bool done() const;

  /// Advances one 1 ms block in every band.
  void step();
  void run_until(double t_s);

  /// Applies a patch at the start of the next block and records it with
  /// that time. Throws ConfigError (nothing applied) when invalid.
  double apply_now(const TimedPatch& patch);

  /// Called after each telemetry point with the alerts raised since the
  /// previous one.
  using FrameCallback = std::function<void(const TimelinePoint&, const std::vector<detect::Alert>&)>;
  void on_frame(FrameCallback cb);

  const ScenarioSpec& spec() const;
  const Timeline& timeline() const;
  const std::vector<attack::AttackProfile>& attacks() const;
  const std::vector<attack::JammingProfile>& jamming() const;
  const std::vector<detect::Alert>& alerts() const;
  const PatchLog& applied_patches() const;
  std::vector<rx::ChannelSnapshot> channel_snapshot() const;

  /// Classifies and packages the run so far.
  RunResult result() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs a scenario to completion.
RunResult run(const ScenarioSpec& spec, const PatchLog& patches = {});

ClassifyConfig classify_config(const ScenarioSpec& spec);

}  // namespace spamlab::scenario
