#include <gtest/gtest.h>

#include "spamlab/attack.hpp"
#include "spamlab/constellation.hpp"
#include "spamlab/error.hpp"

using namespace spamlab;
using namespace spamlab::attack;

namespace {

struct Truth {
  Vec3 rx_pos = default_receiver_position();
  std::vector<pvt::SatelliteTruth> sats = desk6_constellation(rx_pos);
  ReceiverTruth rx{rx_pos, Vec3::Zero(), 0.0};
  TruthAccess access(int svid) const {
    for (const auto& s : sats)
      if (s.svid == svid) return {&s, &rx, 1000.0};
    return {};
  }
};

}  // namespace

TEST(AttackTiming, IntermittentGate) {
  Timing t{true, 1.0, 0.5};
  EXPECT_TRUE(gate(t, 0.0));
  EXPECT_TRUE(gate(t, 0.49));
  EXPECT_FALSE(gate(t, 0.5));
  EXPECT_FALSE(gate(t, 0.99));
  EXPECT_TRUE(gate(t, 7.2));
  EXPECT_TRUE(gate(Timing{}, 123.4));
}

TEST(AttackProfile, ValidationRejectsBrokenInvariants) {
  AttackProfile ok;
  EXPECT_NO_THROW(validate(ok));
  auto bad = ok;
  bad.multitransmitter = true;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.target_svid = 37;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.doppler_hz = 12000;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.code_offset_ms = 4.0;  // one E1 period is 4 ms
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.timing = {true, 1.0, 1.5};
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.window_start_s = 5;
  bad.window_end_s = 5;
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(AttackLane, FalseFixedDopplerAndArbitraryOffset) {
  AttackProfile p;
  p.doppler_mode = DopplerMode::FALSE_FIXED;
  p.doppler_hz = 2500.0;
  p.code_offset_ms = 1.5;
  p.power_advantage_db = 6.0;
  const auto s = spamming_lane(p, nullptr, 0.0, -3.0);
  EXPECT_EQ(s.svid, 13);
  EXPECT_DOUBLE_EQ(s.doppler_hz, 2500.0);
  EXPECT_NEAR(s.code_offset_ms, 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(s.power_db, 3.0);
}

TEST(AttackLane, ArbitraryOffsetDriftsWithCodeDoppler) {
  AttackProfile p;
  p.doppler_hz = 3000.0;
  p.code_offset_ms = 1.0;
  SpammerState st;
  synth::SignalParams s;
  for (int k = 0; k < 1000; ++k) s = spamming_lane(p, st, nullptr, k * 1e-3, 1e-3, 0.0);
  // 999 blocks of drift applied before the last lane: -Rc * fd / fc * dt
  const double expected_chips = 1023.0 - 1.023e6 * 3000.0 / 1575.42e6 * 0.999;
  EXPECT_NEAR(s.code_offset_ms * 1023.0, expected_chips, 1e-6);
}

TEST(AttackLane, MatchedModesFollowGeometry) {
  Truth truth;
  const auto acc = truth.access(13);
  const auto g = lane_geometry(*acc.satellite, truth.rx, Band::E1, 12.0, 1000.0);

  AttackProfile p;
  p.doppler_mode = DopplerMode::MATCHED;
  p.code_offset_mode = CodeOffsetMode::MATCHED;
  auto s = spamming_lane(p, &acc, 12.0, 0.0);
  EXPECT_NEAR(s.doppler_hz, g.doppler_hz, 1e-9);
  EXPECT_NEAR(s.code_offset_ms * 1023.0, g.delay_chips, 1e-6);

  p.doppler_mode = DopplerMode::MATCHED_PLUS_BIAS;
  p.doppler_hz = 1200.0;
  p.code_offset_mode = CodeOffsetMode::MATCHED_PLUS_ERROR;
  p.code_error_chips = 2.0;
  s = spamming_lane(p, &acc, 12.0, 0.0);
  EXPECT_NEAR(s.doppler_hz, g.doppler_hz + 1200.0, 1e-9);
  double d = s.code_offset_ms * 1023.0 - g.delay_chips;
  if (d < -2000) d += 4092;
  EXPECT_NEAR(d, 2.0, 1e-6);
}

TEST(AttackLane, MatchedWithoutTruthIsRejected) {
  AttackProfile p;
  p.doppler_mode = DopplerMode::MATCHED;
  EXPECT_TRUE(requires_truth(p));
  EXPECT_THROW(spamming_lane(p, nullptr, 0.0, 0.0), ConfigError);
}

TEST(AttackLane, MutedOutsideWindowAndGate) {
  AttackProfile p;
  p.window_start_s = 5.0;
  p.window_end_s = 10.0;
  p.timing = {true, 1.0, 0.5};
  EXPECT_EQ(spamming_lane(p, nullptr, 4.9, 0.0).power_db, synth::kMuted);
  EXPECT_NE(spamming_lane(p, nullptr, 6.2, 0.0).power_db, synth::kMuted);
  EXPECT_EQ(spamming_lane(p, nullptr, 6.7, 0.0).power_db, synth::kMuted);
  EXPECT_EQ(spamming_lane(p, nullptr, 10.0, 0.0).power_db, synth::kMuted);
  p.active = false;
  EXPECT_EQ(spamming_lane(p, nullptr, 6.2, 0.0).power_db, synth::kMuted);
}

TEST(AttackLane, SymbolsComeFromAttackerSeed) {
  AttackProfile a, b;
  a.symbol_seed = 1;
  b.symbol_seed = 2;
  int differ = 0;
  for (int k = 0; k < 200; ++k) {
    const double t = k * 4e-3 + 1e-3;
    differ += spamming_lane(a, nullptr, t, 0.0).symbols[0] != spamming_lane(b, nullptr, t, 0.0).symbols[0];
  }
  EXPECT_GT(differ, 60);
  EXPECT_LT(differ, 140);
}

TEST(AttackPatch, StaticStyleAppliesImmediately) {
  AttackProfile p;
  std::vector<PatchRecord> log;
  const auto q = update_profile(p, {{"doppler_hz", "-1500"}, {"power_advantage_db", "9"}}, 3.0, &log);
  EXPECT_DOUBLE_EQ(q.doppler_hz, -1500.0);
  EXPECT_DOUBLE_EQ(field_at(q, "power_advantage_db", 3.0), 9.0);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].field, "doppler_hz");
  EXPECT_EQ(log[0].old_value, "0");
  EXPECT_EQ(log[0].new_value, "-1500");
}

TEST(AttackPatch, DynamicStyleRamps) {
  AttackProfile p;
  p.style = Style::DYNAMIC;
  p.ramp_s = 10.0;
  p.ramp_start_advantage_db = 6.0;  // no opening ramp effect
  p.doppler_hz = 1000.0;
  const auto q = update_profile(p, {{"doppler_hz", "2000"}}, 20.0);
  EXPECT_DOUBLE_EQ(field_at(q, "doppler_hz", 20.0), 1000.0);
  EXPECT_DOUBLE_EQ(field_at(q, "doppler_hz", 25.0), 1500.0);
  EXPECT_DOUBLE_EQ(field_at(q, "doppler_hz", 30.0), 2000.0);
  EXPECT_DOUBLE_EQ(field_at(q, "doppler_hz", 40.0), 2000.0);
}

TEST(AttackPatch, DynamicWindowOpensWithPowerRamp) {
  AttackProfile p;
  p.style = Style::DYNAMIC;
  p.ramp_s = 4.0;
  p.ramp_start_advantage_db = -10.0;
  p.power_advantage_db = 6.0;
  p.window_start_s = 10.0;
  EXPECT_DOUBLE_EQ(field_at(p, "power_advantage_db", 10.0), -10.0);
  EXPECT_DOUBLE_EQ(field_at(p, "power_advantage_db", 12.0), -2.0);
  EXPECT_DOUBLE_EQ(field_at(p, "power_advantage_db", 14.0), 6.0);
}

TEST(AttackPatch, InvalidPatchLeavesProfileUntouched) {
  AttackProfile p;
  p.doppler_hz = 100.0;
  std::vector<PatchRecord> log;
  EXPECT_THROW(update_profile(p, {{"doppler_hz", "200"}, {"bogus", "1"}}, 0.0, &log), ConfigError);
  EXPECT_THROW(update_profile(p, {{"doppler_hz", "20000"}}, 0.0, &log), ConfigError);
  EXPECT_THROW(update_profile(p, {{"doppler_hz", "abc"}}, 0.0, &log), ConfigError);
  EXPECT_THROW(update_profile(p, {{"multitransmitter", "true"}}, 0.0, &log), ConfigError);
  EXPECT_TRUE(log.empty());
  EXPECT_DOUBLE_EQ(p.doppler_hz, 100.0);
}

TEST(AttackPatch, FieldTextRoundTrips) {
  AttackProfile p;
  const auto q = update_profile(p, {{"doppler_mode", "MATCHED_PLUS_BIAS"}, {"timing", "INTERMITTENT"}}, 0.0);
  EXPECT_EQ(field_text(q, "doppler_mode"), "MATCHED_PLUS_BIAS");
  EXPECT_EQ(field_text(q, "timing"), "INTERMITTENT");
  EXPECT_EQ(field_text(q, "active"), "true");
}

TEST(Jamming, LaneDensityAndGating) {
  JammingProfile j;
  j.power_db = 15.0;
  j.timing = {true, 1.0, 0.5};
  auto lane = jamming_lane(j, 0.2, -45.0);
  EXPECT_TRUE(lane.active);
  EXPECT_DOUBLE_EQ(lane.density_db, -30.0);
  lane = jamming_lane(j, 0.7, -45.0);
  EXPECT_FALSE(lane.active);
  EXPECT_EQ(lane.density_db, synth::kMuted);
}

TEST(Jamming, PerSampleGateOnAbsoluteTime) {
  JammingProfile j;
  j.power_db = 0.0;
  j.timing = {true, 0.002, 0.5};  // on for the first millisecond of every two
  auto buf = make_buffer(Band::E1, 2.1e6, 0.0005, 0.002);
  add_jamming(buf, j, -60.0, 1);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double t = static_cast<double>(std::llround(0.0005 * 2.1e6) + static_cast<long long>(i)) / 2.1e6;
    const bool on = std::fmod(t, 0.002) < 0.001;
    ASSERT_EQ(buf.samples[i] != Sample(0.0), on) << "t=" << t;
  }
  // power matches the commanded density
  auto full = make_buffer(Band::E1, 2.1e6, 0.0, 0.05);
  add_jamming(full, JammingProfile{Band::E1, 10.0, {}, 0.0, kForever, true}, -60.0, 2);
  double pw = 0;
  for (auto s : full.samples) pw += std::norm(s);
  EXPECT_NEAR(pw / static_cast<double>(full.size()) / (1e-5 * 2.1e6), 1.0, 0.02);
}

TEST(Jamming, OtherBandUntouched) {
  JammingProfile j;
  j.band = Band::E5B;
  auto buf = make_buffer(Band::E1, 2.1e6, 0.0, 0.001);
  add_jamming(buf, j, -60.0, 1);
  for (auto s : buf.samples) ASSERT_EQ(s, Sample(0.0));
}

TEST(Meaconing, ReplaysDelayedAndBoosted) {
  auto rec = make_buffer(Band::E1, 1000.0 * 4.0, 0.0, 1.0);  // toy rate
  for (std::size_t i = 0; i < rec.size(); ++i) rec.samples[i] = Sample(static_cast<double>(i), 0.0);
  std::string warn;
  const auto out = meacon_lane(rec, 0.25, 20.0, rec.sample_rate_hz, &warn);
  EXPECT_TRUE(warn.empty());
  const std::size_t shift = 1000;
  for (std::size_t i = 0; i < shift; ++i) ASSERT_EQ(out.samples[i], Sample(0.0));
  for (std::size_t i = shift; i < out.size(); i += 37)
    ASSERT_NEAR(out.samples[i].real(), 10.0 * static_cast<double>(i - shift), 1e-9);

  const auto empty = meacon_lane(rec, 2.0, 0.0, rec.sample_rate_hz, &warn);
  EXPECT_FALSE(warn.empty());
  for (auto s : empty.samples) ASSERT_EQ(s, Sample(0.0));
  EXPECT_THROW(meacon_lane(rec, 0.1, 0.0, 8000.0), DomainError);
}
