#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "spamlab/error.hpp"
#include "spamlab/sigsynth.hpp"

using namespace spamlab;

namespace {

void expect_matches_formula(const synth::SignalParams& p, double fs, double epoch, double duration) {
  const auto code = codegen::generate_code(p.svid, p.band);
  const auto buf = synth::synthesize(p, code, duration, fs, epoch);
  const double delay = p.code_offset_ms * 1e-3 * band_info(p.band).chip_rate_hz;
  const double amp = std::pow(10.0, p.power_db / 20.0);
  int checked = 0;
  for (std::size_t i = 0; i < buf.size(); i += 7) {
    std::complex<double> want;
    if (!oracle::lane_sample(code, delay, p.doppler_hz, p.carrier_phase_cycles, amp, buf.time_of(i), epoch,
                             p.code_doppler_coupled, want))
      continue;
    ASSERT_NEAR(std::abs(buf.samples[i] - want), 0.0, 1e-6 * amp) << "sample " << i;
    ++checked;
  }
  EXPECT_GT(checked, static_cast<int>(buf.size() / 8));
}

}  // namespace

TEST(Synth, E1LaneMatchesSignalDefinition) {
  synth::SignalParams p;
  p.svid = 13;
  p.code_offset_ms = 1.7321;
  p.doppler_hz = -3210.5;
  p.carrier_phase_cycles = 0.3;
  p.power_db = 3.0;
  expect_matches_formula(p, 2.1e6, 0.0, 0.01);
  expect_matches_formula(p, 4.092e6, 12.345, 0.005);
}

TEST(Synth, E5BLaneMatchesSignalDefinition) {
  synth::SignalParams p;
  p.svid = 4;
  p.band = Band::E5B;
  p.code_offset_ms = 0.4;
  p.doppler_hz = 850.0;
  p.code_doppler_coupled = false;
  expect_matches_formula(p, 20.5e6, 3.0, 0.003);
}

TEST(Synth, SymbolsFlipWholeCodePeriods) {
  const auto code = codegen::generate_code(2, Band::E1);
  synth::SignalParams p;
  p.svid = 2;
  p.symbols = {1, -1};
  const double fs = 2.1e6;
  const auto a = synth::synthesize(p, code, 0.008, fs);
  p.symbols = {1, 1};
  const auto b = synth::synthesize(p, code, 0.008, fs);
  // one E1 symbol = one 4 ms code period
  const std::size_t half = static_cast<std::size_t>(0.004 * fs);
  for (std::size_t i = 10; i < half - 10; i += 97) EXPECT_NEAR(std::abs(a.samples[i] - b.samples[i]), 0.0, 1e-12);
  for (std::size_t i = half + 10; i < a.size(); i += 97) EXPECT_NEAR(std::abs(a.samples[i] + b.samples[i]), 0.0, 1e-12);
}

TEST(Synth, MutedLaneAddsNothing) {
  const auto code = codegen::generate_code(2, Band::E1);
  synth::SignalParams p;
  p.svid = 2;
  p.power_db = synth::kMuted;
  const auto buf = synth::synthesize(p, code, 0.001, 2.1e6);
  for (const auto& s : buf.samples) ASSERT_EQ(s, Sample(0.0, 0.0));
}

TEST(Synth, RejectsUndersampledRate) {
  const auto code = codegen::generate_code(2, Band::E5B);
  synth::SignalParams p;
  p.svid = 2;
  p.band = Band::E5B;
  EXPECT_THROW(synth::synthesize(p, code, 0.001, 4.092e6), DomainError);
  EXPECT_THROW(synth::check_sample_rate(Band::E1, 2.0e6), DomainError);
  EXPECT_NO_THROW(synth::check_sample_rate(Band::E1, 2.1e6));
}

TEST(Synth, RejectsMismatchedCode) {
  synth::SignalParams p;
  p.svid = 3;
  EXPECT_THROW(synth::synthesize(p, codegen::generate_code(4, Band::E1), 0.001, 2.1e6), DomainError);
}

TEST(Synth, NoiseVarianceMatchesDensity) {
  const double fs = 2.1e6;
  auto buf = make_buffer(Band::E1, fs, 0.0, 0.1);
  synth::add_noise_in_place(buf, -60.0, 99);
  double power = 0.0, mean_re = 0.0;
  for (const auto& s : buf.samples) {
    power += std::norm(s);
    mean_re += s.real();
  }
  power /= static_cast<double>(buf.size());
  mean_re /= static_cast<double>(buf.size());
  const double expected = 1e-6 * fs;
  EXPECT_NEAR(power / expected, 1.0, 0.01);
  EXPECT_NEAR(mean_re, 0.0, 5.0 * std::sqrt(expected / 2.0 / static_cast<double>(buf.size())));
}

TEST(Synth, NoiseIsSeedDeterministic) {
  auto a = synth::add_noise(make_buffer(Band::E1, 2.1e6, 0.0, 0.001), -50.0, 5);
  auto b = synth::add_noise(make_buffer(Band::E1, 2.1e6, 0.0, 0.001), -50.0, 5);
  auto c = synth::add_noise(make_buffer(Band::E1, 2.1e6, 0.0, 0.001), -50.0, 6);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Synth, CombineSumsAndChecksShape) {
  auto a = make_buffer(Band::E1, 2.1e6, 0.0, 0.001);
  auto b = a;
  a.samples[5] = {1.0, 2.0};
  b.samples[5] = {0.5, -1.0};
  const std::vector<IqBuffer> both{a, b};
  const auto sum = synth::combine(both);
  EXPECT_EQ(sum.samples[5], Sample(1.5, 1.0));
  auto c = make_buffer(Band::E1, 4.2e6, 0.0, 0.001);
  const std::vector<IqBuffer> bad{a, c};
  EXPECT_THROW(synth::combine(bad), DomainError);
}

TEST(Synth, HardwareBiasUsesAbsoluteTime) {
  auto buf = make_buffer(Band::E1, 2.1e6, 2.5, 0.001);
  for (auto& s : buf.samples) s = 1.0;
  const auto out = synth::apply_hardware_bias(buf, 1200.0);
  for (std::size_t i : {0ul, 100ul, 2099ul}) {
    const double t = buf.time_of(i);
    EXPECT_NEAR(std::abs(out.samples[i] - std::polar(1.0, 2 * std::numbers::pi * 1200.0 * t)), 0.0, 1e-9);
  }
}

TEST(IqFile, RoundTripsFloat32) {
  auto buf = synth::add_noise(make_buffer(Band::E5B, 20.5e6, 1.25, 0.0002), -70.0, 3);
  const auto path = std::filesystem::temp_directory_path() / "spamlab_iq.bin";
  write_iq(path, buf);
  const auto back = read_iq(path);
  ASSERT_EQ(back.size(), buf.size());
  EXPECT_EQ(back.band, Band::E5B);
  EXPECT_DOUBLE_EQ(back.sample_rate_hz, 20.5e6);
  EXPECT_DOUBLE_EQ(back.epoch_s, 1.25);
  for (std::size_t i = 0; i < buf.size(); ++i)
    ASSERT_NEAR(std::abs(back.samples[i] - buf.samples[i]), 0.0, 1e-6 * std::abs(buf.samples[i]) + 1e-12);
}
