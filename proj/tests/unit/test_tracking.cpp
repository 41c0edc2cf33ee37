#include <gtest/gtest.h>

#include <random>

#include "spamlab/navdata.hpp"
#include "spamlab/rx/acquisition.hpp"
#include "spamlab/rx/channel.hpp"
#include "spamlab/rx/cn0.hpp"
#include "spamlab/sigsynth.hpp"

#include "chain.hpp"

using namespace spamlab;

using namespace chain;

TEST(Cn0Estimator, MatchesCommandedOnSyntheticPrompts) {
  // Prompt model: amplitude A per 1 ms coherent sum, complex noise variance s2.
  // C/N0 = A^2 / (s2 * T).
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (double target : {30.0, 35.0, 40.0, 45.0, 50.0}) {
    rx::Cn0Estimator est;
    const double s2 = 1.0;
    const double a = std::sqrt(std::pow(10.0, target / 10.0) * 1e-3 * s2);
    for (int sym = 0; sym < 400; ++sym) {
      const double bit = (rng() & 1) ? 1.0 : -1.0;
      std::array<std::complex<double>, 4> prompts;
      for (auto& pr : prompts)
        pr = std::complex<double>(a * bit + n01(rng) * std::sqrt(s2 / 2), n01(rng) * std::sqrt(s2 / 2));
      est.push_prompts(prompts);
    }
    ASSERT_TRUE(est.estimate().has_value());
    EXPECT_NEAR(*est.estimate(), target, 1.0) << "commanded " << target;
  }
}

TEST(Cn0Estimator, EmptyUntilMinimumSymbols) {
  rx::Cn0Estimator est;
  std::array<std::complex<double>, 4> prompts{1.0, 1.0, 1.0, 1.0};
  for (int i = 0; i < est.config().min_symbols - 1; ++i) est.push_prompts(prompts);
  EXPECT_FALSE(est.estimate().has_value());
  est.push_prompts(prompts);
  EXPECT_TRUE(est.estimate().has_value());
  est.reset();
  EXPECT_EQ(est.symbols(), 0);
}

class TrackingCn0 : public ::testing::TestWithParam<double> {};

TEST_P(TrackingCn0, EstimateWithinTwoDbOfCommanded) {
  // The lock detector threshold sits at 28 dB-Hz; lowering it keeps the
  // 30 dB-Hz point from ending on a noisy fast estimate.
  rx::TrackingConfig cfg;
  cfg.cn0_threshold_dbhz = 20.0;
  const double cn0 = GetParam();
  const auto r = track_clean(cn0, 3.0, 17, 1800.0, 5.0, 0.05, cfg);
  EXPECT_EQ(r.state, rx::ChannelStatus::TRACKING);
  EXPECT_NEAR(r.final_cn0, cn0, 2.0);
}
INSTANTIATE_TEST_SUITE_P(Commanded, TrackingCn0, ::testing::Values(30.0, 35.0, 40.0, 45.0));

class TrackingPullIn : public ::testing::TestWithParam<double> {};

TEST_P(TrackingPullIn, FromHalfBinAcquisitionErrors) {
  for (double sign : {1.0, -1.0}) {
    const auto r = track_clean(GetParam(), 2.0, 5, -2700.0, sign * 25.0, sign * 0.3);
    EXPECT_EQ(r.state, rx::ChannelStatus::TRACKING);
    EXPECT_LT(std::abs(r.doppler_err), 10.0);
    EXPECT_LT(std::abs(r.code_err), 0.1);
  }
}
INSTANTIATE_TEST_SUITE_P(Cn0, TrackingPullIn, ::testing::Values(35.0, 40.0, 45.0));

TEST(Tracking, LosesLockWithoutSignal) {
  const auto code = codegen::generate_code(11, Band::E1);
  const auto table = synth::modulation_table(code);
  auto buf = synth::add_noise(make_buffer(Band::E1, kFs, 0.0, 1.5), -45.0, 8);
  rx::TrackingConfig cfg;
  rx::ChannelState ch;
  ch.svid = 11;
  rx::start_tracking(ch, 1000.0, 100.0, 0, kFs, cfg, 1);
  std::size_t pos = 0;
  while (ch.state == rx::ChannelStatus::TRACKING) {
    const std::size_t n = rx::track_step(ch, std::span<const Sample>(buf.samples).subspan(pos), table, cfg, kFs);
    if (n == 0) break;
    pos += n;
  }
  EXPECT_EQ(ch.state, rx::ChannelStatus::LOST);
  EXPECT_LT(static_cast<double>(pos) / kFs, 1.0);
}
