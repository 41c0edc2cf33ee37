#include <benchmark/benchmark.h>

#include "spamlab/codegen.hpp"
#include "spamlab/rx/acquisition.hpp"
#include "spamlab/rx/channel.hpp"
#include "spamlab/sigsynth.hpp"

using namespace spamlab;

namespace {

constexpr double kFs = 2.1e6;

IqBuffer test_signal(const codegen::PrnCode& code, double duration_s, double noise_db) {
  synth::SignalParams p;
  p.svid = code.svid;
  p.code_offset_ms = 0.37;
  p.doppler_hz = 1234.0;
  auto buf = synth::synthesize(p, code, duration_s, kFs);
  return synth::add_noise(std::move(buf), noise_db, 42);
}

void BM_SynthesizeLane(benchmark::State& state) {
  const auto code = codegen::generate_code(11, Band::E1);
  const auto table = synth::modulation_table(code);
  synth::SignalParams p;
  p.svid = 11;
  p.doppler_hz = 2500.0;
  auto buf = make_buffer(Band::E1, kFs, 0.0, 1e-3);
  for (auto _ : state) {
    synth::accumulate(p, table, kFs, 0.0, buf.samples);
    benchmark::DoNotOptimize(buf.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(buf.size()));
}
BENCHMARK(BM_SynthesizeLane);

void BM_AddNoise(benchmark::State& state) {
  auto buf = make_buffer(Band::E1, kFs, 0.0, 1e-3);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    synth::add_noise_in_place(buf, -60.0, seed++);
    benchmark::DoNotOptimize(buf.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(buf.size()));
}
BENCHMARK(BM_AddNoise);

void BM_AcquireCoarse(benchmark::State& state) {
  const auto code = codegen::generate_code(7, Band::E1);
  const auto buf = test_signal(code, 0.02, -45.0);
  rx::Acquirer acq;
  const rx::DopplerWindow window{0.0, static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(acq.coarse(buf, code, window));
}
BENCHMARK(BM_AcquireCoarse)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_AcquireFine(benchmark::State& state) {
  const auto code = codegen::generate_code(7, Band::E1);
  const auto buf = test_signal(code, 0.03, -45.0);
  rx::Acquirer acq;
  const auto coarse = acq.coarse(buf, code, {0.0, 5000.0});
  for (auto _ : state) benchmark::DoNotOptimize(acq.fine(buf, code, coarse));
}
BENCHMARK(BM_AcquireFine)->Unit(benchmark::kMillisecond);

void BM_TrackOneSecond(benchmark::State& state) {
  const auto code = codegen::generate_code(7, Band::E1);
  const auto table = synth::modulation_table(code);
  const auto buf = test_signal(code, 1.0, -45.0);
  rx::TrackingConfig cfg;
  for (auto _ : state) {
    rx::ChannelState ch;
    ch.svid = 7;
    rx::start_tracking(ch, 1234.0, 0.37 * 1023.0, 0, kFs, cfg, 3);
    std::size_t pos = 0;
    while (true) {
      const std::size_t n = rx::track_step(ch, std::span(buf.samples).subspan(pos), table, cfg, kFs);
      if (n == 0) break;
      pos += n;
    }
    benchmark::DoNotOptimize(ch.doppler_hz);
  }
}
BENCHMARK(BM_TrackOneSecond)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
