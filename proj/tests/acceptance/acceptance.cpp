// End-to-end acceptance run. Prints one PASS/FAIL line per criterion,
// followed by indented detail lines, and exits non-zero on any FAIL.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chain.hpp"
#include "oracles.hpp"
#include "spamlab/report.hpp"
#include "spamlab/scenario.hpp"

using namespace spamlab;
namespace fs = std::filesystem;

namespace {

// Tolerances and counts.
constexpr int kColdSeeds = 10;
constexpr int kWarmSeeds = 10;
constexpr int kWarmRequired = 9;
constexpr double kWarmReacquireMaxS = 30.0;
constexpr int kHotSeeds = 20;
constexpr double kHotOrderingMargin = 0.5;  // capture-rate gap that counts as "much higher"
constexpr double kHotAloneNominal = 0.5;
constexpr double kHotAssistNominal = 0.9;
constexpr double kColdRuntimeMaxS = 300.0;
constexpr double kSurgicalMaxDb = 2.0;
constexpr double kSurgicalBinS = 1.0;
constexpr double kStartupGraceS = 1.0;
constexpr double kSpoofDopplerTolHz = 100.0;
constexpr double kCodeXcorrMax = 0.1;
constexpr double kAcqCodeMaxChips = 0.5;
constexpr double kCn0TolDb = 2.0;
constexpr double kCn0LockThresholdDbHz = 20.0;
constexpr double kPvtMaxM = 1e-3;
constexpr int kDualPeakRuns = 20;
constexpr double kDualPeakMinRate = 0.9;
constexpr int kCleanSeeds = 20;

fs::path g_scenarios;

struct Run {
  std::string name;
  std::uint64_t seed = 0;
  scenario::ScenarioSpec spec;
  scenario::RunResult result;
  double wall_s = 0.0;
};

Run run(const std::string& name, std::uint64_t seed,
        const std::function<void(scenario::ScenarioSpec&)>& edit = {}) {
  Run r;
  r.name = name;
  r.seed = seed;
  r.spec = scenario::load_spec(g_scenarios / (name + ".json"), seed);
  if (edit) edit(r.spec);
  const auto t0 = std::chrono::steady_clock::now();
  r.result = scenario::run(r.spec);
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "  ran %s seed %llu in %.1f s\n", name.c_str(), static_cast<unsigned long long>(seed), r.wall_s);
  return r;
}

// Attack-free twin, cut at the attack window end.
Run control_for(const Run& attacked, double end_s) {
  return run(attacked.name, attacked.seed, [end_s](scenario::ScenarioSpec& s) {
    s.attacks.clear();
    s.scoring.attack_window.reset();
    s.duration_s = end_s;
  });
}

struct Verdict {
  std::string name;
  bool pass = false;
  std::vector<std::string> details;
};

std::vector<Verdict> g_verdicts;

void report(Verdict v) {
  std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << "\n";
  for (const auto& d : v.details) std::cout << "    " << d << "\n";
  std::cout.flush();
  g_verdicts.push_back(std::move(v));
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::set<int> targets_of(const scenario::ScenarioSpec& s) {
  std::set<int> t;
  for (const auto& a : s.attacks) t.insert(a.target_svid);
  return t;
}

// First non-target channel point that is not TRACKING in [from, to).
std::optional<std::string> non_target_loss(const scenario::Timeline& tl, const std::set<int>& targets, double from,
                                           double to) {
  for (const auto& p : tl.points) {
    if (p.t_s < from || p.t_s >= to) continue;
    for (const auto& c : p.channels)
      if (!targets.count(c.svid) && c.state != rx::ChannelStatus::TRACKING)
        return fmt("svid %d %s at t=%.1f", c.svid, std::string(rx::to_string(c.state)).c_str(), p.t_s);
  }
  return std::nullopt;
}

// Largest 1 s-bin mean C/N0 difference over non-target channels in [from, to).
double max_cn0_deviation(const scenario::Timeline& a, const scenario::Timeline& b, const std::set<int>& targets,
                         double from, double to) {
  using Key = std::tuple<int, int, long>;
  auto bins = [&](const scenario::Timeline& tl) {
    std::map<Key, std::pair<double, int>> m;
    for (const auto& p : tl.points) {
      if (p.t_s < from || p.t_s >= to) continue;
      for (const auto& c : p.channels) {
        if (targets.count(c.svid) || !std::isfinite(c.cn0_dbhz)) continue;
        auto& e = m[{c.svid, static_cast<int>(c.band), static_cast<long>(std::floor(p.t_s / kSurgicalBinS))}];
        e.first += c.cn0_dbhz;
        ++e.second;
      }
    }
    return m;
  };
  const auto ma = bins(a), mb = bins(b);
  double worst = 0.0;
  for (const auto& [k, v] : ma) {
    auto it = mb.find(k);
    if (it == mb.end()) return INFINITY;
    worst = std::max(worst, std::abs(v.first / v.second - it->second.first / it->second.second));
  }
  return ma.empty() ? INFINITY : worst;
}

std::set<int> cn0_step_svids(const std::vector<detect::Alert>& alerts) {
  std::set<int> s;
  for (const auto& a : alerts)
    if (a.kind == detect::AlertKind::CN0_STEP && a.svid) s.insert(*a.svid);
  return s;
}

std::string join(const std::set<int>& s) {
  std::ostringstream os;
  os << "{";
  for (auto it = s.begin(); it != s.end(); ++it) os << (it == s.begin() ? "" : ",") << *it;
  os << "}";
  return os.str();
}

// Runs shared between criteria.
std::vector<Run> g_cold, g_warm, g_hot_alone, g_hot_assist;
std::optional<Run> g_osnma;

void cold_start() {
  Verdict v{"cold-start denial: spoof acquired, permanent loss, other channels unaffected", true, {}};
  int ok = 0;
  double worst_wall = 0.0;
  for (int s = 1; s <= kColdSeeds; ++s) {
    g_cold.push_back(run("cold_start_false_doppler", static_cast<std::uint64_t>(s)));
    const auto& r = g_cold.back();
    const auto& o = r.result.outcome;
    const auto& atk = r.spec.attacks.at(0);
    bool acquired = false;
    for (const auto& p : r.result.timeline.points)
      for (const auto& c : p.channels)
        if (c.svid == atk.target_svid && c.state == rx::ChannelStatus::TRACKING && p.t_s < atk.window_end_s &&
            std::abs(c.doppler_hz - atk.doppler_hz) <= kSpoofDopplerTolHz)
          acquired = true;
    const auto loss = non_target_loss(r.result.timeline, {atk.target_svid}, kStartupGraceS, r.spec.duration_s + 1.0);
    const bool good = acquired && o.lost_during_attack && !o.recovered_during_attack && !o.recovered_after_attack &&
                      !loss && r.wall_s < kColdRuntimeMaxS;
    ok += good;
    worst_wall = std::max(worst_wall, r.wall_s);
    v.details.push_back(fmt("seed %d: spoof_acquired=%d lost=%d during=%d after=%d others=%s wall=%.0fs", s, acquired,
                            o.lost_during_attack, o.recovered_during_attack, o.recovered_after_attack,
                            loss ? loss->c_str() : "tracking", r.wall_s));
  }
  v.pass = ok == kColdSeeds;
  v.details.push_back(fmt("%d/%d seeds as expected; worst wall time %.0f s (limit %.0f s, E1 at %.1f Msps)", ok,
                          kColdSeeds, worst_wall, kColdRuntimeMaxS,
                          g_cold.front().spec.sample_rate_hz.at(Band::E1) / 1e6));
  report(std::move(v));
}

void warm_start() {
  Verdict v{"warm-start denial: loss while attacked, reacquisition after", true, {}};
  int ok = 0;
  for (int s = 1; s <= kWarmSeeds; ++s) {
    g_warm.push_back(run("warm_start_bias_compensated", static_cast<std::uint64_t>(s)));
    const auto& o = g_warm.back().result.outcome;
    const bool good = o.lost_during_attack && !o.recovered_during_attack && o.recovered_after_attack &&
                      o.time_to_reacquire_s && *o.time_to_reacquire_s <= kWarmReacquireMaxS;
    ok += good;
    v.details.push_back(fmt("seed %d: lost=%d during=%d after=%d t_reacq=%s", s, o.lost_during_attack,
                            o.recovered_during_attack, o.recovered_after_attack,
                            o.time_to_reacquire_s ? fmt("%.1fs", *o.time_to_reacquire_s).c_str() : "-"));
  }
  v.details.push_back(fmt("%d/%d seeds as expected (need %d)", ok, kWarmSeeds, kWarmRequired));

  // Dual-band variant: E5B keeps the target accessible unless it is jammed.
  const auto par = run("warm_start_e5b_parallel", 1);
  const auto jam = run("warm_start_e5b_jammed", 1);
  const auto& pa = par.spec.attacks.at(0);
  scenario::ClassifyConfig cc = par.result.classification;
  bool e5b_held = true;
  for (const auto& p : par.result.timeline.points) {
    if (p.t_s < kStartupGraceS || p.t_s >= pa.window_end_s) continue;
    scenario::TimelinePoint only_e5b = p;
    std::erase_if(only_e5b.channels, [](const scenario::ChannelPoint& c) { return c.band != Band::E5B; });
    e5b_held = e5b_held && scenario::has_access(only_e5b, pa.target_svid, cc);
  }
  const bool par_ok = !par.result.outcome.lost_during_attack && e5b_held;
  const bool jam_ok = jam.result.outcome.lost_during_attack && jam.result.outcome.recovered_after_attack;
  v.details.push_back(fmt("E5B parallel: lost=%d, E5B access held through attack=%d", par.result.outcome.lost_during_attack,
                          e5b_held));
  v.details.push_back(fmt("E5B jammed: lost=%d after=%d", jam.result.outcome.lost_during_attack,
                          jam.result.outcome.recovered_after_attack));
  v.pass = ok >= kWarmRequired && par_ok && jam_ok;
  report(std::move(v));
}

void hot_start() {
  Verdict v{"hot-start: intermittent jamming raises the capture rate well above SpAmming alone", true, {}};
  int alone = 0, assist = 0;
  for (int s = 1; s <= kHotSeeds; ++s) {
    g_hot_alone.push_back(run("hot_start_spamming", static_cast<std::uint64_t>(s)));
    g_hot_assist.push_back(run("hot_start_jamming_assist", static_cast<std::uint64_t>(s)));
    alone += g_hot_alone.back().result.outcome.lost_during_attack;
    assist += g_hot_assist.back().result.outcome.lost_during_attack;
  }
  const double ra = static_cast<double>(alone) / kHotSeeds, rb = static_cast<double>(assist) / kHotSeeds;
  v.pass = rb - ra >= kHotOrderingMargin;
  v.details.push_back(fmt("capture rate alone %.2f (%d/%d), with jamming %.2f (%d/%d); required gap %.2f", ra, alone,
                          kHotSeeds, rb, assist, kHotSeeds, kHotOrderingMargin));
  v.details.push_back(fmt("reported: alone < %.2f: %s; with jamming >= %.2f: %s", kHotAloneNominal,
                          ra < kHotAloneNominal ? "yes" : "no", kHotAssistNominal, rb >= kHotAssistNominal ? "yes" : "no"));
  report(std::move(v));
}

void osnma() {
  Verdict v{"OSNMA denial: PVT stays valid on unauthenticated satellites only", true, {}};
  g_osnma = run("osnma_denial", 1);
  const auto& r = *g_osnma;
  int auth = 0;
  for (const auto& s : r.spec.satellites) auth += s.truth.authenticated;
  const auto targets = targets_of(r.spec);
  double end = 0.0;
  for (const auto& a : r.spec.attacks) end = std::max(end, a.window_end_s);
  int points = 0, invalid = 0, authenticated = 0;
  for (const auto& p : r.result.timeline.points) {
    if (p.t_s < kStartupGraceS || p.t_s >= end) continue;
    ++points;
    if (!p.pvt.valid) ++invalid;
    else if (p.pvt.authenticated_fraction != 0.0) ++authenticated;
  }
  v.pass = auth == 2 && targets.size() == 2 && points > 0 && invalid == 0 && authenticated == 0;
  v.details.push_back(fmt("%d authenticated satellites, targets %s; %d points in attack: %d invalid PVT, %d with "
                          "authenticated_fraction > 0",
                          auth, join(targets).c_str(), points, invalid, authenticated));
  report(std::move(v));
}

void surgical() {
  Verdict v{"surgical denial: non-target C/N0 within 2 dB of attack-free control, no non-target loss", true, {}};
  auto check = [&](const Run& r) {
    double start = INFINITY, end = 0.0;
    for (const auto& a : r.spec.attacks) {
      start = std::min(start, a.window_start_s);
      end = std::max(end, a.window_end_s);
    }
    end = std::min(end, r.spec.duration_s);
    const auto ctl = control_for(r, end);
    const double from = std::max(start, kStartupGraceS);
    const auto targets = targets_of(r.spec);
    const double dev = max_cn0_deviation(r.result.timeline, ctl.result.timeline, targets, from, end);
    const auto loss = non_target_loss(r.result.timeline, targets, from, end);
    const bool ok = dev <= kSurgicalMaxDb && !loss;
    if (!ok) v.pass = false;
    return fmt("%s seed %llu: max deviation %.2f dB, %s", r.name.c_str(), static_cast<unsigned long long>(r.seed), dev,
               loss ? loss->c_str() : "no non-target loss");
  };
  int runs = 0;
  auto all = [&](const std::vector<Run>& rs) {
    for (const auto& r : rs) {
      v.details.push_back(check(r));
      ++runs;
    }
  };
  all(g_cold);
  all(g_warm);
  all(g_hot_alone);
  if (g_osnma) all({*g_osnma});
  v.details.insert(v.details.begin(), fmt("%d SpAmming runs compared (jamming-assisted runs excluded)", runs));
  report(std::move(v));
}

void signal_chain() {
  Verdict v{"signal chain: codes, acquisition, C/N0, PVT, determinism", true, {}};
  for (auto band : {Band::E1, Band::E5B}) {
    std::vector<oracle::PackedCode> codes;
    for (int s = 1; s <= 36; ++s) codes.push_back(oracle::pack(codegen::generate_code(s, band)));
    double worst = 0.0;
    for (std::size_t i = 0; i < codes.size(); ++i)
      for (std::size_t j = i + 1; j < codes.size(); ++j)
        worst = std::max(worst, oracle::max_cross_correlation(codes[i], codes[j]));
    v.pass = v.pass && worst <= kCodeXcorrMax;
    v.details.push_back(fmt("%s max normalized cross-correlation %.4f (limit %.2f)", std::string(to_string(band)).c_str(),
                            worst, kCodeXcorrMax));
  }

  const auto acq = chain::acquisition_sweep(100, 2024);
  const bool acq_ok = acq.missed == 0 && acq.worst_coarse_hz <= acq.coarse_step_hz / 2 &&
                      acq.worst_fine_hz <= acq.fine_step_hz / 2 && acq.worst_code_chips <= kAcqCodeMaxChips;
  v.pass = v.pass && acq_ok;
  v.details.push_back(fmt("acquisition over 100 truths: missed %d, coarse %.1f Hz (<= %.1f), fine %.2f Hz (<= %.2f), "
                          "code %.3f chips (<= %.1f)",
                          acq.missed, acq.worst_coarse_hz, acq.coarse_step_hz / 2, acq.worst_fine_hz,
                          acq.fine_step_hz / 2, acq.worst_code_chips, kAcqCodeMaxChips));

  rx::TrackingConfig tc;
  tc.cn0_threshold_dbhz = kCn0LockThresholdDbHz;
  for (double cn0 : {30.0, 35.0, 40.0, 45.0}) {
    const auto r = chain::track_clean(cn0, 3.0, 17, 1800.0, 5.0, 0.05, tc);
    const bool ok = r.state == rx::ChannelStatus::TRACKING && std::abs(r.final_cn0 - cn0) <= kCn0TolDb;
    v.pass = v.pass && ok;
    v.details.push_back(fmt("C/N0 commanded %.0f estimated %.2f dB-Hz (+-%.0f)", cn0, r.final_cn0, kCn0TolDb));
  }

  const auto pvt = chain::pvt_sweep(100, 77);
  v.pass = v.pass && pvt.invalid == 0 && pvt.worst_position_m <= kPvtMaxM;
  v.details.push_back(fmt("PVT round trip over 100 geometries: invalid %d, worst position %.2e m (<= %.0e)", pvt.invalid,
                          pvt.worst_position_m, kPvtMaxM));

  const auto a = run("hot_start_jamming_assist", 7);
  const auto b = run("hot_start_jamming_assist", 7);
  const bool same = report::results_json(a.result).dump() == report::results_json(b.result).dump();
  v.pass = v.pass && same;
  v.details.push_back(fmt("two runs of the same spec and seed: results %s", same ? "bit-identical" : "DIFFER"));
  report(std::move(v));
}

void detection() {
  Verdict v{"detection: jamming, SpAmming, dual peak, meaconing, clean", true, {}};

  const auto jam = run("jamming_e1", 1);
  std::set<int> in_band;
  for (const auto& s : scenario::satellites_in(jam.spec, Band::E1)) in_band.insert(s->truth.svid);
  const auto stepped = cn0_step_svids(jam.result.alerts);
  const bool jam_ok = std::includes(stepped.begin(), stepped.end(), in_band.begin(), in_band.end());
  v.pass = v.pass && jam_ok;
  v.details.push_back(fmt("jamming: CN0_STEP on %s, in-band channels %s", join(stepped).c_str(), join(in_band).c_str()));

  int spam_runs = 0, spam_bad = 0;
  auto spam = [&](const Run& r) {
    ++spam_runs;
    const auto t = targets_of(r.spec);
    const auto s = cn0_step_svids(r.result.alerts);
    if (!std::includes(t.begin(), t.end(), s.begin(), s.end())) {
      ++spam_bad;
      v.details.push_back(fmt("%s seed %llu: CN0_STEP on %s, targets %s", r.name.c_str(),
                              static_cast<unsigned long long>(r.seed), join(s).c_str(), join(t).c_str()));
    }
  };
  for (const auto* rs : {&g_cold, &g_warm, &g_hot_alone}) std::for_each(rs->begin(), rs->end(), spam);
  if (g_osnma) spam(*g_osnma);
  v.pass = v.pass && spam_runs > 0 && spam_bad == 0;
  v.details.push_back(fmt("SpAmming: %d/%d runs with CN0_STEP only on targets", spam_runs - spam_bad, spam_runs));

  int flagged = 0;
  for (int s = 1; s <= kDualPeakRuns; ++s) {
    const auto r = run("dual_peak_overlap", static_cast<std::uint64_t>(s));
    const int target = r.spec.attacks.at(0).target_svid;
    flagged += std::any_of(r.result.alerts.begin(), r.result.alerts.end(), [&](const detect::Alert& a) {
      return a.kind == detect::AlertKind::DUAL_PEAK && a.svid == target;
    });
  }
  const double rate = static_cast<double>(flagged) / kDualPeakRuns;
  v.pass = v.pass && rate >= kDualPeakMinRate;
  v.details.push_back(fmt("dual peak: %d/%d overlap runs flagged (need %.0f%%)", flagged, kDualPeakRuns,
                          kDualPeakMinRate * 100));

  const auto mea = run("meaconing_2s", 1);
  int clock = 0;
  double offset = 0.0;
  for (const auto& a : mea.result.alerts)
    if (a.kind == detect::AlertKind::CLOCK_INCONSISTENCY) {
      ++clock;
      offset = a.evidence.value("offset_s", 0.0);
    }
  v.pass = v.pass && clock > 0;
  v.details.push_back(fmt("meaconing 2 s: %d CLOCK_INCONSISTENCY alerts (offset %.3f s)", clock, offset));

  int false_alarms = 0;
  for (int s = 1; s <= kCleanSeeds; ++s) {
    const auto r = run("clean", static_cast<std::uint64_t>(s));
    false_alarms += static_cast<int>(r.result.alerts.size());
  }
  v.pass = v.pass && false_alarms == 0;
  v.details.push_back(fmt("clean: %d alerts over %d seeds", false_alarms, kCleanSeeds));
  report(std::move(v));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spamlab acceptance"};
  std::string scenarios = SPAMLAB_SOURCE_DIR "/scenarios";
  std::vector<std::string> only;
  app.add_option("--scenarios", scenarios, "Scenario directory");
  app.add_option("--only", only, "Run only criteria whose key matches: cold warm hot osnma surgical chain detection");
  CLI11_PARSE(app, argc, argv);
  g_scenarios = scenarios;

  auto want = [&](const std::string& k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (want("cold") || want("surgical") || want("detection")) cold_start();
    if (want("warm") || want("surgical") || want("detection")) warm_start();
    if (want("hot") || want("surgical") || want("detection")) hot_start();
    if (want("osnma") || want("surgical") || want("detection")) osnma();
    if (want("surgical")) surgical();
    if (want("chain")) signal_chain();
    if (want("detection")) detection();
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance run aborted: " << e.what() << "\n";
    return 1;
  }
  const int failed = static_cast<int>(std::count_if(g_verdicts.begin(), g_verdicts.end(), [](auto& v) { return !v.pass; }));
  std::cout << fmt("%zu criteria, %d failed, %.0f s\n", g_verdicts.size(), failed,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return failed == 0 ? 0 : 1;
}
