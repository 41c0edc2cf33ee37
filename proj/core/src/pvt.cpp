#include "spamlab/pvt.hpp"

#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "spamlab/error.hpp"

namespace spamlab::pvt {
namespace {

struct Pair {
  const Observables* obs;
  const SatelliteTruth* sat;
};

std::vector<Pair> match(const std::vector<Observables>& obs, const std::vector<SatelliteTruth>& truth) {
  std::map<int, const SatelliteTruth*> by_svid;
  for (const auto& s : truth) by_svid.emplace(s.svid, &s);
  std::vector<Pair> out;
  std::set<int> seen;
  for (const auto& o : obs) {
    auto it = by_svid.find(o.svid);
    if (it == by_svid.end() || !seen.insert(o.svid).second) continue;
    out.push_back({&o, it->second});
  }
  return out;
}

PvtSolution invalid(std::string reason) {
  PvtSolution s;
  s.valid = false;
  s.reason = std::move(reason);
  return s;
}

bool degenerate(const Eigen::MatrixXd& g, double min_ratio) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const auto& sv = svd.singularValues();
  return !(sv(sv.size() - 1) > min_ratio * sv(0));
}

}  // namespace

void validate(const SatelliteTruth& sat, bool any_radius) {
  if (sat.svid < kMinSvid || sat.svid > kMaxSvid) throw DomainError("svid outside 1..36");
  if (!sat.position_ecef_m.allFinite() || !sat.velocity_ecef_mps.allFinite())
    throw DomainError("satellite state must be finite");
  const double r = sat.position_ecef_m.norm();
  if (!any_radius && (r < kMinOrbitRadius || r > kMaxOrbitRadius))
    throw DomainError("satellite " + std::to_string(sat.svid) + " outside the MEO shell");
}

PvtSolution solve_position(const std::vector<Observables>& obs, const std::vector<SatelliteTruth>& truth,
                           const PvtConfig& config) {
  const auto pairs = match(obs, truth);
  if (pairs.size() < 4) return invalid("insufficient satellites");
  const auto n = static_cast<Eigen::Index>(pairs.size());

  Eigen::Vector4d x;
  x << config.initial_position_ecef_m, 0.0;  // clock term in meters
  Eigen::MatrixXd g(n, 4);
  Eigen::VectorXd r(n);
  bool converged = false;
  int iter = 0;
  for (; iter < config.max_iterations && !converged; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = pairs[static_cast<std::size_t>(i)];
      const Vec3 d = p.sat->position_ecef_m - x.head<3>();
      const double range = d.norm();
      g.row(i) << -d.transpose() / range, 1.0;
      r(i) = p.obs->pseudorange_m + kSpeedOfLight * p.sat->clock_bias_s - (range + x(3));
    }
    if (degenerate(g, config.min_singular_ratio)) return invalid("degenerate geometry");
    const Eigen::Vector4d dx = g.colPivHouseholderQr().solve(r);
    x += dx;
    converged = dx.head<3>().norm() < config.tolerance_m;
  }

  PvtSolution s;
  s.iterations = iter;
  s.position_ecef_m = x.head<3>();
  s.clock_bias_s = x(3) / kSpeedOfLight;
  double ss = 0.0;
  int authenticated = 0;
  for (const auto& p : pairs) {
    const double range = (p.sat->position_ecef_m - s.position_ecef_m).norm();
    const double res = p.obs->pseudorange_m + kSpeedOfLight * p.sat->clock_bias_s - (range + x(3));
    ss += res * res;
    s.used_svids.push_back(p.obs->svid);
    authenticated += p.sat->authenticated ? 1 : 0;
  }
  s.residual_rms_m = std::sqrt(ss / static_cast<double>(pairs.size()));
  s.authenticated_fraction = static_cast<double>(authenticated) / static_cast<double>(pairs.size());
  s.time_s = pairs.front().obs->receive_clock_s - s.clock_bias_s;
  s.valid = converged;
  if (!converged) s.reason = "no convergence";
  return s;
}

PvtSolution solve_velocity(const std::vector<Observables>& obs, const std::vector<SatelliteTruth>& truth,
                           const PvtSolution& position) {
  if (!position.valid) {
    PvtSolution s = position;
    s.velocity_valid = false;
    if (s.reason.empty()) s.reason = "position invalid";
    return s;
  }
  const auto pairs = match(obs, truth);
  PvtSolution s = position;
  if (pairs.size() < 4) {
    s.velocity_valid = false;
    s.reason = "insufficient satellites";
    return s;
  }
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd g(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    const Vec3 d = p.sat->position_ecef_m - position.position_ecef_m;
    const Vec3 u = d / d.norm();
    const double rate = -kSpeedOfLight * p.obs->doppler_hz / band_info(p.obs->band).carrier_hz;
    g.row(i) << -u.transpose(), 1.0;
    y(i) = rate - u.dot(p.sat->velocity_ecef_mps);
  }
  if (degenerate(g, PvtConfig{}.min_singular_ratio)) {
    s.velocity_valid = false;
    s.reason = "degenerate geometry";
    return s;
  }
  const Eigen::Vector4d v = g.colPivHouseholderQr().solve(y);
  s.velocity_ecef_mps = v.head<3>();
  s.clock_drift = v(3) / kSpeedOfLight;
  s.velocity_valid = true;
  return s;
}

}  // namespace spamlab::pvt
