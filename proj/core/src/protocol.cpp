#include "bcsr/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "bcsr/errors.hpp"

namespace bcsr {

StimulationProtocol::StimulationProtocol(int electrode_count, std::vector<Injection> injections,
                                         std::vector<Measurement> measurements)
    : electrodes_(electrode_count), injections_(std::move(injections)), measurements_(std::move(measurements)) {
  if (electrodes_ < 2) throw InputError("protocol needs at least 2 electrodes");
  auto in_range = [&](int q) { return q >= 0 && q < electrodes_; };
  for (std::size_t i = 0; i < injections_.size(); ++i) {
    const auto& inj = injections_[i];
    if (!in_range(inj.source) || !in_range(inj.sink) || inj.source == inj.sink) {
      throw InputError("injection " + std::to_string(i) + ": invalid source/sink electrodes");
    }
    if (!std::isfinite(inj.amplitude) || inj.amplitude == 0.0) {
      throw InputError("injection " + std::to_string(i) + ": amplitude must be finite and non-zero");
    }
  }
  std::set<std::tuple<int, int, int>> seen;
  int last_injection = 0;
  for (std::size_t m = 0; m < measurements_.size(); ++m) {
    const auto& meas = measurements_[m];
    if (meas.injection < 0 || meas.injection >= static_cast<int>(injections_.size())) {
      throw InputError("measurement " + std::to_string(m) + ": injection index out of range");
    }
    if (!in_range(meas.positive) || !in_range(meas.negative) || meas.positive == meas.negative) {
      throw InputError("measurement " + std::to_string(m) + ": invalid electrode pair");
    }
    if (meas.injection < last_injection) {
      throw InputError("measurements must be ordered injection-major");
    }
    last_injection = meas.injection;
    if (!seen.emplace(meas.injection, meas.positive, meas.negative).second) {
      throw InputError("measurement " + std::to_string(m) + " duplicates an earlier entry");
    }
  }
}

Eigen::VectorXd StimulationProtocol::current_pattern(Index i) const {
  const auto& inj = injections_.at(static_cast<std::size_t>(i));
  Eigen::VectorXd I = Eigen::VectorXd::Zero(electrodes_);
  I(inj.source) = inj.amplitude;
  I(inj.sink) = -inj.amplitude;
  return I;
}

std::string StimulationProtocol::serialize() const {
  nlohmann::json j;
  j["electrodes"] = electrodes_;
  auto& inj = j["injections"] = nlohmann::json::array();
  for (const auto& x : injections_) inj.push_back({x.source + 1, x.sink + 1, x.amplitude});
  auto& meas = j["measurements"] = nlohmann::json::array();
  for (const auto& x : measurements_) meas.push_back({x.injection, x.positive + 1, x.negative + 1});
  return j.dump();
}

bool reciprocal(const StimulationProtocol& protocol, const Measurement& x, const Measurement& y) {
  const auto& a = protocol.injections()[static_cast<std::size_t>(x.injection)];
  const auto& b = protocol.injections()[static_cast<std::size_t>(y.injection)];
  return a.source == y.positive && a.sink == y.negative && b.source == x.positive && b.sink == x.negative;
}

StimulationProtocol adjacent_protocol(int L, bool skip_driven, bool drop_reciprocal, double amplitude) {
  if (L < 4) throw InputError("adjacent protocol needs L >= 4, got " + std::to_string(L));
  std::vector<Injection> injections;
  for (int q = 0; q < L; ++q) injections.push_back({q, (q + 1) % L, amplitude});

  std::vector<Measurement> measurements;
  for (int q = 0; q < L; ++q) {
    const int a = q;
    const int b = (q + 1) % L;
    for (int p = 0; p < L; ++p) {
      const int c = p;
      const int d = (p + 1) % L;
      if (skip_driven && (c == a || c == b || d == a || d == b)) continue;
      // The reciprocal image (drive c->d, measure a,b) is injection p and passes the
      // skip_driven filter exactly when this entry does; keep the smaller one.
      if (drop_reciprocal && p < q) continue;
      measurements.push_back({q, c, d});
    }
  }
  return StimulationProtocol(L, std::move(injections), std::move(measurements));
}

StimulationProtocol tank_protocol(const std::vector<int>& terminals, int L, double amplitude) {
  if (terminals.empty()) throw InputError("tank protocol needs a non-empty terminal set");
  if (L < 2) throw InputError("tank protocol needs L >= 2");
  std::vector<int> term;
  for (int t : terminals) {
    if (t < 1 || t > L) throw InputError("terminal " + std::to_string(t) + " outside 1.." + std::to_string(L));
    term.push_back(t - 1);
  }
  std::sort(term.begin(), term.end());
  term.erase(std::unique(term.begin(), term.end()), term.end());
  const std::set<int> term_set(term.begin(), term.end());

  std::vector<Injection> injections;
  for (int a : term) {
    for (int b = 0; b < L; ++b) {
      if (b == a) continue;
      if (term_set.count(b) && b < a) continue;  // pair already emitted with b as terminal
      injections.push_back({a, b, amplitude});
    }
  }
  std::vector<Measurement> measurements;
  for (int i = 0; i < static_cast<int>(injections.size()); ++i) {
    for (int p = 0; p < L; ++p) measurements.push_back({i, p, (p + 1) % L});
  }
  return StimulationProtocol(L, std::move(injections), std::move(measurements));
}

Eigen::VectorXd measurement_operator(const StimulationProtocol& protocol,
                                     const std::vector<Eigen::VectorXd>& electrode_voltages) {
  if (static_cast<Index>(electrode_voltages.size()) != protocol.num_injections()) {
    throw InputError("expected one electrode-voltage vector per injection");
  }
  for (const auto& U : electrode_voltages) {
    if (U.size() != protocol.electrode_count()) throw InputError("electrode-voltage vector has wrong length");
  }
  Eigen::VectorXd V(protocol.num_measurements());
  for (Index m = 0; m < V.size(); ++m) {
    const auto& meas = protocol.measurements()[static_cast<std::size_t>(m)];
    const auto& U = electrode_voltages[static_cast<std::size_t>(meas.injection)];
    V(m) = U(meas.positive) - U(meas.negative);
  }
  return V;
}

}  // namespace bcsr
