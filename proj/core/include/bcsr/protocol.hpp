#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bcsr/mesh.hpp"

namespace bcsr {

/// Current drive between two electrodes (0-based): +amplitude into `source`,
/// -amplitude into `sink`, zero elsewhere.
struct Injection {
  int source = 0;
  int sink = 1;
  double amplitude = 1.0;  ///< mA
};

/// Differential voltage U[positive] - U[negative] recorded during `injection`.
struct Measurement {
  int injection = 0;
  int positive = 0;
  int negative = 1;
};

/// Stimulation patterns and measurement selection. Immutable after construction;
/// measurements are stored injection-major, which fixes the ordering of V.
class StimulationProtocol {
 public:
  /// Validates: source != sink, electrodes in range, amplitudes finite and
  /// non-zero, no duplicate (injection, pair) entries.
  StimulationProtocol(int electrode_count, std::vector<Injection> injections,
                      std::vector<Measurement> measurements);

  int electrode_count() const noexcept { return electrodes_; }
  Index num_injections() const noexcept { return static_cast<Index>(injections_.size()); }
  Index num_measurements() const noexcept { return static_cast<Index>(measurements_.size()); }
  const std::vector<Injection>& injections() const noexcept { return injections_; }
  const std::vector<Measurement>& measurements() const noexcept { return measurements_; }

  /// Length-L current vector I_q of injection `i` (sums to zero).
  Eigen::VectorXd current_pattern(Index i) const;

  /// Canonical JSON text (1-based electrodes); byte-identical for equal protocols.
  std::string serialize() const;

 private:
  int electrodes_;
  std::vector<Injection> injections_;
  std::vector<Measurement> measurements_;
};

/// Adjacent drive (q -> q+1 mod L) with adjacent measurements (p, p+1 mod L).
/// `skip_driven` drops the three pairs that touch a driven electrode,
/// `drop_reciprocal` keeps only the lexicographically smaller of every
/// reciprocal couple. L=16 gives M = 256, 208 and 104 respectively.
StimulationProtocol adjacent_protocol(int electrode_count, bool skip_driven, bool drop_reciprocal,
                                      double amplitude = 1.0);

/// Every distinct unordered pair (a, b) with a in `terminals` and b != a,
/// with all L adjacent measurements per injection. `terminals` are 1-based.
StimulationProtocol tank_protocol(const std::vector<int>& terminals, int electrode_count,
                                  double amplitude = 1.0);

/// V[m] = U_{inj(m)}[pos(m)] - U_{inj(m)}[neg(m)].
Eigen::VectorXd measurement_operator(const StimulationProtocol& protocol,
                                     const std::vector<Eigen::VectorXd>& electrode_voltages);

/// True if the two entries are reciprocal images of each other
/// (drive a->b measure c,d) vs (drive c->d measure a,b).
bool reciprocal(const StimulationProtocol& protocol, const Measurement& x, const Measurement& y);

}  // namespace bcsr
