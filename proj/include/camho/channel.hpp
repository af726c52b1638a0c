#pragma once

#include <limits>

namespace camho {

/// Received power in dBm. -inf encodes "no signal".
struct PowerDbm {
  double value = -std::numeric_limits<double>::infinity();
};

struct LinkBudget {
  double bandwidth_hz = 0.0;
  double noise_psd_dbm_hz = -173.0;

  void validate() const;
  /// Noise power sigma^2 * W in milliwatts.
  double noise_mw() const;
};

/// 10^(p/10); -inf maps to exactly 0. Throws InvalidArgument on NaN.
double dbm_to_mw(PowerDbm p);
/// Inverse of dbm_to_mw; 0 mW maps to -inf.
PowerDbm mw_to_dbm(double mw);

/// Shannon capacity W*log2(1 + P/(sigma^2 W)) in bits per second.
double capacity_bps(PowerDbm p_rx, const LinkBudget& budget);

}  // namespace camho
