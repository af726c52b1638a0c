#include "camho/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "camho/error.hpp"

namespace camho {

void LinkBudget::validate() const {
  if (!(bandwidth_hz > 0.0) || !std::isfinite(bandwidth_hz))
    throw InvalidArgument("link budget: bandwidth_hz must be finite and > 0, got " +
                          std::to_string(bandwidth_hz));
  if (!std::isfinite(noise_psd_dbm_hz))
    throw InvalidArgument("link budget: noise_psd_dbm_hz must be finite");
}

double LinkBudget::noise_mw() const {
  return dbm_to_mw(PowerDbm{noise_psd_dbm_hz}) * bandwidth_hz;
}

double dbm_to_mw(PowerDbm p) {
  if (std::isnan(p.value)) throw InvalidArgument("dbm_to_mw: NaN power");
  if (p.value == std::numeric_limits<double>::infinity())
    throw InvalidArgument("dbm_to_mw: +inf power");
  if (p.value == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::pow(10.0, p.value / 10.0);
}

PowerDbm mw_to_dbm(double mw) {
  if (std::isnan(mw) || mw < 0.0) throw InvalidArgument("mw_to_dbm: power must be >= 0");
  if (mw == 0.0) return PowerDbm{};
  return PowerDbm{10.0 * std::log10(mw)};
}

double capacity_bps(PowerDbm p_rx, const LinkBudget& budget) {
  budget.validate();
  const double snr = dbm_to_mw(p_rx) / budget.noise_mw();
  return budget.bandwidth_hz * (std::log1p(snr) / std::numbers::ln2);
}

}  // namespace camho
