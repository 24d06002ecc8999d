#include "drivesim/score/config.hpp"

#include "drivesim/common/error.hpp"

namespace drivesim::score {

void ScoreConfig::validate() const {
  if (w_ep < 0 || w_ttc < 0 || w_c < 0 || !(w_ep + w_ttc + w_c > 0))
    throw ValidationError("score weights must be non-negative with a positive sum");
  if (!(ttc_threshold > 0 && ttc_horizon > 0)) throw ValidationError("TTC threshold and horizon must be positive");
  const auto& c = comfort;
  if (!(c.a_lon_min < 0 && c.a_lon_max > 0 && c.a_lat_max > 0 && c.jerk_max > 0 && c.yaw_rate_max > 0 &&
        c.yaw_acc_max > 0))
    throw ValidationError("comfort bounds must be positive (a_lon_min negative)");
}

}  // namespace drivesim::score
