#pragma once

// Exact first-arrival sampling for the ramp rate s -> slope * (c + s)_+.
// The integrated hazard has a closed form, so no discretization enters:
//   Lambda(t) = (slope/2) * [((c + t)_+)^2 - ((c)_+)^2].

#include <cmath>
#include <stdexcept>

namespace liftlab {

inline double ramp_hazard(double c, double slope, double t) {
  double a = std::max(c + t, 0.0);
  double b = std::max(c, 0.0);
  return 0.5 * slope * (a * a - b * b);
}

// Smallest t with Lambda(t) = e, for exponential budget e >= 0.
inline double ramp_first_arrival(double c, double slope, double e) {
  if (slope <= 0.0) throw std::domain_error("ramp_first_arrival: slope must be positive");
  if (e < 0.0) throw std::domain_error("ramp_first_arrival: negative budget");
  double q = 2.0 * e / slope;
  if (c > 0.0) {
    // Equivalent to -c + sqrt(c^2 + q), written to avoid cancellation.
    return q / (c + std::sqrt(c * c + q));
  }
  return -c + std::sqrt(q);
}

}  // namespace liftlab
