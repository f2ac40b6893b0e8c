#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "openpimd/potentials.hpp"
#include "openpimd/rng.hpp"

namespace openpimd::testutil {

// Central finite differences of the model energy, the independent oracle for
// every analytic gradient in the suite.
inline std::vector<double> fd_gradient(const PotentialModel& model,
                                       std::vector<double> pos,
                                       double step = 1e-5) {
  std::vector<double> grad(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double saved = pos[i];
    pos[i] = saved + step;
    const double plus = model.energy(pos);
    pos[i] = saved - step;
    const double minus = model.energy(pos);
    pos[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

inline double max_rel_error(std::span<const double> got,
                            std::span<const double> want) {
  double scale = 1e-12;
  for (double w : want) scale = std::max(scale, std::abs(w));
  double err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i)
    err = std::max(err, std::abs(got[i] - want[i]) / scale);
  return err;
}

}  // namespace openpimd::testutil
