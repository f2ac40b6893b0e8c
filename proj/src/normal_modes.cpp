#include "openpimd/normal_modes.hpp"

#include <cmath>
#include <numbers>

namespace openpimd {

RingNormalModes::RingNormalModes(int beads, double omega_l) : l_(beads) {
  const double pi = std::numbers::pi;
  transform_.resize(l_, l_);
  const double root = std::sqrt(1.0 / l_);
  const double root2 = std::sqrt(2.0 / l_);
  for (int j = 0; j < l_; ++j) transform_(0, j) = root;
  for (int k = 1; k < (l_ + 1) / 2; ++k) {
    for (int j = 0; j < l_; ++j) {
      const double arg = 2.0 * pi * j * k / l_;
      transform_(k, j) = root2 * std::cos(arg);
      transform_(l_ - k, j) = root2 * std::sin(arg);
    }
  }
  if (l_ % 2 == 0) {
    for (int j = 0; j < l_; ++j)
      transform_(l_ / 2, j) = root * (j % 2 == 0 ? 1.0 : -1.0);
  }
  omega_.resize(l_);
  for (int k = 0; k < l_; ++k)
    omega_[k] = 2.0 * omega_l * std::sin(pi * k / l_);
}

void RingNormalModes::to_modes(const Eigen::Ref<const Eigen::MatrixXd>& beads,
                               Eigen::Ref<Eigen::MatrixXd> modes) const {
  modes.noalias() = transform_ * beads;
}

void RingNormalModes::to_beads(const Eigen::Ref<const Eigen::MatrixXd>& modes,
                               Eigen::Ref<Eigen::MatrixXd> beads) const {
  beads.noalias() = transform_.transpose() * modes;
}

}  // namespace openpimd
