#pragma once

#include <Eigen/Dense>
#include <vector>

namespace openpimd {

// Orthonormal real Fourier basis of an l-bead free ring polymer.  Mode k has
// frequency omega_k = 2 omega_l sin(pi k / l); the index pairing puts the
// cosine mode at k and the matching sine mode at l-k, so the frequency array
// is symmetric and the k = 0 centroid is free.
class RingNormalModes {
 public:
  RingNormalModes(int beads, double omega_l);

  int beads() const { return l_; }
  const std::vector<double>& frequencies() const { return omega_; }

  // Columns of `bead_view` are coordinates, rows are beads (contiguous
  // coordinate-major storage maps directly).
  void to_modes(const Eigen::Ref<const Eigen::MatrixXd>& beads,
                Eigen::Ref<Eigen::MatrixXd> modes) const;
  void to_beads(const Eigen::Ref<const Eigen::MatrixXd>& modes,
                Eigen::Ref<Eigen::MatrixXd> beads) const;

  const Eigen::MatrixXd& matrix() const { return transform_; }

 private:
  int l_;
  Eigen::MatrixXd transform_;  // u = transform_ * q
  std::vector<double> omega_;
};

}  // namespace openpimd
