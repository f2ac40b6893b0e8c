#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "openpimd/estimators.hpp"
#include "openpimd/path.hpp"
#include "openpimd/ves.hpp"

namespace openpimd {

// Square (r, r') domain of the reduced density matrix.  Odd bin count keeps a
// cell centered on the origin.
struct RdmGrid {
  double half_extent = 1.8;
  int bins = 73;

  double cell() const { return 2.0 * half_extent / bins; }
  double center(int i) const {
    return -half_extent + (i + 0.5) * cell();
  }
  std::vector<double> centers() const;
  void validate() const;
};

// Projected endpoint coordinates of the tagged atom:
//   r  = r~_A^0 . e + x/2      (bead 0, shifted by y_0 = -1/2)
//   r' = r~_A^0 . e - x/2      (bead l, shifted by y_l = +1/2)
// so r - r' = x always.
std::pair<double, double> order_params(const SystemSpec& spec,
                                       const PathState& state,
                                       const BcGeometry& geom);

// 2D VES bias on (r, r') with soft half-harmonic walls outside the domain
// box (momentum reflection is ill-defined for these composite coordinates).
class Ves2dBias final : public CollectiveBias {
 public:
  Ves2dBias(const BiasState* state, double wall_onset, double wall_stiffness)
      : state_(state), onset_(wall_onset), stiffness_(wall_stiffness) {}

  double energy(const SystemSpec& spec, const PathState& state,
                const BcGeometry& geom) const override;
  double add_forces(const SystemSpec& spec, const PathState& state,
                    const BcGeometry& geom, std::span<double> bead_forces,
                    double& force_x) const override;

 private:
  double wall_energy(double r, double* slope) const;

  const BiasState* state_;
  double onset_ = 1.8;
  double stiffness_ = 1.0;
};

// M_ij = exp(-beta F2(r_i, r'_j)) * cell, symmetrized and scaled to unit
// trace.  The relative asymmetry before symmetrization is a sampling
// diagnostic.
struct DiscretizedRdm {
  Eigen::MatrixXd matrix;
  double asymmetry = 0.0;
  double cell = 0.0;
};

DiscretizedRdm discretize_rho(const RdmGrid& grid,
                              std::span<const double> f2_row_major,
                              double beta);

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // descending
  Eigen::MatrixXd eigenvectors;     // column n: psi_n on the grid
  std::vector<double> grid;         // r centers
  double cell = 1.0;                // measure weight: cell * sum psi^2 = 1
};

// Full spectrum of a symmetric kernel matrix, deterministic ordering and
// sign (largest-magnitude component positive).  Throws if the input is
// asymmetric beyond 1e-10 relative.
SpectralDecomposition symmetric_eigensolve(const Eigen::MatrixXd& matrix,
                                           double cell,
                                           std::span<const double> grid);

// <T_x>_n = integral psi_n(r) psi_n(r + x) dr, linear interpolation off-grid
// and zero extension beyond the domain.
double translation_expectation(std::span<const double> psi,
                               std::span<const double> grid, double cell,
                               double x);

// ntilde(x) = sum_n rho_n <T_x>_n over the retained eigenpairs, renormalized
// to 1 at x = 0.
DistributionResult reconstruct_ntilde(const SpectralDecomposition& spec,
                                      std::span<const double> x_grid);

struct ExtrapolationFit {
  double slope = 0.0;
  double intercept = 0.0;  // lambda at T = 0
  std::vector<double> temperatures;
  std::vector<double> values;
  std::vector<double> residuals;
};

// Ordinary least squares of lambda against T = 1/beta.
ExtrapolationFit extrapolate_to_zero_temperature(
    std::span<const double> betas, std::span<const double> lambdas);

}  // namespace openpimd
