#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "openpimd/path.hpp"

namespace openpimd {

// T_k(t) and T_k'(t) by the three-term recurrence; t is clamped to [-1, 1]
// within 1e-12 slack.
std::pair<double, double> chebyshev_eval(int order, double t);

// Basis expansion of the bias potential: even Chebyshev polynomials
// T_2..T_24 on one collective variable, or the full product basis
// T_i(r) T_j(r') with i,j = 0..10 on two.  The domain box maps affinely onto
// [-1,1] per coordinate; evaluation clamps to the box edge.
class BasisSet {
 public:
  enum class Kind { EvenChebyshev1d, ProductChebyshev2d };

  static BasisSet even_chebyshev_1d(double lo, double hi);
  static BasisSet product_chebyshev_2d(double lo, double hi);

  Kind kind() const { return kind_; }
  int count() const;          // 12 or 121
  int dimensions() const { return kind_ == Kind::EvenChebyshev1d ? 1 : 2; }
  double lo(int dim) const { return lo_[dim]; }
  double hi(int dim) const { return hi_[dim]; }

  void evaluate(std::span<const double> s, std::span<double> values) const;
  // gradients[k*dim + d] = dG_k/ds_d (chain rule through the affine map).
  void evaluate_with_gradient(std::span<const double> s,
                              std::span<double> values,
                              std::span<double> gradients) const;

  // E_{p_t}[G_k] under the uniform target, 64-point Gauss-Legendre per
  // dimension (exact for these polynomial degrees).
  std::vector<double> target_expectations() const;

 private:
  Kind kind_ = Kind::EvenChebyshev1d;
  double lo_[2] = {-1.0, -1.0};
  double hi_[2] = {1.0, 1.0};
};

// Coefficients of the bias, their running average, and the optimizer state.
// The bias applied during sampling is evaluated at the running average.
struct BiasState {
  BasisSet basis;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  long iteration = 0;
  double step_size = 1e-4;  // mu

  explicit BiasState(BasisSet b, double mu = 1e-4);
  BiasState() : BiasState(BasisSet::even_chebyshev_1d(-3.0, 3.0)) {}

  double value(std::span<const double> s) const;
  void value_and_gradient(std::span<const double> s, double& vb,
                          std::span<double> dvb_ds) const;

  void save(std::ostream& out) const;
  static BiasState load(std::istream& in);
};

// Streaming moments of the basis functions over one sampling interval.
// Merging is associative; walkers accumulate independently and merge at the
// variational barrier.
struct OmegaAccumulator {
  long samples = 0;
  Eigen::VectorXd sum_g;
  Eigen::MatrixXd sum_gg;

  explicit OmegaAccumulator(int basis_count);
  void add(std::span<const double> basis_values);
  void merge(const OmegaAccumulator& other);
  void reset();
};

// g_k = -<G_k>_samples + E_{p_t}[G_k]
std::vector<double> omega_gradient(const OmegaAccumulator& acc,
                                   const std::vector<double>& target_expect);

// H_{kk'} = beta (<G_k G_k'> - <G_k><G_k'>); flagged zero matrix when all
// samples coincide.
Eigen::MatrixXd omega_hessian(const OmegaAccumulator& acc, double beta,
                              bool* degenerate = nullptr);

// Averaged stochastic descent: alpha -= mu (g + H (alpha - alpha_bar));
// alpha_bar is the running mean of the iterates.
void update_coefficients(BiasState& bias, std::span<const double> gradient,
                         const Eigen::MatrixXd& hessian);

// F(s) = -V_{b,alpha_bar}(s) - (1/beta) log p_t(s) with min F = 0; uniform
// target makes the log term constant.  1D only.
std::vector<double> recover_free_energy(const BiasState& bias, double beta,
                                        std::span<const double> grid);

// Same inversion for explicit coefficients (bootstrap resamples).
std::vector<double> free_energy_from_coefficients(
    const BasisSet& basis, std::span<const double> coeffs,
    std::span<const double> grid);

// Bias on the open displacement x.
class Ves1dBias final : public CollectiveBias {
 public:
  explicit Ves1dBias(const BiasState* state) : state_(state) {}
  double energy(const SystemSpec& spec, const PathState& state,
                const BcGeometry& geom) const override;
  double add_forces(const SystemSpec& spec, const PathState& state,
                    const BcGeometry& geom, std::span<double> bead_forces,
                    double& force_x) const override;

 private:
  const BiasState* state_;
};

struct VesIterationRecord {
  long iteration = 0;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  double gradient_norm = 0.0;
  long samples = 0;
};

}  // namespace openpimd
