#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace openpimd {

// Symmetric quartic double well, continued linearly (matched value and slope)
// outside [x_lo, x_hi].  All quantities in atomic units.
struct DoubleWellProfile {
  double v0 = 0.006;   // barrier height, hartree
  double a = 0.6;      // minima at +-a, bohr
  double x_lo = -2.0;  // linear extension boundaries, bohr
  double x_hi = 2.0;

  double value(double q) const;
  double slope(double q) const;
};

// Many-body potential behind a uniform energy/gradient interface.  A model is
// a set of 3D atoms followed by internal scalar coordinates; positions are
// packed [x0,y0,z0, x1,y1,z1, ..., s0, s1, ...].  Evaluation is pure and
// reentrant.
class PotentialModel {
 public:
  virtual ~PotentialModel() = default;

  virtual int atom_count() const = 0;
  virtual int internal_count() const { return 0; }
  int dimension() const { return 3 * atom_count() + internal_count(); }

  // Per-coordinate masses, size dimension() (atom mass repeated for x,y,z).
  virtual std::vector<double> coordinate_masses() const = 0;

  virtual double energy(std::span<const double> positions) const = 0;

  // grad += scale * dV/dr.  Accumulating form so weighted bead sums avoid
  // temporaries.
  virtual void add_gradient(std::span<const double> positions,
                            std::span<double> grad, double scale) const = 0;

  void gradient(std::span<const double> positions,
                std::span<double> grad) const;

  virtual std::vector<double> reference_positions() const = 0;

  // Canonical parameter string, used for the run manifest model hash.
  virtual std::string describe() const = 0;

  void check_dimension(std::span<const double> positions) const;
};

// A single particle in 3D: the double well acts on the x component, a
// harmonic term of stiffness k_perp confines y and z.  The transverse action
// separates exactly, so the distribution of the opening along the x axis is
// identical to the strictly one-dimensional problem.
class DoubleWell1D final : public PotentialModel {
 public:
  DoubleWell1D() = default;
  DoubleWell1D(DoubleWellProfile profile, double mass, double k_perp = 0.05)
      : profile_(profile), mass_(mass), k_perp_(k_perp) {}

  int atom_count() const override { return 1; }
  std::vector<double> coordinate_masses() const override;
  double energy(std::span<const double> positions) const override;
  void add_gradient(std::span<const double> positions, std::span<double> grad,
                    double scale) const override;
  std::vector<double> reference_positions() const override;
  std::string describe() const override;

  const DoubleWellProfile& profile() const { return profile_; }
  double mass() const { return mass_; }

 private:
  DoubleWellProfile profile_{};
  double mass_ = 1836.0;
  double k_perp_ = 0.05;
};

// Free particle (V = 0), the exactly solvable limit of the open-path
// Hamiltonian.
class FreeParticle final : public PotentialModel {
 public:
  explicit FreeParticle(double mass = 1836.0) : mass_(mass) {}
  int atom_count() const override { return 1; }
  std::vector<double> coordinate_masses() const override {
    return {mass_, mass_, mass_};
  }
  double energy(std::span<const double> positions) const override;
  void add_gradient(std::span<const double>, std::span<double>,
                    double) const override {}
  std::vector<double> reference_positions() const override {
    return {0.0, 0.0, 0.0};
  }
  std::string describe() const override;
  double mass() const { return mass_; }

 private:
  double mass_ = 1836.0;
};

// Isotropic harmonic well, the standard momentum-variance benchmark.
class Harmonic1D final : public PotentialModel {
 public:
  Harmonic1D(double mass, double omega) : mass_(mass), omega_(omega) {}
  int atom_count() const override { return 1; }
  std::vector<double> coordinate_masses() const override {
    return {mass_, mass_, mass_};
  }
  double energy(std::span<const double> positions) const override;
  void add_gradient(std::span<const double> positions, std::span<double> grad,
                    double scale) const override;
  std::vector<double> reference_positions() const override {
    return {0.0, 0.0, 0.0};
  }
  std::string describe() const override;
  double mass() const { return mass_; }
  double omega() const { return omega_; }

 private:
  double mass_ = 1.0;
  double omega_ = 1.0;
};

struct BathOscillator {
  double mass = 1836.0;
  double omega = 0.004;     // 1/time
  double coupling = 0.0;    // c_j, couples bilinearly to the tunneling coordinate
};

// Tagged atom A tunneling along the B-C axis, plus a Caldeira-Leggett bath of
// internal oscillators.  Atoms are ordered A, B, C.  The potential depends
// only on relative coordinates, so it is invariant under rigid translations:
//   q  = (r_A - (r_B + r_C)/2) . e,  e = (r_B - r_C)/|r_B - r_C|
//   V  = well(q) + k_perp/2 |t|^2                    (t = transverse part of A)
//      + k_anchor/2 |(r_B - r_C) - d_BC x^|^2        (pins the B-C frame)
//      + sum_j m_j w_j^2/2 (q_j - c_j q / (m_j w_j^2))^2
class TriatomicBathModel final : public PotentialModel {
 public:
  struct Params {
    double m_a = 1836.0;
    double m_b = 29376.0;  // oxygen-like anchors
    double m_c = 29376.0;
    double d_bc = 4.87;
    double k_anchor = 0.5;
    double k_perp = 0.05;
    DoubleWellProfile well{};
    std::vector<BathOscillator> bath;
  };

  // Default bath: 4 oscillators, omega log-spaced 1e-3..8e-3, couplings set
  // by the dimensionless displacement ratio kappa (see default_bath).
  TriatomicBathModel() : TriatomicBathModel(default_params()) {}
  explicit TriatomicBathModel(Params params);

  static Params default_params();
  static std::vector<BathOscillator> default_bath(double kappa,
                                                  double well_a = 0.6);

  int atom_count() const override { return 3; }
  int internal_count() const override {
    return static_cast<int>(params_.bath.size());
  }
  std::vector<double> coordinate_masses() const override;
  double energy(std::span<const double> positions) const override;
  void add_gradient(std::span<const double> positions, std::span<double> grad,
                    double scale) const override;
  std::vector<double> reference_positions() const override;
  std::string describe() const override;

  const Params& params() const { return params_; }

 private:
  Params params_;
};

// V_sym(q) = (V(q) + V(-q))/2 on the common grid.  The grid must be symmetric
// about zero (ascending, tolerance-matched pairs).
std::pair<std::vector<double>, std::vector<double>> symmetrize_profile(
    const std::vector<double>& q, const std::vector<double>& v);

}  // namespace openpimd
