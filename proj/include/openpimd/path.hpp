#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "openpimd/potentials.hpp"

namespace openpimd {

struct CoincidentAnchorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrajectoryDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static description of the transformed open-path system.  Atomic units
// throughout (hbar = 1), beta in 1/hartree.
struct SystemSpec {
  int n_atoms = 1;
  int n_internal = 0;
  std::vector<double> masses;  // per coordinate, size dof()
  int beads = 8;               // l
  double beta = 1000.0;

  int tagged_a = 0;  // atom whose path opens
  // Opening direction: either the unit vector from anchor atom C to B
  // (bead 0), or a fixed axis when the model has no anchors.
  bool fixed_axis = true;
  std::array<double, 3> axis{1.0, 0.0, 0.0};
  int anchor_b = 1;
  int anchor_c = 2;
  double min_anchor_separation = 1e-6;

  int dof() const { return 3 * n_atoms + n_internal; }
  double omega_l() const;
  double mass_a() const { return masses.at(3 * tagged_a); }

  static SystemSpec for_model(const PotentialModel& model, int beads,
                              double beta);
  void validate() const;
};

// All position degrees of freedom of one walker: dof*l bead coordinates, the
// open displacement x, and the conjugate MD momenta.  Coordinate-major
// layout: positions[c*l + i] is bead i of coordinate c.
struct PathState {
  std::vector<double> positions;
  std::vector<double> momenta;
  double x = 0.0;
  double px = 0.0;

  double& pos(int coord, int bead, int l) { return positions[coord * l + bead]; }
  double pos(int coord, int bead, int l) const {
    return positions[coord * l + bead];
  }

  static PathState initial(const SystemSpec& spec, const PotentialModel& model);
  bool all_finite() const;
};

// Unit vector from C to B (bead 0) and the Jacobians of e with respect to the
// anchor bead positions: de/dr_B = (I - e e^T)/d, de/dr_C = -(I - e e^T)/d.
struct BcGeometry {
  std::array<double, 3> e{1.0, 0.0, 0.0};
  double d = 0.0;
  bool varying = false;  // false for a fixed axis: Jacobians vanish

  // ((I - e e^T)/d) v; the C Jacobian is the negative.
  std::array<double, 3> jacobian_apply(const std::array<double, 3>& v) const;
};

BcGeometry bc_geometry(const SystemSpec& spec, const PathState& state);

// y_i = i/l - 1/2 for i = 0..l.
double bead_shift_fraction(int i, int l);

// r~_A^i - x y_i e; for i = l the bead wraps to 0 with y_l = +1/2.
std::array<double, 3> shifted_bead(const SystemSpec& spec,
                                   const PathState& state,
                                   const BcGeometry& geom, int i);

// Conventional open-path estimator x = r_A^0 - r_A^l (reference only).
std::array<double, 3> standard_end_to_end(const std::array<double, 3>& r0,
                                          const std::array<double, 3>& rl);

// Bias acting on collective variables of (state, geometry).  Implementations
// add their force contribution (negative gradient) in-place and return the
// bias energy.
class CollectiveBias {
 public:
  virtual ~CollectiveBias() = default;
  virtual double energy(const SystemSpec& spec, const PathState& state,
                        const BcGeometry& geom) const = 0;
  // forces layout matches PathForces below.
  virtual double add_forces(const SystemSpec& spec, const PathState& state,
                            const BcGeometry& geom,
                            std::span<double> bead_forces,
                            double& force_x) const = 0;
};

struct PathForces {
  std::vector<double> beads;  // dof*l, coordinate-major like PathState
  double x = 0.0;

  void resize_zero(int n) {
    beads.assign(n, 0.0);
    x = 0.0;
  }
};

struct EnergyBreakdown {
  double spring = 0.0;
  double potential = 0.0;  // weighted open-path sum including bias
  double bias = 0.0;
  double x_quad = 0.0;
  double kinetic = 0.0;
  double total() const { return spring + potential + bias + x_quad + kinetic; }
};

struct HamiltonianParts {
  bool springs = true;
  bool potential = true;
  bool x_quad = true;
  bool bias = true;

  static HamiltonianParts all() { return {}; }
  // The MD kick step handles only the terms that are not integrated
  // analytically: the weighted potential and the bias.
  static HamiltonianParts kick() { return {false, true, false, true}; }
};

EnergyBreakdown hamiltonian_energy(const SystemSpec& spec,
                                   const PathState& state,
                                   const PotentialModel& model,
                                   const CollectiveBias* bias = nullptr);

// Negative gradient of the selected position-dependent terms; accumulated
// into `out` (which is zeroed first).
void compute_forces(const SystemSpec& spec, const PathState& state,
                    const PotentialModel& model, const CollectiveBias* bias,
                    HamiltonianParts parts, PathForces& out);

// Versioned binary round-trip of a PathState (exact doubles).
void save_path_state(std::ostream& out, const PathState& state);
PathState load_path_state(std::istream& in);

}  // namespace openpimd
