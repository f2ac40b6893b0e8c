#include "openpimd/path.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "openpimd/io.hpp"

namespace openpimd {

double SystemSpec::omega_l() const {
  return std::sqrt(static_cast<double>(beads)) / beta;
}

SystemSpec SystemSpec::for_model(const PotentialModel& model, int beads,
                                 double beta) {
  SystemSpec spec;
  spec.n_atoms = model.atom_count();
  spec.n_internal = model.internal_count();
  spec.masses = model.coordinate_masses();
  spec.beads = beads;
  spec.beta = beta;
  if (spec.n_atoms >= 3) {
    spec.fixed_axis = false;
    spec.tagged_a = 0;
    spec.anchor_b = 1;
    spec.anchor_c = 2;
  } else {
    spec.fixed_axis = true;
    spec.axis = {1.0, 0.0, 0.0};
  }
  spec.validate();
  return spec;
}

void SystemSpec::validate() const {
  if (beads < 2) throw std::invalid_argument("bead count must be >= 2");
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  if (static_cast<int>(masses.size()) != dof())
    throw std::invalid_argument("mass array size mismatch");
  for (double m : masses)
    if (m <= 0.0) throw std::invalid_argument("masses must be positive");
  if (tagged_a < 0 || tagged_a >= n_atoms)
    throw std::invalid_argument("tagged atom out of range");
  if (!fixed_axis) {
    if (anchor_b < 0 || anchor_b >= n_atoms || anchor_c < 0 ||
        anchor_c >= n_atoms)
      throw std::invalid_argument("anchor atom out of range");
    if (anchor_b == anchor_c || anchor_b == tagged_a || anchor_c == tagged_a)
      throw std::invalid_argument("tagged atoms A, B, C must be distinct");
  }
}

PathState PathState::initial(const SystemSpec& spec,
                             const PotentialModel& model) {
  PathState state;
  const int l = spec.beads;
  const int d = spec.dof();
  state.positions.resize(static_cast<std::size_t>(d) * l);
  state.momenta.assign(static_cast<std::size_t>(d) * l, 0.0);
  const auto ref = model.reference_positions();
  for (int c = 0; c < d; ++c)
    for (int i = 0; i < l; ++i) state.positions[c * l + i] = ref[c];
  return state;
}

bool PathState::all_finite() const {
  for (double v : positions)
    if (!std::isfinite(v)) return false;
  for (double v : momenta)
    if (!std::isfinite(v)) return false;
  return std::isfinite(x) && std::isfinite(px);
}

std::array<double, 3> BcGeometry::jacobian_apply(
    const std::array<double, 3>& v) const {
  if (!varying) return {0.0, 0.0, 0.0};
  const double ve = v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
  return {(v[0] - ve * e[0]) / d, (v[1] - ve * e[1]) / d,
          (v[2] - ve * e[2]) / d};
}

BcGeometry bc_geometry(const SystemSpec& spec, const PathState& state) {
  BcGeometry geom;
  if (spec.fixed_axis) {
    geom.e = spec.axis;
    geom.varying = false;
    geom.d = 0.0;
    return geom;
  }
  const int l = spec.beads;
  std::array<double, 3> u;
  for (int k = 0; k < 3; ++k) {
    const double rb = state.pos(3 * spec.anchor_b + k, 0, l);
    const double rc = state.pos(3 * spec.anchor_c + k, 0, l);
    u[k] = rb - rc;
  }
  const double d = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (d <= spec.min_anchor_separation)
    throw CoincidentAnchorError("anchor atoms B and C are coincident");
  geom.e = {u[0] / d, u[1] / d, u[2] / d};
  geom.d = d;
  geom.varying = true;
  return geom;
}

double bead_shift_fraction(int i, int l) {
  return static_cast<double>(i) / l - 0.5;
}

std::array<double, 3> shifted_bead(const SystemSpec& spec,
                                   const PathState& state,
                                   const BcGeometry& geom, int i) {
  const int l = spec.beads;
  if (i < 0 || i > l) throw std::out_of_range("bead index");
  const double y = bead_shift_fraction(i, l);
  const int bead = (i == l) ? 0 : i;
  std::array<double, 3> r;
  for (int k = 0; k < 3; ++k)
    r[k] = state.pos(3 * spec.tagged_a + k, bead, l) - state.x * y * geom.e[k];
  return r;
}

std::array<double, 3> standard_end_to_end(const std::array<double, 3>& r0,
                                          const std::array<double, 3>& rl) {
  return {r0[0] - rl[0], r0[1] - rl[1], r0[2] - rl[2]};
}

namespace {

// Gathers the full coordinate vector of bead `i` with atom A displaced to its
// shifted position for the term with fraction y.
void gather_shifted(const SystemSpec& spec, const PathState& state,
                    const BcGeometry& geom, int bead, double y,
                    std::vector<double>& buf) {
  const int l = spec.beads;
  const int d = spec.dof();
  buf.resize(d);
  for (int c = 0; c < d; ++c) buf[c] = state.pos(c, bead, l);
  for (int k = 0; k < 3; ++k)
    buf[3 * spec.tagged_a + k] -= state.x * y * geom.e[k];
}

struct WeightedTerm {
  int bead;       // bead whose coordinates enter V
  double y;       // shift fraction
  double weight;  // 1/l interior, 1/(2l) for the two bead-0 terms
};

template <typename Fn>
void for_each_potential_term(int l, Fn&& fn) {
  for (int i = 1; i < l; ++i)
    fn(WeightedTerm{i, bead_shift_fraction(i, l), 1.0 / l});
  fn(WeightedTerm{0, bead_shift_fraction(0, l), 0.5 / l});
  fn(WeightedTerm{0, bead_shift_fraction(l, l), 0.5 / l});
}

}  // namespace

EnergyBreakdown hamiltonian_energy(const SystemSpec& spec,
                                   const PathState& state,
                                   const PotentialModel& model,
                                   const CollectiveBias* bias) {
  const int l = spec.beads;
  const int d = spec.dof();
  EnergyBreakdown e;

  const double spring_k = spec.omega_l() * spec.omega_l();
  for (int c = 0; c < d; ++c) {
    const double m = spec.masses[c];
    double acc = 0.0;
    for (int i = 0; i < l; ++i) {
      const double diff =
          state.pos(c, i, l) - state.pos(c, (i + 1) % l, l);
      acc += diff * diff;
    }
    e.spring += 0.5 * m * spring_k * acc;
  }

  const BcGeometry geom = bc_geometry(spec, state);
  std::vector<double> buf;
  for_each_potential_term(l, [&](const WeightedTerm& term) {
    gather_shifted(spec, state, geom, term.bead, term.y, buf);
    e.potential += term.weight * model.energy(buf);
  });

  const double wx = 1.0 / spec.beta;  // omega_x = 1/(beta hbar)
  e.x_quad = 0.5 * spec.mass_a() * wx * wx * state.x * state.x;

  for (int c = 0; c < d; ++c) {
    const double m = spec.masses[c];
    for (int i = 0; i < l; ++i) {
      const double p = state.momenta[c * l + i];
      e.kinetic += 0.5 * p * p / m;
    }
  }
  e.kinetic += 0.5 * state.px * state.px / spec.mass_a();

  if (bias != nullptr) e.bias = bias->energy(spec, state, geom);
  return e;
}

void compute_forces(const SystemSpec& spec, const PathState& state,
                    const PotentialModel& model, const CollectiveBias* bias,
                    HamiltonianParts parts, PathForces& out) {
  const int l = spec.beads;
  const int d = spec.dof();
  out.resize_zero(d * l);

  if (parts.springs) {
    const double spring_k = spec.omega_l() * spec.omega_l();
    for (int c = 0; c < d; ++c) {
      const double mk = spec.masses[c] * spring_k;
      for (int i = 0; i < l; ++i) {
        const double qi = state.pos(c, i, l);
        const double prev = state.pos(c, (i + l - 1) % l, l);
        const double next = state.pos(c, (i + 1) % l, l);
        out.beads[c * l + i] = -mk * (2.0 * qi - prev - next);
      }
    }
  }

  const BcGeometry geom = bc_geometry(spec, state);

  if (parts.potential) {
    std::vector<double> buf, grad(d);
    const int a0 = 3 * spec.tagged_a;
    const int b0 = 3 * spec.anchor_b;
    const int c0 = 3 * spec.anchor_c;
    for_each_potential_term(l, [&](const WeightedTerm& term) {
      gather_shifted(spec, state, geom, term.bead, term.y, buf);
      for (auto& gval : grad) gval = 0.0;
      model.add_gradient(buf, grad, term.weight);

      // Direct dependence on the bead coordinates.
      for (int c = 0; c < d; ++c) out.beads[c * l + term.bead] -= grad[c];

      // The shifted argument r~_A - x y e couples the A gradient to x and,
      // through e, to the bead-0 anchors.
      const std::array<double, 3> ga{grad[a0], grad[a0 + 1], grad[a0 + 2]};
      const double ga_dot_e =
          ga[0] * geom.e[0] + ga[1] * geom.e[1] + ga[2] * geom.e[2];
      out.x += term.y * ga_dot_e;

      if (geom.varying && state.x != 0.0) {
        const auto jga = geom.jacobian_apply(ga);  // (I-ee^T)/d ga
        const double c_xy = state.x * term.y;
        for (int k = 0; k < 3; ++k) {
          out.beads[(b0 + k) * l + 0] += c_xy * jga[k];
          out.beads[(c0 + k) * l + 0] -= c_xy * jga[k];
        }
      }
    });
  }

  if (parts.x_quad) {
    const double wx = 1.0 / spec.beta;
    out.x -= spec.mass_a() * wx * wx * state.x;
  }

  if (parts.bias && bias != nullptr)
    bias->add_forces(spec, state, geom, out.beads, out.x);
}

void save_path_state(std::ostream& out, const PathState& state) {
  write_u64(out, 0x4f50494d50415448ULL);  // "OPIMPATH"
  write_u64(out, 1);                      // version
  write_doubles(out, state.positions);
  write_doubles(out, state.momenta);
  write_doubles(out, {state.x, state.px});
}

PathState load_path_state(std::istream& in) {
  if (read_u64(in) != 0x4f50494d50415448ULL)
    throw ConfigError("not a path-state blob");
  if (read_u64(in) != 1) throw ConfigError("unsupported path-state version");
  PathState state;
  state.positions = read_doubles(in);
  state.momenta = read_doubles(in);
  const auto xs = read_doubles(in);
  state.x = xs.at(0);
  state.px = xs.at(1);
  return state;
}

}  // namespace openpimd
