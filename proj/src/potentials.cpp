#include "openpimd/potentials.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace openpimd {

namespace {

double quartic(double q, double v0, double a) {
  const double s = (q / a) * (q / a) - 1.0;
  return v0 * s * s;
}

double quartic_slope(double q, double v0, double a) {
  const double s = (q / a) * (q / a) - 1.0;
  return 4.0 * v0 * s * q / (a * a);
}

}  // namespace

double DoubleWellProfile::value(double q) const {
  if (q > x_hi) return quartic(x_hi, v0, a) + quartic_slope(x_hi, v0, a) * (q - x_hi);
  if (q < x_lo) return quartic(x_lo, v0, a) + quartic_slope(x_lo, v0, a) * (q - x_lo);
  return quartic(q, v0, a);
}

double DoubleWellProfile::slope(double q) const {
  if (q > x_hi) return quartic_slope(x_hi, v0, a);
  if (q < x_lo) return quartic_slope(x_lo, v0, a);
  return quartic_slope(q, v0, a);
}

void PotentialModel::gradient(std::span<const double> positions,
                              std::span<double> grad) const {
  check_dimension(positions);
  if (static_cast<int>(grad.size()) != dimension())
    throw std::invalid_argument("gradient buffer size mismatch");
  for (auto& g : grad) g = 0.0;
  add_gradient(positions, grad, 1.0);
}

void PotentialModel::check_dimension(std::span<const double> positions) const {
  if (static_cast<int>(positions.size()) != dimension()) {
    std::ostringstream msg;
    msg << "position vector has " << positions.size() << " entries, model needs "
        << dimension();
    throw std::invalid_argument(msg.str());
  }
}

std::vector<double> DoubleWell1D::coordinate_masses() const {
  return {mass_, mass_, mass_};
}

double DoubleWell1D::energy(std::span<const double> r) const {
  check_dimension(r);
  return profile_.value(r[0]) + 0.5 * k_perp_ * (r[1] * r[1] + r[2] * r[2]);
}

void DoubleWell1D::add_gradient(std::span<const double> r, std::span<double> g,
                                double scale) const {
  check_dimension(r);
  g[0] += scale * profile_.slope(r[0]);
  g[1] += scale * k_perp_ * r[1];
  g[2] += scale * k_perp_ * r[2];
}

std::vector<double> DoubleWell1D::reference_positions() const {
  return {profile_.a, 0.0, 0.0};
}

std::string DoubleWell1D::describe() const {
  std::ostringstream s;
  s << "double-well v0=" << profile_.v0 << " a=" << profile_.a
    << " ext=[" << profile_.x_lo << "," << profile_.x_hi << "]"
    << " m=" << mass_ << " k_perp=" << k_perp_;
  return s.str();
}

double FreeParticle::energy(std::span<const double> r) const {
  check_dimension(r);
  return 0.0;
}

std::string FreeParticle::describe() const {
  std::ostringstream s;
  s << "free m=" << mass_;
  return s.str();
}

double Harmonic1D::energy(std::span<const double> r) const {
  check_dimension(r);
  const double k = mass_ * omega_ * omega_;
  return 0.5 * k * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
}

void Harmonic1D::add_gradient(std::span<const double> r, std::span<double> g,
                              double scale) const {
  check_dimension(r);
  const double k = mass_ * omega_ * omega_;
  for (int i = 0; i < 3; ++i) g[i] += scale * k * r[i];
}

std::string Harmonic1D::describe() const {
  std::ostringstream s;
  s << "harmonic m=" << mass_ << " omega=" << omega_;
  return s.str();
}

TriatomicBathModel::TriatomicBathModel(Params params) : params_(std::move(params)) {
  if (params_.d_bc <= 0.0) throw std::invalid_argument("d_bc must be positive");
}

std::vector<BathOscillator> TriatomicBathModel::default_bath(double kappa,
                                                             double well_a) {
  // Couplings are set so that each oscillator's equilibrium displacement when
  // the particle sits in a well, c*a/(m w^2), equals kappa ground-state widths
  // 1/sqrt(m w).  kappa ~ 1.5 gives a clearly entangled reduced density
  // matrix at beta = 5000 while leaving tunneling alive.
  std::vector<BathOscillator> bath;
  const double mass = 1836.0;
  for (double omega : {1e-3, 2e-3, 4e-3, 8e-3}) {
    BathOscillator osc;
    osc.mass = mass;
    osc.omega = omega;
    osc.coupling = kappa * std::sqrt(mass * omega) * omega / well_a;
    bath.push_back(osc);
  }
  return bath;
}

TriatomicBathModel::Params TriatomicBathModel::default_params() {
  Params p;
  p.bath = default_bath(1.5, p.well.a);
  return p;
}

std::vector<double> TriatomicBathModel::coordinate_masses() const {
  std::vector<double> m;
  m.reserve(dimension());
  for (double am : {params_.m_a, params_.m_b, params_.m_c})
    for (int k = 0; k < 3; ++k) m.push_back(am);
  for (const auto& osc : params_.bath) m.push_back(osc.mass);
  return m;
}

double TriatomicBathModel::energy(std::span<const double> r) const {
  check_dimension(r);
  const std::array<double, 3> ra{r[0], r[1], r[2]};
  const std::array<double, 3> rb{r[3], r[4], r[5]};
  const std::array<double, 3> rc{r[6], r[7], r[8]};

  std::array<double, 3> u{rb[0] - rc[0], rb[1] - rc[1], rb[2] - rc[2]};
  const double d = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (d <= 0.0) throw std::domain_error("coincident anchor atoms");
  const std::array<double, 3> e{u[0] / d, u[1] / d, u[2] / d};
  std::array<double, 3> w;
  for (int k = 0; k < 3; ++k) w[k] = ra[k] - 0.5 * (rb[k] + rc[k]);
  const double q = w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
  double t2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double t = w[k] - q * e[k];
    t2 += t * t;
  }

  double v = params_.well.value(q) + 0.5 * params_.k_perp * t2;
  const double ux = u[0] - params_.d_bc;
  v += 0.5 * params_.k_anchor * (ux * ux + u[1] * u[1] + u[2] * u[2]);
  for (std::size_t j = 0; j < params_.bath.size(); ++j) {
    const auto& osc = params_.bath[j];
    const double gj = osc.coupling / (osc.mass * osc.omega * osc.omega);
    const double dq = r[9 + j] - gj * q;
    v += 0.5 * osc.mass * osc.omega * osc.omega * dq * dq;
  }
  return v;
}

void TriatomicBathModel::add_gradient(std::span<const double> r,
                                      std::span<double> g, double scale) const {
  check_dimension(r);
  const std::array<double, 3> ra{r[0], r[1], r[2]};
  const std::array<double, 3> rb{r[3], r[4], r[5]};
  const std::array<double, 3> rc{r[6], r[7], r[8]};

  std::array<double, 3> u{rb[0] - rc[0], rb[1] - rc[1], rb[2] - rc[2]};
  const double d = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  if (d <= 0.0) throw std::domain_error("coincident anchor atoms");
  const std::array<double, 3> e{u[0] / d, u[1] / d, u[2] / d};
  std::array<double, 3> w;
  for (int k = 0; k < 3; ++k) w[k] = ra[k] - 0.5 * (rb[k] + rc[k]);
  const double q = w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
  std::array<double, 3> t;
  for (int k = 0; k < 3; ++k) t[k] = w[k] - q * e[k];

  // dV/dq collects the well and the bath back-action.
  double dv_dq = params_.well.slope(q);
  for (std::size_t j = 0; j < params_.bath.size(); ++j) {
    const auto& osc = params_.bath[j];
    const double gj = osc.coupling / (osc.mass * osc.omega * osc.omega);
    const double dq = r[9 + j] - gj * q;
    const double f = osc.mass * osc.omega * osc.omega * dq;
    g[9 + j] += scale * f;
    dv_dq -= f * gj;  // = -c_j (q_j - g_j q)
  }

  // J v = ((I - e e^T)/d) v, the Jacobian of e with respect to r_B.
  const auto jac_apply = [&](const std::array<double, 3>& v) {
    const double ve = v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
    return std::array<double, 3>{(v[0] - ve * e[0]) / d, (v[1] - ve * e[1]) / d,
                                 (v[2] - ve * e[2]) / d};
  };
  const auto jw = jac_apply(w);
  const auto jt = jac_apply(t);

  // q = w.e:  dq/drA = e; dq/drB = -e/2 + J w; dq/drC = -e/2 - J w.
  // |t|^2/2:  d/drA = t; d/drB = -t/2 - q J t; d/drC = -t/2 + q J t
  // (t.e = 0 kills the dq path).
  const double kp = params_.k_perp;
  for (int k = 0; k < 3; ++k) {
    g[k] += scale * (dv_dq * e[k] + kp * t[k]);
    g[3 + k] += scale * (dv_dq * (-0.5 * e[k] + jw[k]) +
                         kp * (-0.5 * t[k] - q * jt[k]));
    g[6 + k] += scale * (dv_dq * (-0.5 * e[k] - jw[k]) +
                         kp * (-0.5 * t[k] + q * jt[k]));
  }

  const std::array<double, 3> anchor{params_.k_anchor * (u[0] - params_.d_bc),
                                     params_.k_anchor * u[1],
                                     params_.k_anchor * u[2]};
  for (int k = 0; k < 3; ++k) {
    g[3 + k] += scale * anchor[k];
    g[6 + k] -= scale * anchor[k];
  }
}

std::vector<double> TriatomicBathModel::reference_positions() const {
  std::vector<double> r(dimension(), 0.0);
  r[0] = params_.well.a;           // A in the right-hand well
  r[3] = 0.5 * params_.d_bc;       // B
  r[6] = -0.5 * params_.d_bc;      // C
  for (std::size_t j = 0; j < params_.bath.size(); ++j) {
    const auto& osc = params_.bath[j];
    r[9 + j] = osc.coupling / (osc.mass * osc.omega * osc.omega) * params_.well.a;
  }
  return r;
}

std::string TriatomicBathModel::describe() const {
  std::ostringstream s;
  s << "triatomic-bath mA=" << params_.m_a << " mB=" << params_.m_b
    << " mC=" << params_.m_c << " dBC=" << params_.d_bc
    << " k_anchor=" << params_.k_anchor << " k_perp=" << params_.k_perp
    << " well(v0=" << params_.well.v0 << ",a=" << params_.well.a << ")";
  for (const auto& osc : params_.bath)
    s << " bath(m=" << osc.mass << ",w=" << osc.omega << ",c=" << osc.coupling
      << ")";
  return s.str();
}

std::pair<std::vector<double>, std::vector<double>> symmetrize_profile(
    const std::vector<double>& q, const std::vector<double>& v) {
  if (q.size() != v.size() || q.empty())
    throw std::invalid_argument("profile table shape mismatch");
  const std::size_t n = q.size();
  const double tol = 1e-9 * (1.0 + std::abs(q.back()));
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(q[i] + q[n - 1 - i]) > tol)
      throw std::invalid_argument("profile grid is not symmetric about 0");
  }
  std::vector<double> sym(n);
  for (std::size_t i = 0; i < n; ++i) sym[i] = 0.5 * (v[i] + v[n - 1 - i]);
  return {q, sym};
}

}  // namespace openpimd
