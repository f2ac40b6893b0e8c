#include "openpimd/ves.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "openpimd/io.hpp"

namespace openpimd {

namespace {

constexpr int k1dOrders[12] = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24};
constexpr int k1dMaxOrder = 24;
constexpr int k2dMaxOrder = 10;  // T_0..T_10 per factor -> 121 products

double clamp_unit(double t) { return std::clamp(t, -1.0, 1.0); }

// Nodes/weights for 64-point Gauss-Legendre on [-1,1], computed once by
// Newton iteration on the Legendre polynomial.
const std::vector<std::pair<double, double>>& gauss_legendre_64() {
  static const std::vector<std::pair<double, double>> table = [] {
    const int n = 64;
    std::vector<std::pair<double, double>> nodes(n);
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        pp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nodes[i] = {x, 2.0 / ((1.0 - x * x) * pp * pp)};
    }
    return nodes;
  }();
  return table;
}

}  // namespace

std::pair<double, double> chebyshev_eval(int order, double t) {
  t = clamp_unit(t);
  if (order == 0) return {1.0, 0.0};
  // T by recurrence, T' = k U_{k-1} with U by its own recurrence.
  double tm1 = 1.0, tk = t;
  double um1 = 1.0, uk = 2.0 * t;  // U_0, U_1
  for (int k = 2; k <= order; ++k) {
    const double tn = 2.0 * t * tk - tm1;
    tm1 = tk;
    tk = tn;
    const double un = 2.0 * t * uk - um1;
    um1 = uk;
    uk = un;
  }
  // after the loop tm1 = T_{order-1}; um1 = U_{order-1}
  return {tk, order * um1};
}

BasisSet BasisSet::even_chebyshev_1d(double lo, double hi) {
  BasisSet b;
  b.kind_ = Kind::EvenChebyshev1d;
  b.lo_[0] = lo;
  b.hi_[0] = hi;
  if (!(hi > lo)) throw std::invalid_argument("bad basis domain");
  return b;
}

BasisSet BasisSet::product_chebyshev_2d(double lo, double hi) {
  BasisSet b;
  b.kind_ = Kind::ProductChebyshev2d;
  for (int d = 0; d < 2; ++d) {
    b.lo_[d] = lo;
    b.hi_[d] = hi;
  }
  if (!(hi > lo)) throw std::invalid_argument("bad basis domain");
  return b;
}

int BasisSet::count() const {
  return kind_ == Kind::EvenChebyshev1d ? 12
                                        : (k2dMaxOrder + 1) * (k2dMaxOrder + 1);
}

void BasisSet::evaluate(std::span<const double> s,
                        std::span<double> values) const {
  if (kind_ == Kind::EvenChebyshev1d) {
    const double t =
        clamp_unit((2.0 * s[0] - lo_[0] - hi_[0]) / (hi_[0] - lo_[0]));
    double tvals[k1dMaxOrder + 1];
    tvals[0] = 1.0;
    tvals[1] = t;
    for (int k = 2; k <= k1dMaxOrder; ++k)
      tvals[k] = 2.0 * t * tvals[k - 1] - tvals[k - 2];
    for (int k = 0; k < 12; ++k) values[k] = tvals[k1dOrders[k]];
    return;
  }
  double tv[2][k2dMaxOrder + 1];
  for (int d = 0; d < 2; ++d) {
    const double t =
        clamp_unit((2.0 * s[d] - lo_[d] - hi_[d]) / (hi_[d] - lo_[d]));
    double tm1 = 1.0, tk = t;
    tv[d][0] = 1.0;
    if (k2dMaxOrder >= 1) tv[d][1] = t;
    for (int k = 2; k <= k2dMaxOrder; ++k) {
      const double tn = 2.0 * t * tk - tm1;
      tm1 = tk;
      tk = tn;
      tv[d][k] = tn;
    }
  }
  int idx = 0;
  for (int i = 0; i <= k2dMaxOrder; ++i)
    for (int j = 0; j <= k2dMaxOrder; ++j) values[idx++] = tv[0][i] * tv[1][j];
}

void BasisSet::evaluate_with_gradient(std::span<const double> s,
                                      std::span<double> values,
                                      std::span<double> gradients) const {
  if (kind_ == Kind::EvenChebyshev1d) {
    const double scale = 2.0 / (hi_[0] - lo_[0]);
    const double t =
        clamp_unit((2.0 * s[0] - lo_[0] - hi_[0]) / (hi_[0] - lo_[0]));
    double tvals[k1dMaxOrder + 1], uvals[k1dMaxOrder + 1];
    tvals[0] = 1.0;
    tvals[1] = t;
    uvals[0] = 1.0;
    uvals[1] = 2.0 * t;
    for (int k = 2; k <= k1dMaxOrder; ++k) {
      tvals[k] = 2.0 * t * tvals[k - 1] - tvals[k - 2];
      uvals[k] = 2.0 * t * uvals[k - 1] - uvals[k - 2];
    }
    for (int k = 0; k < 12; ++k) {
      const int order = k1dOrders[k];
      values[k] = tvals[order];
      gradients[k] = order * uvals[order - 1] * scale;
    }
    return;
  }
  double tv[2][k2dMaxOrder + 1], dv[2][k2dMaxOrder + 1];
  for (int d = 0; d < 2; ++d) {
    const double scale = 2.0 / (hi_[d] - lo_[d]);
    const double t =
        clamp_unit((2.0 * s[d] - lo_[d] - hi_[d]) / (hi_[d] - lo_[d]));
    for (int k = 0; k <= k2dMaxOrder; ++k) {
      const auto [v, g] = chebyshev_eval(k, t);
      tv[d][k] = v;
      dv[d][k] = g * scale;
    }
  }
  int idx = 0;
  for (int i = 0; i <= k2dMaxOrder; ++i)
    for (int j = 0; j <= k2dMaxOrder; ++j) {
      values[idx] = tv[0][i] * tv[1][j];
      gradients[2 * idx] = dv[0][i] * tv[1][j];
      gradients[2 * idx + 1] = tv[0][i] * dv[1][j];
      ++idx;
    }
}

std::vector<double> BasisSet::target_expectations() const {
  const auto& gl = gauss_legendre_64();
  const int n = count();
  std::vector<double> expect(n, 0.0);
  std::vector<double> values(n);
  if (kind_ == Kind::EvenChebyshev1d) {
    for (const auto& [t, w] : gl) {
      const double s = 0.5 * (lo_[0] + hi_[0]) + 0.5 * (hi_[0] - lo_[0]) * t;
      evaluate(std::span(&s, 1), values);
      for (int k = 0; k < n; ++k) expect[k] += 0.5 * w * values[k];
    }
    return expect;
  }
  for (const auto& [t0, w0] : gl) {
    const double s0 = 0.5 * (lo_[0] + hi_[0]) + 0.5 * (hi_[0] - lo_[0]) * t0;
    for (const auto& [t1, w1] : gl) {
      const double s1 = 0.5 * (lo_[1] + hi_[1]) + 0.5 * (hi_[1] - lo_[1]) * t1;
      const double s[2] = {s0, s1};
      evaluate(std::span(s, 2), values);
      for (int k = 0; k < n; ++k) expect[k] += 0.25 * w0 * w1 * values[k];
    }
  }
  return expect;
}

BiasState::BiasState(BasisSet b, double mu)
    : basis(b),
      alpha(b.count(), 0.0),
      alpha_bar(b.count(), 0.0),
      step_size(mu) {}

double BiasState::value(std::span<const double> s) const {
  std::vector<double> g(basis.count());
  basis.evaluate(s, g);
  double v = 0.0;
  for (int k = 0; k < basis.count(); ++k) v += alpha_bar[k] * g[k];
  return v;
}

void BiasState::value_and_gradient(std::span<const double> s, double& vb,
                                   std::span<double> dvb_ds) const {
  const int n = basis.count();
  const int dim = basis.dimensions();
  std::vector<double> g(n), dg(n * dim);
  basis.evaluate_with_gradient(s, g, dg);
  vb = 0.0;
  for (int d = 0; d < dim; ++d) dvb_ds[d] = 0.0;
  for (int k = 0; k < n; ++k) {
    vb += alpha_bar[k] * g[k];
    for (int d = 0; d < dim; ++d) dvb_ds[d] += alpha_bar[k] * dg[k * dim + d];
  }
}

void BiasState::save(std::ostream& out) const {
  write_u64(out, 0x4f50494d42494153ULL);  // "OPIMBIAS"
  write_u64(out, 1);
  write_u64(out, basis.kind() == BasisSet::Kind::EvenChebyshev1d ? 1 : 2);
  write_doubles(out, {basis.lo(0), basis.hi(0), step_size,
                      static_cast<double>(iteration)});
  write_doubles(out, alpha);
  write_doubles(out, alpha_bar);
}

BiasState BiasState::load(std::istream& in) {
  if (read_u64(in) != 0x4f50494d42494153ULL)
    throw ConfigError("not a bias checkpoint");
  if (read_u64(in) != 1) throw ConfigError("unsupported bias version");
  const std::uint64_t kind = read_u64(in);
  const auto meta = read_doubles(in);
  BasisSet basis = (kind == 1)
                       ? BasisSet::even_chebyshev_1d(meta.at(0), meta.at(1))
                       : BasisSet::product_chebyshev_2d(meta.at(0), meta.at(1));
  BiasState state(basis, meta.at(2));
  state.iteration = static_cast<long>(meta.at(3));
  state.alpha = read_doubles(in);
  state.alpha_bar = read_doubles(in);
  if (static_cast<int>(state.alpha.size()) != basis.count() ||
      static_cast<int>(state.alpha_bar.size()) != basis.count())
    throw ConfigError("bias checkpoint size mismatch");
  return state;
}

OmegaAccumulator::OmegaAccumulator(int basis_count)
    : sum_g(Eigen::VectorXd::Zero(basis_count)),
      sum_gg(Eigen::MatrixXd::Zero(basis_count, basis_count)) {}

void OmegaAccumulator::add(std::span<const double> basis_values) {
  const Eigen::Map<const Eigen::VectorXd> g(basis_values.data(),
                                            basis_values.size());
  sum_g += g;
  sum_gg.selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0);
  ++samples;
}

void OmegaAccumulator::merge(const OmegaAccumulator& other) {
  samples += other.samples;
  sum_g += other.sum_g;
  sum_gg += other.sum_gg;
}

void OmegaAccumulator::reset() {
  samples = 0;
  sum_g.setZero();
  sum_gg.setZero();
}

std::vector<double> omega_gradient(const OmegaAccumulator& acc,
                                   const std::vector<double>& target_expect) {
  if (acc.samples == 0)
    throw std::invalid_argument("gradient requires at least one sample");
  const int n = static_cast<int>(acc.sum_g.size());
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k)
    g[k] = -acc.sum_g[k] / acc.samples + target_expect[k];
  return g;
}

Eigen::MatrixXd omega_hessian(const OmegaAccumulator& acc, double beta,
                              bool* degenerate) {
  if (acc.samples < 2)
    throw std::invalid_argument("hessian requires at least two samples");
  const Eigen::VectorXd mean = acc.sum_g / acc.samples;
  Eigen::MatrixXd h =
      Eigen::MatrixXd(acc.sum_gg.selfadjointView<Eigen::Lower>()) /
          acc.samples -
      mean * mean.transpose();
  h = beta * 0.5 * (h + h.transpose()).eval();
  if (degenerate != nullptr) {
    const double moment_scale =
        std::max(1.0, acc.sum_gg.cwiseAbs().maxCoeff() / acc.samples);
    *degenerate = h.cwiseAbs().maxCoeff() <= 1e-12 * beta * moment_scale;
  }
  return h;
}

void update_coefficients(BiasState& bias, std::span<const double> gradient,
                         const Eigen::MatrixXd& hessian) {
  const int n = bias.basis.count();
  Eigen::Map<Eigen::VectorXd> alpha(bias.alpha.data(), n);
  Eigen::Map<Eigen::VectorXd> alpha_bar(bias.alpha_bar.data(), n);
  const Eigen::Map<const Eigen::VectorXd> g(gradient.data(), n);
  const Eigen::VectorXd step = g + hessian * (alpha - alpha_bar);
  alpha -= bias.step_size * step;
  if (!alpha.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite coefficient update at iteration " << bias.iteration
        << " (|g| = " << g.norm() << ")";
    throw TrajectoryDivergedError(msg.str());
  }
  bias.iteration += 1;
  // Running mean over iterates; the sampled bias follows alpha_bar.
  alpha_bar += (alpha - alpha_bar) / static_cast<double>(bias.iteration);
}

std::vector<double> free_energy_from_coefficients(
    const BasisSet& basis, std::span<const double> coeffs,
    std::span<const double> grid) {
  const int n = basis.count();
  std::vector<double> g(n);
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = grid[i];
    basis.evaluate(std::span(&s, 1), g);
    double vb = 0.0;
    for (int k = 0; k < n; ++k) vb += coeffs[k] * g[k];
    f[i] = -vb;  // uniform target: the log p_t term is a constant
  }
  const double fmin = *std::min_element(f.begin(), f.end());
  for (auto& v : f) v -= fmin;
  return f;
}

std::vector<double> recover_free_energy(const BiasState& bias, double beta,
                                        std::span<const double> grid) {
  (void)beta;
  return free_energy_from_coefficients(bias.basis, bias.alpha_bar, grid);
}

double Ves1dBias::energy(const SystemSpec&, const PathState& state,
                         const BcGeometry&) const {
  const double s = state.x;
  return state_->value(std::span(&s, 1));
}

double Ves1dBias::add_forces(const SystemSpec&, const PathState& state,
                             const BcGeometry&, std::span<double>,
                             double& force_x) const {
  const double s = state.x;
  double vb, dvb;
  state_->value_and_gradient(std::span(&s, 1), vb, std::span(&dvb, 1));
  force_x -= dvb;
  return vb;
}

}  // namespace openpimd
