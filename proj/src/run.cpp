#include "openpimd/run.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace openpimd {

namespace fs = std::filesystem;

RunConfig RunConfig::defaults_for(const std::string& mode) {
  RunConfig c;
  c.mode = mode;
  if (mode == "run-1d" || mode == "oracle") {
    // Reference 1D protocol row.
    c.model_kind = "double-well";
    c.beta = 5000.0;
    c.md_steps = 12500;
    c.dt = 10.0;
    c.mu = 1e-4;
    c.beads = 400;
    c.walkers = 16;
    c.com_removal = false;
  } else if (mode == "run-many") {
    // Many-body reference row at beta = 5000.
    c.model_kind = "triatomic-bath";
    c.beta = 5000.0;
    c.md_steps = 1000;
    c.dt = 10.0;
    c.mu = 1e-4;
    c.beads = 170;
    c.walkers = 16;
    c.com_removal = true;
  } else if (mode == "run-rdm") {
    c.model_kind = "double-well";
    c.beta = 5000.0;
    c.md_steps = 12500;
    c.dt = 10.0;
    c.mu = 1e-4;
    c.beads = 400;
    c.walkers = 16;
    c.com_removal = false;
    c.rdm = true;
  }
  return c;
}

void RunConfig::apply_key(const std::string& full_key,
                          const std::string& value) {
  // Keys may be written bare or with their section prefix.
  std::string key = full_key;
  for (const char* prefix :
       {"run.", "model.", "ves.", "thermostat.", "output.", "analysis.",
        "oracle.", "meta."}) {
    if (key.rfind(prefix, 0) == 0) {
      key = key.substr(std::string(prefix).size());
      break;
    }
  }
  if (full_key.rfind("meta.", 0) == 0) return;  // manifest bookkeeping

  KeyValueFile one;
  one.set(key, value);
  const auto d = [&](double fb) { return one.get_double(key, fb); };
  const auto i = [&](long fb) { return one.get_long(key, fb); };
  const auto b = [&](bool fb) { return one.get_bool(key, fb); };

  if (key == "mode") mode = value;
  else if (key == "beta") beta = d(beta);
  else if (key == "beads") beads = static_cast<int>(i(beads));
  else if (key == "dt") dt = d(dt);
  else if (key == "mu") mu = d(mu);
  else if (key == "md_steps") md_steps = i(md_steps);
  else if (key == "variational_steps") variational_steps = i(variational_steps);
  else if (key == "walkers") walkers = static_cast<int>(i(walkers));
  else if (key == "seed") seed = static_cast<std::uint64_t>(i(seed));
  else if (key == "threads") threads = static_cast<int>(i(threads));
  else if (key == "burnin_steps") burnin_steps = i(burnin_steps);
  else if (key == "sample_stride") sample_stride = i(sample_stride);
  else if (key == "checkpoint_interval") checkpoint_interval = i(checkpoint_interval);
  else if (key == "wall") wall = d(wall);
  else if (key == "com_removal") com_removal = b(com_removal);
  else if (key == "rdm") rdm = b(rdm);
  else if (key == "warm_start") warm_start = value;
  else if (key == "kind" || key == "model_kind") model_kind = value;
  else if (key == "v0") well_v0 = d(well_v0);
  else if (key == "a") well_a = d(well_a);
  else if (key == "ext_lo") well_ext_lo = d(well_ext_lo);
  else if (key == "ext_hi") well_ext_hi = d(well_ext_hi);
  else if (key == "mass") particle_mass = d(particle_mass);
  else if (key == "k_perp") k_perp = d(k_perp);
  else if (key == "omega") harmonic_omega = d(harmonic_omega);
  else if (key == "m_b") m_b = d(m_b);
  else if (key == "m_c") m_c = d(m_c);
  else if (key == "d_bc") d_bc = d(d_bc);
  else if (key == "k_anchor") k_anchor = d(k_anchor);
  else if (key == "bath_kappa") bath_kappa = d(bath_kappa);
  else if (key == "bath_omegas") bath_omegas = one.get_doubles(key);
  else if (key == "bath_couplings") bath_couplings = one.get_doubles(key);
  else if (key == "bath_masses") bath_masses = one.get_doubles(key);
  else if (key == "domain") ves_domain = d(ves_domain);
  else if (key == "rdm_extent") rdm_extent = d(rdm_extent);
  else if (key == "rdm_bins") rdm_bins = static_cast<int>(i(rdm_bins));
  else if (key == "wall_stiffness") wall_stiffness = d(wall_stiffness);
  else if (key == "thermostat_kind") thermostat_kind = value;
  else if (key == "gamma0") gamma0 = d(gamma0);
  else if (key == "gamma_scale") gamma_scale = d(gamma_scale);
  else if (key == "gle_file") gle_file = value;
  else if (key == "dir") out_dir = value;
  else if (key == "x_points") x_points = static_cast<int>(i(x_points));
  else if (key == "p_max") p_max = d(p_max);
  else if (key == "p_points") p_points = static_cast<int>(i(p_points));
  else if (key == "tail_fraction") tail_fraction = d(tail_fraction);
  else if (key == "max_drift_z") max_drift_z = d(max_drift_z);
  else if (key == "bootstrap_resamples") bootstrap_resamples = static_cast<int>(i(bootstrap_resamples));
  else if (key == "extent") oracle_extent = d(oracle_extent);
  else if (key == "points") oracle_points = static_cast<int>(i(oracle_points));
  else if (key == "states") oracle_states = static_cast<int>(i(oracle_states));
  else throw ConfigError("unknown config key: " + full_key);
}

RunConfig RunConfig::from_file(const std::string& path,
                               const std::string& mode) {
  const KeyValueFile kv = KeyValueFile::parse_file(path);
  std::string effective_mode = mode;
  if (effective_mode.empty())
    effective_mode = kv.get("run.mode", kv.get("mode", "run-1d"));
  RunConfig config = defaults_for(effective_mode);

  // The many-body rdm protocol uses 5000 MD steps per variational step; keep
  // that default when the model says triatomic and the file does not override.
  const std::string model = kv.get("model.kind", kv.get("kind", config.model_kind));
  if (effective_mode == "run-rdm" && model == "triatomic-bath") {
    config.model_kind = model;
    config.beads = 170;
    config.md_steps = 5000;
    config.com_removal = true;
  }
  for (const auto& [key, value] : kv.entries()) config.apply_key(key, value);
  config.mode = effective_mode;
  return config;
}

void RunConfig::validate() const {
  if (beta <= 0.0 || dt <= 0.0 || mu < 0.0)
    throw ConfigError("beta, dt must be positive and mu non-negative");
  if (beads < 2) throw ConfigError("bead count must be >= 2");
  if (walkers < 1) throw ConfigError("walker count must be >= 1");
  if (md_steps < 1) throw ConfigError("md_steps must be >= 1");
  if (variational_steps < 0) throw ConfigError("variational_steps must be >= 0");
  if (wall <= 0.0) throw ConfigError("wall bound must be positive");
  if (rdm && rdm_bins % 2 == 0) throw ConfigError("rdm_bins must be odd");
}

std::unique_ptr<PotentialModel> RunConfig::make_model() const {
  if (model_kind == "double-well") {
    DoubleWellProfile p{well_v0, well_a, well_ext_lo, well_ext_hi};
    return std::make_unique<DoubleWell1D>(p, particle_mass, k_perp);
  }
  if (model_kind == "free") return std::make_unique<FreeParticle>(particle_mass);
  if (model_kind == "harmonic")
    return std::make_unique<Harmonic1D>(particle_mass, harmonic_omega);
  if (model_kind == "triatomic-bath") {
    TriatomicBathModel::Params p;
    p.m_a = particle_mass;
    p.m_b = m_b;
    p.m_c = m_c;
    p.d_bc = d_bc;
    p.k_anchor = k_anchor;
    p.k_perp = k_perp;
    p.well = DoubleWellProfile{well_v0, well_a, well_ext_lo, well_ext_hi};
    if (!bath_omegas.empty()) {
      if (bath_couplings.size() != bath_omegas.size() ||
          (bath_masses.size() != bath_omegas.size() && !bath_masses.empty()))
        throw ConfigError("bath arrays must have matching lengths");
      for (std::size_t j = 0; j < bath_omegas.size(); ++j) {
        BathOscillator osc;
        osc.omega = bath_omegas[j];
        osc.coupling = bath_couplings[j];
        osc.mass = bath_masses.empty() ? 1836.0 : bath_masses[j];
        p.bath.push_back(osc);
      }
    } else {
      p.bath = TriatomicBathModel::default_bath(bath_kappa, p.well.a);
    }
    return std::make_unique<TriatomicBathModel>(p);
  }
  throw ConfigError("unknown model kind: " + model_kind);
}

BasisSet RunConfig::make_basis() const {
  return rdm ? BasisSet::product_chebyshev_2d(-rdm_extent, rdm_extent)
             : BasisSet::even_chebyshev_1d(-ves_domain, ves_domain);
}

IntegratorConfig RunConfig::make_integrator_config() const {
  IntegratorConfig ic;
  ic.dt = dt;
  ic.wall = wall;
  ic.com_removal = com_removal;
  if (thermostat_kind == "white")
    ic.thermostat.kind = ThermostatSpec::Kind::PerModeWhite;
  else if (thermostat_kind == "none")
    ic.thermostat.kind = ThermostatSpec::Kind::None;
  else if (thermostat_kind == "gle") {
    ic.thermostat.kind = ThermostatSpec::Kind::Gle;
    if (gle_file.empty()) throw ConfigError("gle thermostat needs gle_file");
    ic.thermostat.gle = GleSpec::from_file(gle_file);
  } else {
    throw ConfigError("unknown thermostat kind: " + thermostat_kind);
  }
  ic.thermostat.gamma0 = gamma0;
  ic.thermostat.gamma_scale = gamma_scale;
  return ic;
}

namespace {

void manifest_line(std::ostringstream& out, const std::string& key,
                   const std::string& value) {
  out << key << " = " << value << "\n";
}

void manifest_line(std::ostringstream& out, const std::string& key, double v) {
  out << key << " = " << format_double(v) << "\n";
}

void manifest_line(std::ostringstream& out, const std::string& key, long v) {
  out << key << " = " << v << "\n";
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s << (i ? "," : "") << format_double(v[i]);
  return s.str();
}

}  // namespace

std::string RunConfig::manifest_text() const {
  std::ostringstream out;
  out << "[run]\n";
  manifest_line(out, "mode", mode);
  manifest_line(out, "beta", beta);
  manifest_line(out, "beads", static_cast<long>(beads));
  manifest_line(out, "dt", dt);
  manifest_line(out, "mu", mu);
  manifest_line(out, "md_steps", md_steps);
  manifest_line(out, "variational_steps", variational_steps);
  manifest_line(out, "walkers", static_cast<long>(walkers));
  manifest_line(out, "seed", static_cast<long>(seed));
  manifest_line(out, "burnin_steps", burnin_steps);
  manifest_line(out, "sample_stride", sample_stride);
  manifest_line(out, "wall", wall);
  manifest_line(out, "com_removal", std::string(com_removal ? "true" : "false"));
  manifest_line(out, "rdm", std::string(rdm ? "true" : "false"));
  if (!warm_start.empty()) manifest_line(out, "warm_start", warm_start);
  out << "[model]\n";
  manifest_line(out, "kind", model_kind);
  manifest_line(out, "mass", particle_mass);
  if (model_kind == "double-well" || model_kind == "triatomic-bath") {
    manifest_line(out, "v0", well_v0);
    manifest_line(out, "a", well_a);
    manifest_line(out, "ext_lo", well_ext_lo);
    manifest_line(out, "ext_hi", well_ext_hi);
    manifest_line(out, "k_perp", k_perp);
  }
  if (model_kind == "harmonic") manifest_line(out, "omega", harmonic_omega);
  if (model_kind == "triatomic-bath") {
    manifest_line(out, "m_b", m_b);
    manifest_line(out, "m_c", m_c);
    manifest_line(out, "d_bc", d_bc);
    manifest_line(out, "k_anchor", k_anchor);
    const auto model = make_model();
    const auto& bath =
        static_cast<const TriatomicBathModel&>(*model).params().bath;
    std::vector<double> om, cp, ms;
    for (const auto& osc : bath) {
      om.push_back(osc.omega);
      cp.push_back(osc.coupling);
      ms.push_back(osc.mass);
    }
    manifest_line(out, "bath_omegas", join_doubles(om));
    manifest_line(out, "bath_couplings", join_doubles(cp));
    manifest_line(out, "bath_masses", join_doubles(ms));
  }
  out << "[ves]\n";
  manifest_line(out, "domain", ves_domain);
  manifest_line(out, "rdm_extent", rdm_extent);
  manifest_line(out, "rdm_bins", static_cast<long>(rdm_bins));
  manifest_line(out, "wall_stiffness", wall_stiffness);
  out << "[thermostat]\n";
  manifest_line(out, "thermostat_kind", thermostat_kind);
  manifest_line(out, "gamma0", gamma0);
  manifest_line(out, "gamma_scale", gamma_scale);
  if (!gle_file.empty()) manifest_line(out, "gle_file", gle_file);
  out << "[output]\n";
  manifest_line(out, "x_points", static_cast<long>(x_points));
  manifest_line(out, "p_max", p_max);
  manifest_line(out, "p_points", static_cast<long>(p_points));
  out << "[meta]\n";
  manifest_line(out, "code_version", std::string("openpimd 0.1.0"));
  manifest_line(out, "model_hash", hex_id(fnv1a_hash(make_model()->describe())));
  return out.str();
}

std::string RunConfig::run_id() const {
  return hex_id(fnv1a_hash(manifest_text()));
}

Walker::Walker(const SystemSpec& spec, const PotentialModel& model,
               const IntegratorConfig& config, Rng stream)
    : state(PathState::initial(spec, model)), rng(stream) {
  integrator = std::make_unique<Integrator>(spec, config);
  integrator->draw_momenta(state, rng);
}

namespace {

constexpr std::uint64_t kCheckpointMagic = 0x4f50494d44434b50ULL;  // OPIMDCKP

struct RunContext {
  RunConfig config;
  std::unique_ptr<PotentialModel> model;
  SystemSpec spec;
  BiasState bias;
  std::vector<std::unique_ptr<Walker>> walkers;
  std::unique_ptr<CollectiveBias> bias_force;
  std::vector<double> target_expect;
  std::vector<VesIterationRecord> records;
  std::vector<std::vector<double>> samples;  // iteration, walker, s...
  long total_samples = 0;

  explicit RunContext(const RunConfig& cfg)
      : config(cfg),
        model(cfg.make_model()),
        spec(SystemSpec::for_model(*model, cfg.beads, cfg.beta)),
        bias(cfg.make_basis(), cfg.mu) {
    target_expect = bias.basis.target_expectations();
    if (cfg.rdm)
      bias_force = std::make_unique<Ves2dBias>(&bias, cfg.rdm_extent,
                                               cfg.wall_stiffness);
    else
      bias_force = std::make_unique<Ves1dBias>(&bias);
  }

  void build_walkers() {
    for (int w = 0; w < config.walkers; ++w)
      walkers.push_back(std::make_unique<Walker>(
          spec, *model, config.make_integrator_config(),
          Rng::for_stream(config.seed, static_cast<std::uint64_t>(w))));
  }
};

void parallel_over_walkers(int n_walkers, int threads,
                           const std::function<void(int)>& body) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n_walkers));
  if (threads == 1) {
    for (int w = 0; w < n_walkers; ++w) body(w);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int w = t; w < n_walkers; w += threads) body(w);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

void write_checkpoint(const RunContext& ctx, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  write_u64(out, kCheckpointMagic);
  write_u64(out, 1);
  write_u64(out, fnv1a_hash(ctx.config.manifest_text()));
  ctx.bias.save(out);
  write_u64(out, static_cast<std::uint64_t>(ctx.walkers.size()));
  for (const auto& walker : ctx.walkers) {
    save_path_state(out, walker->state);
    walker->rng.save(out);
    write_doubles(out, walker->integrator->aux_state());
  }
}

void load_checkpoint(RunContext& ctx, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  if (read_u64(in) != kCheckpointMagic)
    throw ConfigError("not an openpimd checkpoint: " + path);
  if (read_u64(in) != 1) throw ConfigError("unsupported checkpoint version");
  const std::uint64_t config_hash = read_u64(in);
  if (config_hash != fnv1a_hash(ctx.config.manifest_text()))
    throw ConfigError("checkpoint was produced by a different configuration");
  ctx.bias = BiasState::load(in);
  const std::uint64_t n = read_u64(in);
  if (n != ctx.walkers.size())
    throw ConfigError("checkpoint walker count mismatch");
  for (auto& walker : ctx.walkers) {
    walker->state = load_path_state(in);
    walker->rng.load(in);
    walker->integrator->aux_state() = read_doubles(in);
  }
}

void write_ves_log(const RunContext& ctx, const std::string& path) {
  const int k = ctx.bias.basis.count();
  std::vector<std::string> columns{"iteration"};
  for (int j = 0; j < k; ++j) columns.push_back("alpha_" + std::to_string(j));
  for (int j = 0; j < k; ++j) columns.push_back("abar_" + std::to_string(j));
  columns.push_back("grad_norm");
  columns.push_back("samples");
  std::vector<std::vector<double>> rows;
  rows.reserve(ctx.records.size());
  for (const auto& rec : ctx.records) {
    std::vector<double> row;
    row.reserve(2 * k + 3);
    row.push_back(static_cast<double>(rec.iteration));
    row.insert(row.end(), rec.alpha.begin(), rec.alpha.end());
    row.insert(row.end(), rec.alpha_bar.begin(), rec.alpha_bar.end());
    row.push_back(rec.gradient_norm);
    row.push_back(static_cast<double>(rec.samples));
    rows.push_back(std::move(row));
  }
  write_csv(path, {"run_id " + ctx.config.run_id()}, columns, rows);
}

void write_samples(const RunContext& ctx, const std::string& path) {
  std::vector<std::string> columns{"iteration", "walker", "s0"};
  if (ctx.config.rdm) columns.push_back("s1");
  write_csv(path, {"order-parameter samples, stride " +
                       std::to_string(ctx.config.sample_stride)},
            columns, ctx.samples);
}

void load_previous_logs(RunContext& ctx, const std::string& dir) {
  const std::string log_path = dir + "/ves_log.csv";
  if (fs::exists(log_path)) {
    const CsvTable table = read_csv(log_path);
    const int k = ctx.bias.basis.count();
    for (const auto& row : table.rows) {
      VesIterationRecord rec;
      rec.iteration = static_cast<long>(row.at(0));
      if (rec.iteration > ctx.bias.iteration) continue;
      rec.alpha.assign(row.begin() + 1, row.begin() + 1 + k);
      rec.alpha_bar.assign(row.begin() + 1 + k, row.begin() + 1 + 2 * k);
      rec.gradient_norm = row.at(1 + 2 * k);
      rec.samples = static_cast<long>(row.at(2 + 2 * k));
      ctx.records.push_back(std::move(rec));
    }
  }
  const std::string sample_path = dir + "/samples.csv";
  if (fs::exists(sample_path)) {
    const CsvTable table = read_csv(sample_path);
    for (const auto& row : table.rows) {
      if (static_cast<long>(row.at(0)) > ctx.bias.iteration) continue;
      ctx.samples.push_back(row);
    }
  }
}

}  // namespace

RunOutputs run_variational(const RunConfig& config) {
  config.validate();
  RunContext ctx(config);
  ctx.build_walkers();

  fs::create_directories(config.out_dir);
  {
    std::ofstream manifest(config.out_dir + "/manifest.txt");
    manifest << config.manifest_text();
    manifest << "run_id = " << config.run_id() << "\n";
  }

  const bool restarted = !config.restart.empty();
  if (restarted) {
    load_checkpoint(ctx, config.restart);
    load_previous_logs(ctx, config.out_dir);
  }

  const int dim = ctx.bias.basis.dimensions();
  const int n_basis = ctx.bias.basis.count();
  const long burnin =
      config.burnin_steps < 0 ? config.md_steps : config.burnin_steps;

  std::vector<OmegaAccumulator> accs(
      config.walkers, OmegaAccumulator(n_basis));
  std::vector<std::vector<std::vector<double>>> walker_samples(config.walkers);

  const auto advance_walker = [&](int w, long steps, bool accumulate) {
    Walker& walker = *ctx.walkers[w];
    std::vector<double> gbuf(n_basis);
    double s[2];
    for (long step = 0; step < steps; ++step) {
      walker.integrator->step(walker.state, *ctx.model, ctx.bias_force.get(),
                              walker.rng);
      if (!accumulate) continue;
      const BcGeometry geom = bc_geometry(ctx.spec, walker.state);
      if (ctx.config.rdm) {
        const auto [r, rp] = order_params(ctx.spec, walker.state, geom);
        s[0] = r;
        s[1] = rp;
      } else {
        s[0] = walker.state.x;
      }
      ctx.bias.basis.evaluate(std::span<const double>(s, dim), gbuf);
      accs[w].add(gbuf);
      if (step % ctx.config.sample_stride == 0) {
        std::vector<double> row{static_cast<double>(ctx.bias.iteration),
                                static_cast<double>(w), s[0]};
        if (ctx.config.rdm) row.push_back(s[1]);
        walker_samples[w].push_back(std::move(row));
      }
    }
  };

  const auto checkpoint_all = [&]() {
    write_checkpoint(ctx, config.out_dir + "/checkpoint.bin");
    write_ves_log(ctx, config.out_dir + "/ves_log.csv");
    write_samples(ctx, config.out_dir + "/samples.csv");
    std::ofstream bias_out(config.out_dir + "/bias.ckpt", std::ios::binary);
    ctx.bias.save(bias_out);
  };

  if (!restarted && burnin > 0) {
    parallel_over_walkers(config.walkers, config.threads,
                          [&](int w) { advance_walker(w, burnin, false); });
  }

  try {
    while (ctx.bias.iteration < config.variational_steps) {
      parallel_over_walkers(config.walkers, config.threads, [&](int w) {
        advance_walker(w, config.md_steps, true);
      });

      OmegaAccumulator merged(n_basis);
      for (int w = 0; w < config.walkers; ++w) {
        merged.merge(accs[w]);
        accs[w].reset();
        for (auto& row : walker_samples[w]) ctx.samples.push_back(std::move(row));
        walker_samples[w].clear();
      }
      ctx.total_samples += merged.samples;

      const auto grad = omega_gradient(merged, ctx.target_expect);
      const Eigen::MatrixXd hess = omega_hessian(merged, config.beta);
      update_coefficients(ctx.bias, grad, hess);

      VesIterationRecord rec;
      rec.iteration = ctx.bias.iteration;
      rec.alpha = ctx.bias.alpha;
      rec.alpha_bar = ctx.bias.alpha_bar;
      double g2 = 0.0;
      for (double g : grad) g2 += g * g;
      rec.gradient_norm = std::sqrt(g2);
      rec.samples = merged.samples;
      ctx.records.push_back(std::move(rec));

      if (config.checkpoint_interval > 0 &&
          ctx.bias.iteration % config.checkpoint_interval == 0)
        checkpoint_all();
    }
  } catch (const std::exception&) {
    checkpoint_all();
    throw;
  }

  checkpoint_all();
  RunOutputs out{ctx.bias, ctx.records, ctx.total_samples};
  return out;
}

namespace detail {

bool detect_stationarity(const std::vector<std::vector<double>>& alpha_rows,
                         double tail_fraction, double max_z, double* worst_z) {
  const long rows = static_cast<long>(alpha_rows.size());
  if (rows < 64) {
    if (worst_z != nullptr) *worst_z = 1e300;
    return false;
  }
  const long t0 = rows - static_cast<long>(tail_fraction * rows);
  const long tail = rows - t0;
  const long half = tail / 2;
  if (half < 16) {
    if (worst_z != nullptr) *worst_z = 1e300;
    return false;
  }
  const int k = static_cast<int>(alpha_rows.front().size());
  double worst = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> first(half), second(half);
    for (long i = 0; i < half; ++i) {
      first[i] = alpha_rows[t0 + i][c];
      second[i] = alpha_rows[t0 + half + i][c];
    }
    const SeriesStats s1 = block_average(first);
    const SeriesStats s2 = block_average(second);
    const double se = std::sqrt(s1.std_error * s1.std_error +
                                s2.std_error * s2.std_error);
    if (se == 0.0) continue;
    worst = std::max(worst, std::abs(s2.mean - s1.mean) / se);
  }
  if (worst_z != nullptr) *worst_z = worst;
  return worst <= max_z;
}

}  // namespace detail

namespace {

RunConfig config_from_manifest(const RunConfig& cli) {
  const std::string path = cli.out_dir + "/manifest.txt";
  if (!fs::exists(path))
    throw ConfigError("no manifest.txt in " + cli.out_dir +
                      "; is this a run directory?");
  const KeyValueFile kv = KeyValueFile::parse_file(path);
  RunConfig config = cli;
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("meta.", 0) == 0) continue;
    config.apply_key(key, value);
  }
  // Analysis knobs stay as given on the command line.
  config.tail_fraction = cli.tail_fraction;
  config.max_drift_z = cli.max_drift_z;
  config.bootstrap_resamples = cli.bootstrap_resamples;
  config.out_dir = cli.out_dir;
  return config;
}

std::vector<std::string> distribution_header(const RunConfig& config,
                                             const std::string& source) {
  std::vector<std::string> h;
  h.push_back("source " + source);
  h.push_back("beta " + format_double(config.beta));
  h.push_back("beads " + std::to_string(config.beads));
  h.push_back("model_hash " +
              hex_id(fnv1a_hash(config.make_model()->describe())));
  h.push_back("run_id " + config.run_id());
  return h;
}

void write_distribution(const std::string& path,
                        const std::vector<std::string>& header,
                        const std::string& xname, const std::string& yname,
                        const DistributionResult& dist) {
  std::vector<std::vector<double>> rows;
  rows.reserve(dist.grid.size());
  for (std::size_t i = 0; i < dist.grid.size(); ++i) {
    std::vector<double> row{dist.grid[i], dist.values[i]};
    row.push_back(dist.errors.empty() ? 0.0 : dist.errors[i]);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, {xname, yname, "sigma_" + yname}, rows);
}

}  // namespace

AnalysisResult analyze_run(const RunConfig& cli_config) {
  const RunConfig config = config_from_manifest(cli_config);
  const std::string dir = config.out_dir;
  const CsvTable log = read_csv(dir + "/ves_log.csv");
  if (log.rows.empty()) throw ConfigError("empty ves_log.csv");

  const BasisSet basis = config.make_basis();
  const int k = basis.count();

  std::vector<std::vector<double>> alpha_rows;
  alpha_rows.reserve(log.rows.size());
  for (const auto& row : log.rows)
    alpha_rows.emplace_back(row.begin() + 1, row.begin() + 1 + k);

  AnalysisResult result;
  result.stationary = detail::detect_stationarity(
      alpha_rows, config.tail_fraction, config.max_drift_z,
      &result.max_drift_z);
  if (!result.stationary) {
    std::ostringstream msg;
    msg << "run has no quasi-stationary tail (worst drift z = "
        << result.max_drift_z << " > " << config.max_drift_z
        << " over the last " << config.tail_fraction
        << " of iterations); extend the run or pass a larger tolerance";
    throw ConfigError(msg.str());
  }

  const long rows = static_cast<long>(alpha_rows.size());
  const long t0 = rows - static_cast<long>(config.tail_fraction * rows);
  std::vector<std::vector<double>> tail(alpha_rows.begin() + t0,
                                        alpha_rows.end());
  result.tail_rows = static_cast<long>(tail.size());

  // Per-coefficient decorrelation block size; the bootstrap uses the largest.
  int block = 1;
  for (int c = 0; c < k; ++c) {
    std::vector<double> series(tail.size());
    for (std::size_t i = 0; i < tail.size(); ++i) series[i] = tail[i][c];
    block = std::max(block, block_average(series).block_size);
  }
  while (static_cast<long>(tail.size()) / block < 8 && block > 1) block /= 2;
  result.block_size = block;

  result.alpha_tail.assign(k, 0.0);
  for (const auto& row : tail)
    for (int c = 0; c < k; ++c) result.alpha_tail[c] += row[c];
  for (auto& v : result.alpha_tail) v /= static_cast<double>(tail.size());

  Rng boot_rng(config.seed ^ 0xb00757a9ULL);
  const auto header = distribution_header(config, "pimd");

  if (!config.rdm) {
    const auto x_grid = linspace(-config.ves_domain, config.ves_domain,
                                 config.x_points);
    const auto p_grid = linspace(-config.p_max, config.p_max, config.p_points);

    const auto pipeline = [&](std::span<const double> coeffs) {
      const auto f = free_energy_from_coefficients(basis, coeffs, x_grid);
      const auto nt = ntilde_from_free_energy(x_grid, f, config.beta);
      const auto np = momentum_transform(nt, p_grid);
      std::vector<double> out;
      out.reserve(f.size() + nt.values.size() + np.values.size());
      out.insert(out.end(), f.begin(), f.end());
      out.insert(out.end(), nt.values.begin(), nt.values.end());
      out.insert(out.end(), np.values.begin(), np.values.end());
      return out;
    };

    const BootstrapResult boot = bootstrap_blocks(
        tail, block, config.bootstrap_resamples, boot_rng, pipeline);

    const auto f = free_energy_from_coefficients(basis, result.alpha_tail,
                                                 x_grid);
    result.free_energy.grid = x_grid;
    result.free_energy.values = f;
    result.ntilde = ntilde_from_free_energy(x_grid, f, config.beta);
    result.momentum = momentum_transform(result.ntilde, p_grid);

    const std::size_t nx = x_grid.size();
    const std::size_t np = p_grid.size();
    result.free_energy.errors.assign(boot.sigma.begin(),
                                     boot.sigma.begin() + nx);
    result.ntilde.errors.assign(boot.sigma.begin() + nx,
                                boot.sigma.begin() + 2 * nx);
    result.momentum.errors.assign(boot.sigma.begin() + 2 * nx,
                                  boot.sigma.begin() + 2 * nx + np);

    write_distribution(dir + "/free_energy.csv", header, "x", "F",
                       result.free_energy);
    write_distribution(dir + "/ntilde.csv", header, "x", "ntilde",
                       result.ntilde);
    write_distribution(dir + "/np.csv", header, "p", "n", result.momentum);
    write_distribution(dir + "/classical_np.csv",
                       distribution_header(config, "classical"), "p", "n",
                       classical_momentum(config.particle_mass, config.beta,
                                          p_grid));
  } else {
    const RdmGrid grid{config.rdm_extent, config.rdm_bins};
    const auto centers = grid.centers();
    const int nb = grid.bins;
    const int n_report = std::min(8, nb);

    const auto f2_of = [&](std::span<const double> coeffs) {
      std::vector<double> f2(static_cast<std::size_t>(nb) * nb);
      std::vector<double> g(k);
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
          const double s[2] = {centers[i], centers[j]};
          basis.evaluate(std::span(s, 2), g);
          double vb = 0.0;
          for (int c = 0; c < k; ++c) vb += coeffs[c] * g[c];
          f2[i * nb + j] = -vb;
        }
      return f2;
    };

    const auto spectrum_of = [&](std::span<const double> coeffs) {
      const auto f2 = f2_of(coeffs);
      const auto disc = discretize_rho(grid, f2, config.beta);
      const auto spec = symmetric_eigensolve(disc.matrix, disc.cell, centers);
      return std::vector<double>(spec.eigenvalues.begin(),
                                 spec.eigenvalues.begin() + n_report);
    };

    const BootstrapResult boot = bootstrap_blocks(
        tail, block, config.bootstrap_resamples, boot_rng, spectrum_of);

    const auto f2 = f2_of(result.alpha_tail);
    const auto disc = discretize_rho(grid, f2, config.beta);
    const auto spec = symmetric_eigensolve(disc.matrix, disc.cell, centers);
    result.eigenvalues = spec.eigenvalues;
    result.eigenvalue_sigma = boot.sigma;

    std::vector<std::vector<double>> spectrum_rows;
    for (int n = 0; n < n_report; ++n)
      spectrum_rows.push_back({static_cast<double>(n), spec.eigenvalues[n],
                               boot.sigma[n]});
    auto spec_header = header;
    spec_header.push_back("rdm asymmetry before symmetrization " +
                          format_double(disc.asymmetry));
    write_csv(dir + "/spectrum.csv", spec_header,
              {"index", "eigenvalue", "sigma"}, spectrum_rows);

    // Translation-operator curves for the leading eigenstates, plus the
    // reconstructed ntilde and its transform.
    const auto x_grid = linspace(-2.0 * config.rdm_extent,
                                 2.0 * config.rdm_extent, config.x_points);
    const int n_curves = std::min(6, nb);
    std::vector<std::string> tx_cols{"x"};
    for (int n = 0; n < n_curves; ++n)
      tx_cols.push_back("tx_" + std::to_string(n));
    std::vector<std::vector<double>> tx_rows;
    for (double x : x_grid) {
      std::vector<double> row{x};
      for (int n = 0; n < n_curves; ++n)
        row.push_back(translation_expectation(
            std::span(spec.eigenvectors.col(n).data(), nb), centers,
            spec.cell, x));
      tx_rows.push_back(std::move(row));
    }
    write_csv(dir + "/tx_curves.csv", header, tx_cols, tx_rows);

    result.ntilde = reconstruct_ntilde(spec, x_grid);
    const auto p_grid = linspace(-config.p_max, config.p_max, config.p_points);
    result.momentum = momentum_transform(result.ntilde, p_grid);
    write_distribution(dir + "/rdm_ntilde.csv", header, "x", "ntilde",
                       result.ntilde);
    write_distribution(dir + "/rdm_np.csv", header, "p", "n", result.momentum);
  }

  // Uniformity of the sampled order parameter against the uniform target.
  if (fs::exists(dir + "/samples.csv")) {
    const CsvTable samples = read_csv(dir + "/samples.csv");
    std::vector<double> tail_samples;
    for (const auto& row : samples.rows)
      if (static_cast<long>(row.at(0)) >= t0) tail_samples.push_back(row.at(2));
    if (!tail_samples.empty()) {
      const double lo = config.rdm ? -config.rdm_extent : -config.ves_domain;
      const double hi = -lo;
      result.uniformity = uniformity_check(tail_samples, lo, hi);
    }
  }

  std::ofstream report(dir + "/analysis_report.txt");
  report << "stationary = true\n"
         << "worst_drift_z = " << format_double(result.max_drift_z) << "\n"
         << "tail_rows = " << result.tail_rows << "\n"
         << "bootstrap_block = " << result.block_size << "\n"
         << "bootstrap_resamples = " << config.bootstrap_resamples << "\n"
         << "uniformity_chi2 = " << format_double(result.uniformity.chi_square)
         << "\n"
         << "uniformity_p = " << format_double(result.uniformity.p_value)
         << "\n";
  return result;
}

void run_oracle(const RunConfig& config) {
  const auto model = config.make_model();
  std::function<double(double)> potential;
  if (config.model_kind == "double-well") {
    const DoubleWellProfile profile{config.well_v0, config.well_a,
                                    config.well_ext_lo, config.well_ext_hi};
    potential = [profile](double q) { return profile.value(q); };
  } else if (config.model_kind == "harmonic") {
    const double k = config.particle_mass * config.harmonic_omega *
                     config.harmonic_omega;
    potential = [k](double q) { return 0.5 * k * q * q; };
  } else if (config.model_kind == "free") {
    potential = [](double) { return 0.0; };
  } else {
    throw ConfigError("oracle mode supports 1D models only (double-well, "
                      "harmonic, free); the many-body system has no oracle");
  }

  const Grid1D grid{config.oracle_extent, config.oracle_points};
  const EigenSolution sol = solve_schrodinger(grid, potential,
                                              config.particle_mass,
                                              config.oracle_states);
  const auto x_grid = linspace(-config.ves_domain, config.ves_domain,
                               config.x_points);
  const auto p_grid = linspace(-config.p_max, config.p_max, config.p_points);
  const ExactDistributions dist = exact_ntilde_np(sol, config.beta, x_grid,
                                                  p_grid);

  fs::create_directories(config.out_dir);
  const auto header = distribution_header(config, "exact");
  write_distribution(config.out_dir + "/ntilde.csv", header, "x", "ntilde",
                     dist.ntilde);
  write_distribution(config.out_dir + "/np.csv", header, "p", "n",
                     dist.momentum);

  const auto occ = thermal_occupations(sol, config.beta);
  std::vector<std::vector<double>> occ_rows;
  for (std::size_t n = 0; n < occ.size(); ++n)
    occ_rows.push_back({static_cast<double>(n), sol.energies[n], occ[n]});
  write_csv(config.out_dir + "/spectrum.csv", header,
            {"index", "energy", "occupation"}, occ_rows);

  std::vector<double> prof_q = linspace(config.well_ext_lo - 0.5,
                                        config.well_ext_hi + 0.5, 201);
  std::vector<double> prof_v(prof_q.size());
  for (std::size_t i = 0; i < prof_q.size(); ++i) prof_v[i] = potential(prof_q[i]);
  write_profile(config.out_dir + "/profile.dat", prof_q, prof_v);

  std::ofstream report(config.out_dir + "/oracle_report.txt");
  const double splitting = sol.energies[1] - sol.energies[0];
  report << "E0 = " << format_double(sol.energies[0]) << "\n"
         << "E1 = " << format_double(sol.energies[1]) << "\n"
         << "splitting = " << format_double(splitting) << "\n"
         << "ground_state_weight = "
         << format_double(ground_state_weight(splitting, config.beta)) << "\n"
         << "np_route_difference = " << format_double(dist.route_difference)
         << "\n";
}

ExtrapolationFit extrapolate_file(const std::string& pairs_csv,
                                  const std::string& out_dir) {
  const CsvTable table = read_csv(pairs_csv);
  const auto betas = table.column("beta");
  const auto lambdas = table.column("lambda");
  const ExtrapolationFit fit =
      extrapolate_to_zero_temperature(betas, lambdas);
  fs::create_directories(out_dir);
  std::ofstream report(out_dir + "/fit_report.txt");
  report << "intercept_T0 = " << format_double(fit.intercept) << "\n"
         << "slope = " << format_double(fit.slope) << "\n";
  for (std::size_t i = 0; i < fit.temperatures.size(); ++i)
    report << "T " << format_double(fit.temperatures[i]) << " lambda "
           << format_double(fit.values[i]) << " residual "
           << format_double(fit.residuals[i]) << "\n";
  return fit;
}

}  // namespace openpimd
