#include "mslu/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "mslu/bench.hpp"
#include "mslu/crlb.hpp"
#include "mslu/errors.hpp"
#include "mslu/forward_model.hpp"
#include "mslu/samplers.hpp"
#include "mslu/spectral_library.hpp"

#ifndef MSLU_VERSION
#define MSLU_VERSION "dev"
#endif

namespace mslu {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ValidationError(what + ": empty list");
  return out;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw IoError("failed writing " + path.string());
}

fs::path manifest_path(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

// Every option of the subcommand with its resolved value (explicit, from the
// config file, or the default).
json resolved_options(const CLI::App& cmd) {
  json j = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      std::string joined;
      for (std::size_t i = 0; i < results.size(); ++i) joined += (i ? "," : "") + results[i];
      j[name] = joined;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

// Config reader that files flat `key=value` lines under the subcommand being
// run, so one file format serves every subcommand.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") item.parents = {subs.front()->get_name()};
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  auto* out = cmd->add_option("--out", c.out, "Output file");
  if (out_required) out->required();
  cmd->add_option("--threads", c.threads, "Maximum worker threads (0 = runtime default)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

void apply_threads(const Common& c) {
#ifdef _OPENMP
  if (c.threads > 0) omp_set_num_threads(c.threads);
#else
  (void)c;
#endif
}

void write_manifest(const CLI::App& cmd, const Common& c, const json& inputs, const std::vector<fs::path>& outputs,
                    json extra = json::object()) {
  json m;
  m["command"] = cmd.get_name();
  m["tool_version"] = MSLU_VERSION;
  m["seed"] = c.seed;
  m["config"] = resolved_options(cmd);
  m["inputs"] = inputs;
  const CLI::Option* cfg = cmd.get_parent() ? cmd.get_parent()->get_config_ptr() : nullptr;
  if (cfg && cfg->count() > 0) m["config_file"] = cfg->as<std::string>();
  std::vector<std::string> outs;
  for (const auto& p : outputs) outs.push_back(p.string());
  m["outputs"] = outs;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_json(manifest_path(c.out), m);
}

struct BandOptions {
  int bands = 32;
  double lo = 400.0;
  double hi = 2500.0;
};

void add_bands(CLI::App* cmd, BandOptions& b, bool with_count = true) {
  if (with_count) cmd->add_option("--bands", b.bands, "Number of spectral bands")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--band-lo", b.lo, "First band center (nm)")->capture_default_str();
  cmd->add_option("--band-hi", b.hi, "Last band center (nm)")->capture_default_str();
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  BandOptions bands;
  std::string scene, spectra;
};

void cmd_simulate(const CLI::App& cmd, const SimulateArgs& a) {
  const auto spectra = load_spectra(a.spectra);
  const SpectralLibrary lib = resample_bands(spectra, a.bands.bands, a.bands.lo, a.bands.hi);
  SceneConfig scene = scene_from_json(read_json(a.scene), lib.bands());
  Common common = a.common;
  if (cmd.count("--seed") == 0) common.seed = scene.seed;
  scene.seed = common.seed;

  Eigen::MatrixXd intensity;
  if (scene.is_multi()) {
    scene.multi->validate(lib.materials(), lib.bands());
    intensity = intensity_multi(lib, *scene.multi, scene.phi, scene.T, scene.shape);
  } else {
    scene.single->validate(lib.materials(), lib.bands(), scene.T);
    intensity = intensity_single(lib, *scene.single, scene.phi, scene.T, scene.shape);
  }
  WaveformSet ws = simulate(intensity, common.seed);
  ws.band_wavelengths = lib.band_wavelengths;
  write_waveforms_csv(common.out, ws);
  write_manifest(cmd, common, {{"scene", a.scene}, {"spectra", a.spectra}}, {common.out},
                 {{"scene", scene_to_json(scene)}, {"band_wavelengths", lib.band_wavelengths}});
}

// unmix ---------------------------------------------------------------------

struct ChainArgs {
  int n_mc = 8000, n_bi = 4000;
  int leapfrog_min = 10, leapfrog_max = 50;
  double step_size = 0.0;
  double init_t0 = 1.0, init_b = 1.0;
  double alpha2 = 1e6, gamma2 = 1e6;
  double ci_level = 0.95;
  double cutoff = kDefaultPulseCutoff;
  int adapt_window = 25;
  std::string shape = "piecewise";
};

void add_chain(CLI::App* cmd, ChainArgs& c) {
  cmd->add_option("--n-mc", c.n_mc, "Total Gibbs iterations")->capture_default_str();
  cmd->add_option("--n-bi", c.n_bi, "Burn-in iterations")->capture_default_str();
  cmd->add_option("--leapfrog-min", c.leapfrog_min, "Fewest leapfrog steps per area update")->capture_default_str();
  cmd->add_option("--leapfrog-max", c.leapfrog_max, "Most leapfrog steps per area update")->capture_default_str();
  cmd->add_option("--step-size", c.step_size, "Initial leapfrog step (0 = automatic)")->capture_default_str();
  cmd->add_option("--rw-t0", c.init_t0, "Initial position proposal scale (bins)")->capture_default_str();
  cmd->add_option("--rw-b", c.init_b, "Initial background proposal scale (photons)")->capture_default_str();
  cmd->add_option("--adapt-window", c.adapt_window, "Burn-in iterations between scale updates")->capture_default_str();
  cmd->add_option("--alpha2", c.alpha2, "Prior variance of the areas")->capture_default_str();
  cmd->add_option("--gamma2", c.gamma2, "Prior variance of the backgrounds")->capture_default_str();
  cmd->add_option("--ci-level", c.ci_level, "Credible interval level")->capture_default_str();
  cmd->add_option("--cutoff", c.cutoff, "Pulse truncation level relative to the peak (<= 0 disables)")
      ->capture_default_str();
  cmd->add_option("--shape", c.shape, "Pulse shape (piecewise|gaussian)")->capture_default_str();
}

ChainConfig chain_config(const ChainArgs& c, std::uint64_t seed) {
  ChainConfig cfg;
  cfg.n_mc = c.n_mc;
  cfg.n_bi = c.n_bi;
  cfg.seed = seed;
  cfg.chmc.leapfrog_min = c.leapfrog_min;
  cfg.chmc.leapfrog_max = c.leapfrog_max;
  cfg.chmc.step_size = c.step_size;
  cfg.rw.init_stddev_t0 = c.init_t0;
  cfg.rw.init_stddev_b = c.init_b;
  cfg.adapt_window = c.adapt_window;
  cfg.ci_level = c.ci_level;
  cfg.pulse_cutoff = c.cutoff;
  cfg.shape = parse_shape(c.shape);
  cfg.validate();
  return cfg;
}

struct ImpulseArgs {
  std::string impulse;  // optional JSON file
  double beta = 0.0;    // 0 keeps the file/fitted value
};

void add_impulse(CLI::App* cmd, ImpulseArgs& i) {
  cmd->add_option("--impulse", i.impulse, "JSON impulse-response parameters (defaults: fitted instrument)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--beta", i.beta, "Override the pulse peak amplitude (0 keeps the default)")->capture_default_str();
}

ImpulseParams impulse_params(const ImpulseArgs& a, PulseShape shape) {
  ImpulseParams phi = shape == PulseShape::Gaussian ? ImpulseParams::fitted_gaussian() : ImpulseParams::fitted_piecewise();
  if (!a.impulse.empty()) phi = impulse_from_json(read_json(a.impulse), phi);
  if (a.beta > 0.0) phi.beta = a.beta;
  phi.validate();
  return phi;
}

struct UnmixArgs {
  Common common;
  BandOptions bands;
  ChainArgs chain;
  ImpulseArgs impulse;
  std::string waveforms, spectra, layers, samples;
};

void cmd_unmix(const CLI::App& cmd, const UnmixArgs& a) {
  const WaveformSet ws = read_waveforms_csv(a.waveforms);
  const auto spectra = load_spectra(a.spectra);
  const SpectralLibrary lib = resample_bands(spectra, ws.bands(), a.bands.lo, a.bands.hi);
  const ChainConfig cfg = chain_config(a.chain, a.common.seed);
  const ImpulseParams phi = impulse_params(a.impulse, cfg.shape);
  const Hyperparams hyper{a.chain.alpha2, a.chain.gamma2};
  hyper.validate();

  ChainOutput out;
  if (a.layers.empty()) {
    out = run_single_layer(ws.Y, lib, phi, hyper, cfg);
  } else {
    out = run_multi_layer(ws.Y, lib, phi, parse_list(a.layers, "--layers"), hyper, cfg);
  }
  json summary = chain_summary_json(out);
  summary["band_wavelengths"] = lib.band_wavelengths;
  write_json(a.common.out, summary);
  std::vector<fs::path> outputs{a.common.out};
  if (!a.samples.empty()) {
    write_samples_csv(a.samples, out);
    outputs.emplace_back(a.samples);
  }
  write_manifest(cmd, a.common, {{"waveforms", a.waveforms}, {"spectra", a.spectra}}, outputs,
                 {{"impulse", impulse_to_json(phi)}});
}

// crlb / sweep --------------------------------------------------------------

struct CrlbArgs {
  Common common;
  BandOptions bands;
  std::string spectra, scene;
  double sigma2 = 105.68;
  double cap = kDefaultConditionCap;
  bool nested = false;
  int nested_max = 32;
  // sweep only
  std::string axis, grid;
  std::string w = "0.2,0.3,0.4";
  double t0 = 1000.0, background = 10.0, beta = 3000.0;
  int T = 2500;
};

void add_crlb_common(CLI::App* cmd, CrlbArgs& a) {
  cmd->add_option("--spectra", a.spectra, "Material spectra CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--sigma2", a.sigma2, "Variance of the Gaussian pulse approximation (bins^2)")->capture_default_str();
  cmd->add_option("--condition-cap", a.cap, "Largest accepted Fisher condition number")->capture_default_str();
  cmd->add_flag("--nested", a.nested, "Take L bands as a stride of the --nested-max grid");
  cmd->add_option("--nested-max", a.nested_max, "Band count of the nested grid")->capture_default_str();
}

CrlbConfig crlb_config(const CrlbArgs& a, bool scene_required) {
  CrlbConfig cfg;
  cfg.spectra = load_spectra(a.spectra);
  cfg.L = a.bands.bands;
  cfg.band_lo = a.bands.lo;
  cfg.band_hi = a.bands.hi;
  cfg.nested = a.nested;
  cfg.nested_max = a.nested_max;
  cfg.sigma2 = a.sigma2;
  cfg.condition_cap = a.cap;
  if (!a.scene.empty()) {
    const SceneConfig scene = scene_from_json(read_json(a.scene), cfg.L);
    if (!scene.single) throw ValidationError("crlb: the scene must be single-layer");
    cfg.w = scene.single->w;
    cfg.t0 = scene.single->t0;
    const Eigen::VectorXd& b = scene.single->b;
    if ((b.array() != b(0)).any()) throw ValidationError("crlb: the scene background must be the same in every band");
    cfg.background = b(0);
    cfg.beta = scene.phi.beta;
    cfg.T = scene.T;
  } else {
    if (scene_required) throw ValidationError("crlb: --scene is required");
    const auto w = parse_list(a.w, "--w");
    cfg.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    cfg.t0 = a.t0;
    cfg.background = a.background;
    cfg.beta = a.beta;
    cfg.T = a.T;
  }
  cfg.validate();
  return cfg;
}

void cmd_crlb(const CLI::App& cmd, const CrlbArgs& a) {
  const CrlbConfig cfg = crlb_config(a, true);
  const CrlbReport rep = compute_crlb(cfg);
  write_json(a.common.out, crlb_to_json(rep));
  write_manifest(cmd, a.common, {{"spectra", a.spectra}, {"scene", a.scene}}, {a.common.out},
                 {{"band_wavelengths", cfg.library().band_wavelengths}});
}

void cmd_sweep(const CLI::App& cmd, const CrlbArgs& a) {
  const CrlbConfig cfg = crlb_config(a, false);
  const SweepAxis axis = parse_axis(a.axis);
  const auto points = sweep(cfg, axis, parse_list(a.grid, "--grid"));
  write_sweep_csv(a.common.out, points);
  write_manifest(cmd, a.common, {{"spectra", a.spectra}, {"scene", a.scene}}, {a.common.out});
}

// bench ---------------------------------------------------------------------

struct BenchArgs {
  Common common;
  BandOptions bands;
  ChainArgs chain;
  std::string spectra, scene;
  int runs = 100;
  std::string estimators = "bayes,baseline";
  double sigma2 = 105.68;
  bool keep_runs = false;
};

void cmd_bench(const CLI::App& cmd, const BenchArgs& a) {
  BenchConfig cfg;
  cfg.lib = resample_bands(load_spectra(a.spectra), a.bands.bands, a.bands.lo, a.bands.hi);
  const SceneConfig scene = scene_from_json(read_json(a.scene), cfg.lib.bands());
  cfg.phi = scene.phi;
  cfg.shape = scene.shape;
  cfg.T = scene.T;
  cfg.single = scene.single;
  cfg.multi = scene.multi;
  cfg.n_runs = a.runs;
  cfg.chain = chain_config(a.chain, a.common.seed);
  cfg.hyper = {a.chain.alpha2, a.chain.gamma2};
  cfg.seed = a.common.seed;
  cfg.estimators.clear();
  for (const auto& name : split_names(a.estimators)) cfg.estimators.push_back(parse_estimator(name));
  cfg.crlb_sigma2 = a.sigma2;
  cfg.keep_runs = a.keep_runs;
  cfg.validate();

  const BenchReport rep = mse_monte_carlo(cfg);
  emit_report(rep, a.common.out);
  fs::path json_out = a.common.out;
  json_out.replace_extension(".json");
  write_manifest(cmd, a.common, {{"spectra", a.spectra}, {"scene", a.scene}}, {a.common.out, json_out},
                 {{"scene", scene_to_json(scene)}});
  for (const auto& r : rep.results) {
    if (r.failures > 0) std::cerr << to_string(r.estimator) << ": " << r.failures << " failed run(s)\n";
  }
}

// synth-spectra -------------------------------------------------------------

struct SynthArgs {
  Common common;
  int materials = 3;
  int points = 211;
  double lo = 400.0, hi = 2500.0;
  std::string corr, names, means, spreads;
};

void cmd_synth(const CLI::App& cmd, const SynthArgs& a) {
  const int R = a.materials;
  if (R < 1) throw ValidationError("--materials must be >= 1");
  Eigen::MatrixXd target = Eigen::MatrixXd::Identity(R, R);
  if (!a.corr.empty()) {
    const auto upper = parse_list(a.corr, "--corr");
    if (static_cast<int>(upper.size()) != R * (R - 1) / 2) {
      throw ValidationError("--corr needs R(R-1)/2 values (upper triangle, row by row)");
    }
    std::size_t k = 0;
    for (int i = 0; i < R; ++i) {
      for (int j = i + 1; j < R; ++j) target(i, j) = target(j, i) = upper[k++];
    }
  }
  SynthOptions opt;
  opt.lo = a.lo;
  opt.hi = a.hi;
  if (!a.names.empty()) opt.names = split_names(a.names);
  if (!a.means.empty()) opt.mean_levels = parse_list(a.means, "--means");
  if (!a.spreads.empty()) opt.spreads = parse_list(a.spreads, "--spreads");
  const SpectralLibrary lib = synth_library(R, a.points, target, a.common.seed, opt);
  write_spectra_csv(a.common.out, library_spectra(lib));
  const Eigen::MatrixXd corr = pairwise_correlation(lib);
  json achieved = json::array();
  for (int i = 0; i < R; ++i) {
    achieved.push_back(std::vector<double>(static_cast<std::size_t>(R)));
    for (int j = 0; j < R; ++j) achieved[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = corr(i, j);
  }
  write_manifest(cmd, a.common, json::object(), {a.common.out}, {{"achieved_correlation", achieved}});
}

int report(const std::string& kind, const std::string& what, int code) {
  std::cerr << "mslu: " << kind << ": " << what << "\n";
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multispectral Lidar spectral unmixing toolkit", "mslu"};
  app.set_version_flag("--version", MSLU_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key=value file of option defaults; explicit flags win")
      ->check(CLI::ExistingFile);
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate photon-count waveforms for a scene");
  add_common(c_sim, sim.common);
  add_bands(c_sim, sim.bands);
  c_sim->add_option("--scene", sim.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--spectra", sim.spectra, "Material spectra CSV")->required()->check(CLI::ExistingFile);

  UnmixArgs unmix;
  auto* c_unmix = app.add_subcommand("unmix", "Estimate areas, position and backgrounds by MCMC");
  add_common(c_unmix, unmix.common);
  add_bands(c_unmix, unmix.bands, false);
  add_chain(c_unmix, unmix.chain);
  add_impulse(c_unmix, unmix.impulse);
  c_unmix->add_option("--waveforms", unmix.waveforms, "Waveform CSV (band,bin,count)")->required()->check(CLI::ExistingFile);
  c_unmix->add_option("--spectra", unmix.spectra, "Material spectra CSV")->required()->check(CLI::ExistingFile);
  c_unmix->add_option("--layers", unmix.layers, "Known layer positions, e.g. 1000,1500,2000 (multi-layer model)");
  c_unmix->add_option("--samples", unmix.samples, "Also write post-burn-in samples to this CSV");

  CrlbArgs crlb;
  auto* c_crlb = app.add_subcommand("crlb", "Cramer-Rao bounds for a single-layer scene");
  add_common(c_crlb, crlb.common);
  add_bands(c_crlb, crlb.bands);
  add_crlb_common(c_crlb, crlb);
  c_crlb->add_option("--scene", crlb.scene, "Scene JSON")->required()->check(CLI::ExistingFile);

  CrlbArgs sw;
  auto* c_sweep = app.add_subcommand("sweep", "Cramer-Rao bounds along one design axis");
  add_common(c_sweep, sw.common);
  add_bands(c_sweep, sw.bands);
  add_crlb_common(c_sweep, sw);
  c_sweep->add_option("--axis", sw.axis, "bands|beta|background")->required();
  c_sweep->add_option("--grid", sw.grid, "Comma-separated axis values")->required();
  c_sweep->add_option("--scene", sw.scene, "Scene JSON (otherwise the flags below)")->check(CLI::ExistingFile);
  c_sweep->add_option("--w", sw.w, "Areas")->capture_default_str();
  c_sweep->add_option("--t0", sw.t0, "Target position (bins)")->capture_default_str();
  c_sweep->add_option("--background", sw.background, "Background level per band")->capture_default_str();
  c_sweep->add_option("--beta", sw.beta, "Pulse peak amplitude")->capture_default_str();
  c_sweep->add_option("--bins", sw.T, "Number of time bins")->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Monte-Carlo MSE of the estimators against the CRLB");
  add_common(c_bench, bench.common);
  add_bands(c_bench, bench.bands);
  add_chain(c_bench, bench.chain);
  c_bench->add_option("--spectra", bench.spectra, "Material spectra CSV")->required()->check(CLI::ExistingFile);
  c_bench->add_option("--scene", bench.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  c_bench->add_option("--runs", bench.runs, "Monte-Carlo runs")->capture_default_str();
  c_bench->add_option("--estimators", bench.estimators, "Comma-separated subset of bayes,baseline")
      ->capture_default_str();
  c_bench->add_option("--sigma2", bench.sigma2, "Gaussian pulse variance for the bound")->capture_default_str();
  c_bench->add_flag("--keep-runs", bench.keep_runs, "Include per-run estimates in the JSON report");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-spectra", "Generate smooth synthetic spectra with set correlations");
  add_common(c_synth, synth.common);
  c_synth->add_option("--materials", synth.materials, "Number of materials")->capture_default_str();
  c_synth->add_option("--points", synth.points, "Wavelength samples")->capture_default_str();
  c_synth->add_option("--lo", synth.lo, "First wavelength (nm)")->capture_default_str();
  c_synth->add_option("--hi", synth.hi, "Last wavelength (nm)")->capture_default_str();
  c_synth->add_option("--corr", synth.corr, "Target correlations, upper triangle row by row");
  c_synth->add_option("--names", synth.names, "Comma-separated material names");
  c_synth->add_option("--means", synth.means, "Comma-separated mean reflectances");
  c_synth->add_option("--spreads", synth.spreads, "Comma-separated reflectance spreads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*c_sim) {
      apply_threads(sim.common);
      cmd_simulate(*c_sim, sim);
    } else if (*c_unmix) {
      apply_threads(unmix.common);
      cmd_unmix(*c_unmix, unmix);
    } else if (*c_crlb) {
      apply_threads(crlb.common);
      cmd_crlb(*c_crlb, crlb);
    } else if (*c_sweep) {
      apply_threads(sw.common);
      cmd_sweep(*c_sweep, sw);
    } else if (*c_bench) {
      apply_threads(bench.common);
      cmd_bench(*c_bench, bench);
    } else if (*c_synth) {
      apply_threads(synth.common);
      cmd_synth(*c_synth, synth);
    }
  } catch (const ValidationError& e) {
    return report("invalid input", e.what(), kExitValidation);
  } catch (const nlohmann::json::exception& e) {
    return report("invalid input", e.what(), kExitValidation);
  } catch (const IoError& e) {
    return report("I/O error", e.what(), kExitIo);
  } catch (const NumericalError& e) {
    return report("numerical failure", e.what(), kExitNumerical);
  } catch (const std::exception& e) {
    return report("error", e.what(), kExitIo);
  }
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"mslu"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mslu
