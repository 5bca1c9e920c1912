#include "mslu/forward_model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mslu/rng.hpp"

namespace mslu {

void ImpulseParams::validate() const {
  const double fields[] = {T1, T2, T3, tau1, tau2, tau3, sigma2, beta};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ValidationError("impulse parameters must be finite and strictly positive");
    }
  }
  if (!(T2 < T3)) throw ValidationError("impulse parameters: need T2 < T3");
}

PulseShape parse_shape(const std::string& name) {
  if (name == "piecewise") return PulseShape::Piecewise;
  if (name == "gaussian") return PulseShape::Gaussian;
  throw ValidationError("unknown pulse shape '" + name + "' (expected piecewise|gaussian)");
}

std::string to_string(PulseShape shape) {
  return shape == PulseShape::Piecewise ? "piecewise" : "gaussian";
}

double g_piecewise(double t, double t0, const ImpulseParams& p) {
  const double u = t - t0;
  const double two_s2 = 2.0 * p.sigma2;
  if (u < -p.T1) return p.beta * std::exp(-p.T1 * p.T1 / two_s2 + (u + p.T1) / p.tau1);
  if (u < p.T2) return p.beta * std::exp(-u * u / two_s2);
  const double knee = -p.T2 * p.T2 / two_s2;
  if (u < p.T3) return p.beta * std::exp(knee - (u - p.T2) / p.tau2);
  return p.beta * std::exp(knee - (p.T3 - p.T2) / p.tau2 - (u - p.T3) / p.tau3);
}

double g_gaussian(double t, double t0, double beta, double sigma2) {
  const double u = t - t0;
  return beta * std::exp(-u * u / (2.0 * sigma2));
}

double pulse(PulseShape shape, double t, double t0, const ImpulseParams& phi) {
  return shape == PulseShape::Piecewise ? g_piecewise(t, t0, phi)
                                        : g_gaussian(t, t0, phi.beta, phi.sigma2);
}

std::pair<double, double> pulse_support(PulseShape shape, const ImpulseParams& phi, double cutoff) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(cutoff > 0.0)) return {-inf, inf};
  const double level = cutoff * phi.beta;
  // Both shapes are unimodal with the peak at u = 0; bisect each flank.
  auto edge = [&](double direction) {
    double inside = 0.0;
    double outside = direction;
    int doublings = 0;
    while (pulse(shape, outside, 0.0, phi) >= level) {
      inside = outside;
      outside *= 2.0;
      if (++doublings > 80) return direction * inf;
    }
    for (int i = 0; i < 200 && std::fabs(outside - inside) > 1e-9; ++i) {
      const double mid = 0.5 * (inside + outside);
      (pulse(shape, mid, 0.0, phi) >= level ? inside : outside) = mid;
    }
    return outside;
  };
  return {edge(-1.0), edge(1.0)};
}

void SceneSingle::validate(int R, int L, int T) const {
  if (w.size() != R) throw ValidationError("scene: w has " + std::to_string(w.size()) +
                                           " entries, library has " + std::to_string(R) + " materials");
  if (b.size() != L) throw ValidationError("scene: b has " + std::to_string(b.size()) +
                                           " entries, library has " + std::to_string(L) + " bands");
  if ((w.array() < 0.0).any() || !w.allFinite()) throw ValidationError("scene: w must be >= 0");
  if ((b.array() < 0.0).any() || !b.allFinite()) throw ValidationError("scene: b must be >= 0");
  if (!(t0 > 1.0 && t0 < T)) throw ValidationError("scene: t0 must lie in (1, T)");
}

void SceneMulti::validate(int R, int L) const {
  const int D = layers();
  if (D < 1) throw ValidationError("scene: need at least one layer");
  if (W.rows() != R || W.cols() != D) {
    throw ValidationError("scene: W must be R x D (" + std::to_string(R) + " x " + std::to_string(D) + ")");
  }
  if (b.size() != L) throw ValidationError("scene: b must have L entries");
  if ((W.array() < 0.0).any() || !W.allFinite()) throw ValidationError("scene: W must be >= 0");
  if ((b.array() < 0.0).any() || !b.allFinite()) throw ValidationError("scene: b must be >= 0");
  for (int d = 1; d < D; ++d) {
    if (!(layer_positions[static_cast<std::size_t>(d)] > layer_positions[static_cast<std::size_t>(d - 1)])) {
      throw ValidationError("scene: layer positions must be strictly increasing");
    }
  }
}

void WaveformSet::validate() const {
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      const double y = Y(i, j);
      if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y)) {
        throw ValidationError("waveforms: count at band " + std::to_string(i + 1) + ", bin " +
                              std::to_string(j + 1) + " is not a nonnegative integer");
      }
    }
  }
  if (!band_wavelengths.empty() && static_cast<Eigen::Index>(band_wavelengths.size()) != Y.rows()) {
    throw ValidationError("waveforms: band_wavelengths size differs from band count");
  }
}

Eigen::MatrixXd intensity_single(const SpectralLibrary& lib, const SceneSingle& scene,
                                 const ImpulseParams& phi, int T, PulseShape shape) {
  SceneMulti as_multi;
  as_multi.layer_positions = {scene.t0};
  as_multi.W = scene.w;
  as_multi.b = scene.b;
  if (scene.w.size() != lib.materials() || scene.b.size() != lib.bands()) {
    throw ValidationError("intensity_single: dimension mismatch between scene and library");
  }
  return intensity_multi(lib, as_multi, phi, T, shape);
}

Eigen::MatrixXd intensity_multi(const SpectralLibrary& lib, const SceneMulti& scene,
                                const ImpulseParams& phi, int T, PulseShape shape) {
  if (T < 0) throw ValidationError("intensity: T must be >= 0");
  scene.validate(lib.materials(), lib.bands());
  phi.validate();
  const int L = lib.bands();
  const int D = scene.layers();
  // Per-layer pulse over bins, then per-layer band amplitudes.
  Eigen::MatrixXd G(D, T);
  for (int d = 0; d < D; ++d) {
    for (int t = 0; t < T; ++t) {
      G(d, t) = pulse(shape, t + 1.0, scene.layer_positions[static_cast<std::size_t>(d)], phi);
    }
  }
  const Eigen::MatrixXd A = lib.M * scene.W;  // L x D
  Eigen::MatrixXd lambda(L, T);
#pragma omp parallel for schedule(static)
  for (int l = 0; l < L; ++l) {
    lambda.row(l) = A.row(l) * G;
    lambda.row(l).array() += scene.b(l);
  }
  return lambda;
}

WaveformSet simulate(const Eigen::MatrixXd& intensity, std::uint64_t seed) {
  if (!intensity.allFinite() || (intensity.array() < 0.0).any()) {
    throw ValidationError("simulate: intensity must be finite and >= 0");
  }
  WaveformSet ws;
  ws.Y.resize(intensity.rows(), intensity.cols());
  const auto L = static_cast<int>(intensity.rows());
#pragma omp parallel for schedule(static)
  for (int l = 0; l < L; ++l) {
    Rng rng = Rng::substream(seed, Stream::Simulate, static_cast<std::uint64_t>(l));
    for (Eigen::Index t = 0; t < intensity.cols(); ++t) {
      ws.Y(l, t) = static_cast<double>(rng.poisson(intensity(l, t)));
    }
  }
  return ws;
}

void write_waveforms_csv(const std::filesystem::path& path, const WaveformSet& ws) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write waveform file: " + path.string());
  out << "band,bin,count\n";
  for (int l = 0; l < ws.bands(); ++l) {
    for (int t = 0; t < ws.bins(); ++t) {
      out << (l + 1) << ',' << (t + 1) << ',' << static_cast<long long>(ws.Y(l, t)) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

WaveformSet read_waveforms_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open waveform file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("band,bin,count", 0) != 0) {
    throw ValidationError(path.string() + ": header must be 'band,bin,count'");
  }
  struct Entry {
    long long band, bin;
    double count;
  };
  std::vector<Entry> entries;
  long long L = 0, T = 0;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    Entry e{};
    char c1 = 0, c2 = 0;
    if (!(ss >> e.band >> c1 >> e.bin >> c2 >> e.count) || c1 != ',' || c2 != ',' || e.band < 1 ||
        e.bin < 1) {
      throw ValidationError(path.string() + " row " + std::to_string(row) + ": malformed entry");
    }
    L = std::max(L, e.band);
    T = std::max(T, e.bin);
    entries.push_back(e);
  }
  if (static_cast<long long>(entries.size()) != L * T) {
    throw ValidationError(path.string() + ": expected a full " + std::to_string(L) + " x " +
                          std::to_string(T) + " grid of counts");
  }
  WaveformSet ws;
  ws.Y = Eigen::MatrixXd::Constant(L, T, -1.0);
  for (const auto& e : entries) ws.Y(e.band - 1, e.bin - 1) = e.count;
  if ((ws.Y.array() < 0.0).any()) throw ValidationError(path.string() + ": duplicate or missing entries");
  ws.validate();
  return ws;
}

nlohmann::json impulse_to_json(const ImpulseParams& p) {
  return {{"T1", p.T1},     {"T2", p.T2},     {"T3", p.T3},         {"tau1", p.tau1},
          {"tau2", p.tau2}, {"tau3", p.tau3}, {"sigma2", p.sigma2}, {"beta", p.beta}};
}

ImpulseParams impulse_from_json(const nlohmann::json& j, ImpulseParams p) {
  if (!j.is_object()) throw ValidationError("phi must be a JSON object");
  for (auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ValidationError("phi." + key + " must be a number");
    const double v = value.get<double>();
    if (key == "T1") p.T1 = v;
    else if (key == "T2") p.T2 = v;
    else if (key == "T3") p.T3 = v;
    else if (key == "tau1") p.tau1 = v;
    else if (key == "tau2") p.tau2 = v;
    else if (key == "tau3") p.tau3 = v;
    else if (key == "sigma2") p.sigma2 = v;
    else if (key == "beta") p.beta = v;
    else throw ValidationError("phi: unknown field '" + key + "'");
  }
  p.validate();
  return p;
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(what + " must be an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

SceneConfig scene_from_json(const nlohmann::json& j, int L) {
  if (!j.is_object()) throw ValidationError("scene must be a JSON object");
  SceneConfig cfg;
  if (j.contains("T")) cfg.T = j.at("T").get<int>();
  if (cfg.T < 2) throw ValidationError("scene: T must be >= 2");
  if (j.contains("shape")) cfg.shape = parse_shape(j.at("shape").get<std::string>());
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  const ImpulseParams defaults =
      cfg.shape == PulseShape::Gaussian ? ImpulseParams::fitted_gaussian() : ImpulseParams::fitted_piecewise();
  cfg.phi = j.contains("phi") ? impulse_from_json(j.at("phi"), defaults) : defaults;

  Eigen::VectorXd b;
  if (!j.contains("b")) throw ValidationError("scene: missing 'b'");
  if (j.at("b").is_number()) {
    b = Eigen::VectorXd::Constant(L, j.at("b").get<double>());
  } else {
    b = vector_from_json(j.at("b"), "scene.b");
  }

  const bool single = j.contains("w") || j.contains("t0");
  const bool multi = j.contains("W") || j.contains("layer_positions");
  if (single == multi) {
    throw ValidationError("scene: give either {w, t0} or {W, layer_positions}");
  }
  if (single) {
    SceneSingle s;
    s.w = vector_from_json(j.at("w"), "scene.w");
    s.t0 = j.at("t0").get<double>();
    s.b = b;
    cfg.single = s;
  } else {
    SceneMulti m;
    const auto positions = vector_from_json(j.at("layer_positions"), "scene.layer_positions");
    m.layer_positions.assign(positions.data(), positions.data() + positions.size());
    const auto& layers = j.at("W");
    if (!layers.is_array() || layers.size() != m.layer_positions.size()) {
      throw ValidationError("scene: W must list one area vector per layer");
    }
    for (std::size_t d = 0; d < layers.size(); ++d) {
      const auto col = vector_from_json(layers[d], "scene.W[" + std::to_string(d) + "]");
      if (d == 0) m.W.resize(col.size(), static_cast<Eigen::Index>(layers.size()));
      if (col.size() != m.W.rows()) throw ValidationError("scene: ragged W");
      m.W.col(static_cast<Eigen::Index>(d)) = col;
    }
    m.b = b;
    cfg.multi = m;
  }
  return cfg;
}

nlohmann::json scene_to_json(const SceneConfig& scene) {
  nlohmann::json j;
  j["T"] = scene.T;
  j["shape"] = to_string(scene.shape);
  j["seed"] = scene.seed;
  j["phi"] = impulse_to_json(scene.phi);
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  if (scene.single) {
    j["w"] = vec(scene.single->w);
    j["t0"] = scene.single->t0;
    j["b"] = vec(scene.single->b);
  } else if (scene.multi) {
    j["layer_positions"] = scene.multi->layer_positions;
    nlohmann::json W = nlohmann::json::array();
    for (Eigen::Index d = 0; d < scene.multi->W.cols(); ++d) W.push_back(vec(scene.multi->W.col(d)));
    j["W"] = W;
    j["b"] = vec(scene.multi->b);
  }
  return j;
}

}  // namespace mslu
