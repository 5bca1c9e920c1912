#include "mslu/spectral_library.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "mslu/rng.hpp"

namespace mslu {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw SpectraParseError(where + ": cannot parse '" + field + "' as a number");
  }
  return v;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const auto hi = static_cast<std::size_t>(it - x.begin());
  if (hi == 0) return y.front();  // caller checked support; at == x.front() not reachable
  const std::size_t lo = hi - 1;
  if (x[lo] == at || hi == x.size()) return y[lo];
  const double frac = (at - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + (y[hi] - y[lo]) * frac;
}

}  // namespace

void MaterialSpectrum::validate() const {
  if (wavelengths.size() != reflectance.size()) {
    throw ValidationError("spectrum '" + name + "': wavelength/reflectance length mismatch");
  }
  if (wavelengths.size() < 2) {
    throw ValidationError("spectrum '" + name + "': need at least 2 samples");
  }
  for (std::size_t i = 0; i < wavelengths.size(); ++i) {
    if (i > 0 && !(wavelengths[i] > wavelengths[i - 1])) {
      throw SpectraOrderError("spectrum '" + name + "': wavelengths not strictly increasing at sample " +
                              std::to_string(i + 1));
    }
    if (!(reflectance[i] >= 0.0 && reflectance[i] <= 1.0)) {
      throw SpectraRangeError("spectrum '" + name + "': reflectance outside [0,1] at sample " +
                              std::to_string(i + 1));
    }
  }
}

void SpectralLibrary::validate() const {
  if (M.rows() < 1 || M.cols() < 1) throw ValidationError("library: need L >= 1 and R >= 1");
  if (static_cast<Eigen::Index>(band_wavelengths.size()) != M.rows()) {
    throw ValidationError("library: band_wavelengths size differs from M rows");
  }
  if (static_cast<Eigen::Index>(material_names.size()) != M.cols()) {
    throw ValidationError("library: material_names size differs from M columns");
  }
  if (!((M.array() >= 0.0).all() && (M.array() <= 1.0).all())) {
    throw ValidationError("library: entries of M must lie in [0,1]");
  }
}

std::vector<MaterialSpectrum> parse_spectra_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw SpectraParseError(source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "wavelength_nm") {
    throw SpectraParseError(source + ": header must be 'wavelength_nm,<name1>,...'");
  }
  std::vector<MaterialSpectrum> spectra(header.size() - 1);
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) {
      throw SpectraParseError(source + ": empty material name in column " + std::to_string(c + 1));
    }
    spectra[c - 1].name = header[c];
  }

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = source + " row " + std::to_string(row);
    if (fields.size() != header.size()) {
      throw SpectraParseError(where + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(fields.size()));
    }
    const double wl = parse_number(fields[0], where + " column 1");
    if (!spectra[0].wavelengths.empty() && !(wl > spectra[0].wavelengths.back())) {
      throw SpectraOrderError(where + ": wavelength " + fields[0] + " is not greater than the previous row");
    }
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string cell = where + " column " + std::to_string(c + 1) + " (" + header[c] + ")";
      const double r = parse_number(fields[c], cell);
      if (r < 0.0 || r > 1.0) {
        throw SpectraRangeError(cell + ": reflectance " + fields[c] + " outside [0,1]");
      }
      spectra[c - 1].wavelengths.push_back(wl);
      spectra[c - 1].reflectance.push_back(r);
    }
  }
  for (const auto& s : spectra) s.validate();
  return spectra;
}

std::vector<MaterialSpectrum> load_spectra(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spectra file: " + path.string());
  return parse_spectra_csv(in, path.string());
}

void write_spectra_csv(const std::filesystem::path& path,
                       const std::vector<MaterialSpectrum>& spectra) {
  if (spectra.empty()) throw ValidationError("write_spectra_csv: no spectra");
  for (const auto& s : spectra) {
    if (s.wavelengths != spectra.front().wavelengths) {
      throw ValidationError("write_spectra_csv: spectra must share one wavelength grid");
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write spectra file: " + path.string());
  out << "wavelength_nm";
  for (const auto& s : spectra) out << ',' << s.name;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < spectra.front().wavelengths.size(); ++i) {
    out << spectra.front().wavelengths[i];
    for (const auto& s : spectra) out << ',' << s.reflectance[i];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> band_grid(int L, double lo, double hi) {
  if (L < 1) throw ValidationError("band_grid: L must be >= 1");
  if (!(lo <= hi)) throw ValidationError("band_grid: need lo <= hi");
  if (L == 1) return {0.5 * (lo + hi)};
  std::vector<double> grid(static_cast<std::size_t>(L));
  const double step = (hi - lo) / static_cast<double>(L - 1);
  for (int i = 0; i < L; ++i) grid[static_cast<std::size_t>(i)] = lo + step * i;
  grid.back() = hi;
  return grid;
}

SpectralLibrary resample_at(const std::vector<MaterialSpectrum>& spectra,
                            const std::vector<double>& centers) {
  if (spectra.empty()) throw ValidationError("resample: no spectra given");
  if (centers.empty()) throw ValidationError("resample: no band centers");
  SpectralLibrary lib;
  lib.band_wavelengths = centers;
  lib.M.resize(static_cast<Eigen::Index>(centers.size()), static_cast<Eigen::Index>(spectra.size()));
  for (std::size_t r = 0; r < spectra.size(); ++r) {
    const auto& s = spectra[r];
    s.validate();
    lib.material_names.push_back(s.name);
    for (std::size_t l = 0; l < centers.size(); ++l) {
      const double at = centers[l];
      if (at < s.wavelengths.front() || at > s.wavelengths.back()) {
        std::ostringstream msg;
        msg << "resample: band " << at << " nm outside support [" << s.wavelengths.front() << ", "
            << s.wavelengths.back() << "] of spectrum '" << s.name << "'";
        throw ValidationError(msg.str());
      }
      lib.M(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(r)) =
          interpolate(s.wavelengths, s.reflectance, at);
    }
  }
  return lib;
}

SpectralLibrary resample_bands(const std::vector<MaterialSpectrum>& spectra, int L, double lo,
                               double hi) {
  return resample_at(spectra, band_grid(L, lo, hi));
}

std::vector<MaterialSpectrum> library_spectra(const SpectralLibrary& lib) {
  std::vector<MaterialSpectrum> out;
  for (int r = 0; r < lib.materials(); ++r) {
    MaterialSpectrum s;
    s.name = lib.material_names[static_cast<std::size_t>(r)];
    s.wavelengths = lib.band_wavelengths;
    s.reflectance.assign(lib.M.col(r).data(), lib.M.col(r).data() + lib.M.rows());
    out.push_back(std::move(s));
  }
  return out;
}

Eigen::MatrixXd pairwise_correlation(const SpectralLibrary& lib) {
  if (lib.bands() < 2) throw ValidationError("pairwise_correlation: need L >= 2");
  const Eigen::MatrixXd centered = lib.M.rowwise() - lib.M.colwise().mean();
  const Eigen::VectorXd norms = centered.colwise().norm();
  for (int r = 0; r < lib.materials(); ++r) {
    if (!(norms(r) > 0.0)) {
      throw NumericalError("pairwise_correlation: material '" +
                           lib.material_names[static_cast<std::size_t>(r)] +
                           "' has zero variance; correlation undefined");
    }
  }
  Eigen::MatrixXd corr = (centered.transpose() * centered).array() / (norms * norms.transpose()).array();
  corr.diagonal().setOnes();
  return 0.5 * (corr + corr.transpose());
}

SpectralLibrary synth_library(int R, int L, const Eigen::MatrixXd& target_corr, std::uint64_t seed,
                              const SynthOptions& options) {
  if (R < 1 || L < 1) throw ValidationError("synth_library: need R >= 1 and L >= 1");
  if (target_corr.rows() != R || target_corr.cols() != R) {
    throw ValidationError("synth_library: target_corr must be R x R");
  }
  if (!target_corr.isApprox(target_corr.transpose(), 1e-12) ||
      !(target_corr.diagonal().array() == 1.0).all() ||
      (target_corr.array().abs() > 1.0).any()) {
    throw ValidationError("synth_library: target_corr must be symmetric, unit-diagonal, within [-1,1]");
  }
  if ((!options.mean_levels.empty() && static_cast<int>(options.mean_levels.size()) != R) ||
      (!options.spreads.empty() && static_cast<int>(options.spreads.size()) != R) ||
      (!options.names.empty() && static_cast<int>(options.names.size()) != R)) {
    throw ValidationError("synth_library: per-material option vectors must have R entries");
  }

  // Factor target = F F^T (positive semidefinite targets allowed).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(target_corr);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw NumericalError("synth_library: target correlation matrix is not positive semidefinite");
  }
  const Eigen::MatrixXd F =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  SpectralLibrary lib;
  lib.band_wavelengths = band_grid(L, options.lo, options.hi);
  for (int r = 0; r < R; ++r) {
    lib.material_names.push_back(options.names.empty() ? "material" + std::to_string(r + 1)
                                                       : options.names[static_cast<std::size_t>(r)]);
  }

  for (int attempt = 0; attempt < std::max(1, options.max_retries); ++attempt) {
    Rng rng = Rng::substream(seed, Stream::Synth, static_cast<std::uint64_t>(attempt));
    std::vector<double> level(static_cast<std::size_t>(R)), spread(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) {
      const double drawn_level = 0.2 + 0.4 * rng.uniform();
      const double drawn_spread = 0.05 + 0.10 * rng.uniform();
      level[static_cast<std::size_t>(r)] =
          options.mean_levels.empty() ? drawn_level : options.mean_levels[static_cast<std::size_t>(r)];
      spread[static_cast<std::size_t>(r)] =
          options.spreads.empty() ? drawn_spread : options.spreads[static_cast<std::size_t>(r)];
    }
    if (L == 1) {
      lib.M.resize(1, R);
      for (int r = 0; r < R; ++r) lib.M(0, r) = std::clamp(level[static_cast<std::size_t>(r)], 0.0, 1.0);
      return lib;
    }

    // Smooth random curves: low-order cosine series with 1/k amplitude decay.
    constexpr int kHarmonics = 6;
    Eigen::MatrixXd Z(L, R);
    for (int r = 0; r < R; ++r) {
      double coef[kHarmonics], phase[kHarmonics];
      for (int k = 0; k < kHarmonics; ++k) {
        coef[k] = rng.normal() / (k + 1.0);
        phase[k] = 2.0 * std::numbers::pi * rng.uniform();
      }
      for (int l = 0; l < L; ++l) {
        const double x = static_cast<double>(l) / (L - 1);
        double v = 0.0;
        for (int k = 0; k < kHarmonics; ++k) v += coef[k] * std::cos(std::numbers::pi * (k + 1) * x + phase[k]);
        Z(l, r) = v;
      }
    }
    // Zero-mean orthonormal columns, then impose the correlation structure.
    Z = Z.rowwise() - Z.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(L, R);
    const Eigen::VectorXd rdiag = qr.matrixQR().diagonal().head(std::min(L, R)).cwiseAbs();
    if (R > L - 1 || rdiag.minCoeff() < 1e-8 * std::max(1.0, rdiag.maxCoeff())) continue;
    Eigen::MatrixXd X = Q * F.transpose();
    X = X.rowwise() - X.colwise().mean();

    lib.M.resize(L, R);
    for (int r = 0; r < R; ++r) {
      const double sd = std::sqrt(X.col(r).squaredNorm() / L);
      const double lv = std::clamp(level[static_cast<std::size_t>(r)], 0.02, 0.98);
      double scale = sd > 0.0 ? spread[static_cast<std::size_t>(r)] / sd : 0.0;
      const double top = X.col(r).maxCoeff();
      const double bottom = X.col(r).minCoeff();
      if (top > 0.0) scale = std::min(scale, (0.99 - lv) / top);
      if (bottom < 0.0) scale = std::min(scale, (lv - 0.01) / -bottom);
      lib.M.col(r) = (lv + scale * X.col(r).array()).matrix();
    }
    lib.M = lib.M.cwiseMax(0.0).cwiseMin(1.0);

    if (R == 1) return lib;
    Eigen::MatrixXd measured;
    try {
      measured = pairwise_correlation(lib);
    } catch (const NumericalError&) {
      continue;
    }
    if (((measured - target_corr).array().abs() <= 0.05).all()) return lib;
  }
  throw NumericalError("synth_library: correlation target not reached after " +
                       std::to_string(options.max_retries) + " attempts");
}

nlohmann::json library_to_json(const SpectralLibrary& lib) {
  nlohmann::json rows = nlohmann::json::array();
  for (int l = 0; l < lib.bands(); ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (int r = 0; r < lib.materials(); ++r) row.push_back(lib.M(l, r));
    rows.push_back(std::move(row));
  }
  return {{"band_wavelengths", lib.band_wavelengths},
          {"material_names", lib.material_names},
          {"M", std::move(rows)}};
}

SpectralLibrary library_from_json(const nlohmann::json& j) {
  SpectralLibrary lib;
  try {
    lib.band_wavelengths = j.at("band_wavelengths").get<std::vector<double>>();
    lib.material_names = j.at("material_names").get<std::vector<std::string>>();
    const auto& rows = j.at("M");
    const auto L = static_cast<Eigen::Index>(rows.size());
    const auto R = static_cast<Eigen::Index>(lib.material_names.size());
    lib.M.resize(L, R);
    for (Eigen::Index l = 0; l < L; ++l) {
      const auto row = rows.at(static_cast<std::size_t>(l)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != R) throw ValidationError("library JSON: ragged M");
      for (Eigen::Index r = 0; r < R; ++r) lib.M(l, r) = row[static_cast<std::size_t>(r)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("library JSON: ") + e.what());
  }
  lib.validate();
  return lib;
}

}  // namespace mslu
