#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mslu/errors.hpp"

namespace mslu {

/// Reflectance of one material sampled at increasing wavelengths (nm).
struct MaterialSpectrum {
  std::string name;
  std::vector<double> wavelengths;
  std::vector<double> reflectance;

  /// Throws ValidationError unless wavelengths increase strictly, lengths
  /// match (>= 2) and every reflectance lies in [0, 1].
  void validate() const;
};

/// Mixing matrix: column r is material r's signature at the L band centers.
struct SpectralLibrary {
  std::vector<double> band_wavelengths;
  Eigen::MatrixXd M;  // L x R
  std::vector<std::string> material_names;

  int bands() const { return static_cast<int>(M.rows()); }
  int materials() const { return static_cast<int>(M.cols()); }
  void validate() const;
};

// Spectra-CSV errors carry the offending row/column in their message.
class SpectraParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class SpectraOrderError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class SpectraRangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Reads `wavelength_nm,<name1>,...,<nameR>` CSV; one spectrum per column.
std::vector<MaterialSpectrum> load_spectra(const std::filesystem::path& path);
std::vector<MaterialSpectrum> parse_spectra_csv(std::istream& in,
                                                const std::string& source = "<stream>");
/// Writes spectra that share one wavelength grid in the same CSV schema.
void write_spectra_csv(const std::filesystem::path& path,
                       const std::vector<MaterialSpectrum>& spectra);

/// L equally spaced band centers spanning [lo, hi]; the midpoint when L == 1.
std::vector<double> band_grid(int L, double lo, double hi);

/// Piecewise-linear interpolation of each spectrum onto `band_grid(L, lo, hi)`.
SpectralLibrary resample_bands(const std::vector<MaterialSpectrum>& spectra, int L,
                               double lo, double hi);
/// Same, onto explicit band centers.
SpectralLibrary resample_at(const std::vector<MaterialSpectrum>& spectra,
                            const std::vector<double>& centers);

/// Columns of `lib` viewed as spectra on its band grid.
std::vector<MaterialSpectrum> library_spectra(const SpectralLibrary& lib);

struct SynthOptions {
  double lo = 400.0;
  double hi = 2500.0;
  /// Optional per-material mean reflectance; drawn in [0.2, 0.6] when empty.
  std::vector<double> mean_levels;
  /// Optional per-material standard deviation across bands; drawn in
  /// [0.05, 0.15] when empty. Shrunk when the curve would leave [0.01, 0.99].
  std::vector<double> spreads;
  std::vector<std::string> names;
  int max_retries = 20;
};

/// Smooth synthetic spectra whose band-to-band Pearson correlations equal
/// `target_corr` (within 0.05). Deterministic in `seed`.
SpectralLibrary synth_library(int R, int L, const Eigen::MatrixXd& target_corr,
                              std::uint64_t seed, const SynthOptions& options = {});

/// Pearson correlation between library columns (R x R).
Eigen::MatrixXd pairwise_correlation(const SpectralLibrary& lib);

nlohmann::json library_to_json(const SpectralLibrary& lib);
SpectralLibrary library_from_json(const nlohmann::json& j);

}  // namespace mslu
