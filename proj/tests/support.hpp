#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "mslu/spectral_library.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(MSLU_DATA_DIR) / name;
}

inline mslu::SpectralLibrary fixture_library(int L, const std::string& file = "fixture_spectra.csv") {
  return mslu::resample_bands(mslu::load_spectra(data_path(file)), L, 400.0, 2500.0);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("mslu_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Kolmogorov distance between the empirical CDF of sorted `xs` and `cdf`.
template <class Cdf>
double ks_distance(const std::vector<double>& sorted, Cdf cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double F = cdf(sorted[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

}  // namespace testing
