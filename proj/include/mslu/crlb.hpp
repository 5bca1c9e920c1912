#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mslu/posterior.hpp"
#include "mslu/spectral_library.hpp"

// Fisher information and Cramer-Rao bounds of the single-layer model under
// the Gaussian pulse approximation. Parameters are always ordered
// (w_1..w_R, b_1..b_L, t0).

namespace mslu {

/// Fisher information sum_{l,t} (d lambda/d theta_i)(d lambda/d theta_j) / lambda
/// over bins t = 1..T with lambda = (M w)_l g(t) + b_l and a Gaussian g of
/// peak beta and variance sigma2.
Eigen::MatrixXd fisher_matrix(const SpectralLibrary& lib, const ParameterVector& theta, double beta,
                              double sigma2_gauss, int T);

/// Names in parameter order: w_<material>..., b_1..b_L, t0.
std::vector<std::string> parameter_names(const SpectralLibrary& lib);

struct CrlbReport {
  std::vector<std::string> names;
  Eigen::VectorXd truth;
  Eigen::VectorXd variances;   // diagonal of J^-1
  Eigen::VectorXd rel_errors;  // 100 sqrt(variance) / |truth|; NaN for a zero truth
  double condition_number = 0.0;
  Eigen::MatrixXd fisher;
};

inline constexpr double kDefaultConditionCap = 1e12;

/// Inverts J after checking its 2-norm condition number against `cap`;
/// throws NumericalError (with the condition number) when J is singular or
/// too ill-conditioned. `truth` supplies the denominators of the relative
/// errors and may be empty.
CrlbReport crlb_from_fisher(const Eigen::MatrixXd& J, const Eigen::VectorXd& truth = {},
                            const std::vector<std::string>& names = {}, double cap = kDefaultConditionCap);

/// 100 sqrt(variance) / |truth|.
double relative_error_pct(double variance, double truth);

/// Single-layer design point for bounds and sweeps. Bands are equally spaced
/// over [band_lo, band_hi] unless `nested` is set, in which case an L-band
/// design takes every (nested_max / L)-th band of the nested_max-band grid,
/// so smaller designs are subsets of larger ones.
struct CrlbConfig {
  std::vector<MaterialSpectrum> spectra;
  int L = 32;
  double band_lo = 400.0;
  double band_hi = 2500.0;
  bool nested = false;
  int nested_max = 32;
  Eigen::VectorXd w;
  double t0 = 1000.0;
  double background = 10.0;
  double beta = 3000.0;
  double sigma2 = 105.68;
  int T = 2500;
  double condition_cap = kDefaultConditionCap;

  void validate() const;
  SpectralLibrary library() const;
  ParameterVector truth() const;
};

CrlbReport compute_crlb(const CrlbConfig& cfg);

enum class SweepAxis { Bands, Beta, Background };
SweepAxis parse_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepPoint {
  double axis_value = 0.0;
  CrlbReport report;
};

/// One report per grid value, computed concurrently; output order follows
/// the grid.
std::vector<SweepPoint> sweep(const CrlbConfig& cfg, SweepAxis axis, const std::vector<double>& grid);

/// `axis_value,param_name,crlb,rel_err_pct`, one row per grid point and
/// parameter.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points);

nlohmann::json crlb_to_json(const CrlbReport& report);
CrlbReport crlb_from_json(const nlohmann::json& j);

}  // namespace mslu
