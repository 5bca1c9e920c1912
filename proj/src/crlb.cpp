#include "mslu/crlb.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>

#include "mslu/errors.hpp"
#include "mslu/forward_model.hpp"

namespace mslu {

Eigen::MatrixXd fisher_matrix(const SpectralLibrary& lib, const ParameterVector& theta, double beta,
                              double sigma2_gauss, int T) {
  const int R = lib.materials();
  const int L = lib.bands();
  if (theta.w.size() != R || theta.b.size() != L) throw ValidationError("fisher: theta does not match library");
  if (!(beta > 0.0) || !(sigma2_gauss > 0.0) || T < 1) {
    throw ValidationError("fisher: need beta > 0, sigma2 > 0 and T >= 1");
  }
  const int P = R + L + 1;
  const int it0 = R + L;
  const Eigen::VectorXd a = lib.M * theta.w;

  Eigen::VectorXd g(T), dg(T);  // g and dg/dt0 per unit amplitude
  for (int t = 0; t < T; ++t) {
    const double u = (t + 1.0) - theta.t0;
    g(t) = g_gaussian(t + 1.0, theta.t0, beta, sigma2_gauss);
    dg(t) = g(t) * u / sigma2_gauss;
  }

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(P, P);
  for (int l = 0; l < L; ++l) {
    double s_gg = 0.0, s_g = 0.0, s_1 = 0.0, s_gd = 0.0, s_d = 0.0, s_dd = 0.0;
    for (int t = 0; t < T; ++t) {
      const double lambda = a(l) * g(t) + theta.b(l);
      if (!(lambda > 0.0)) {
        throw NumericalError("fisher: zero intensity in band " + std::to_string(l + 1) + ", bin " +
                             std::to_string(t + 1));
      }
      s_gg += g(t) * g(t) / lambda;
      s_g += g(t) / lambda;
      s_1 += 1.0 / lambda;
      s_gd += g(t) * dg(t) / lambda;
      s_d += dg(t) / lambda;
      s_dd += dg(t) * dg(t) / lambda;
    }
    const Eigen::VectorXd m = lib.M.row(l).transpose();
    J.topLeftCorner(R, R).noalias() += s_gg * m * m.transpose();
    J.block(0, R + l, R, 1) += s_g * m;
    J(R + l, R + l) = s_1;
    J.block(0, it0, R, 1) += a(l) * s_gd * m;
    J(R + l, it0) = a(l) * s_d;
    J(it0, it0) += a(l) * a(l) * s_dd;
  }
  J.triangularView<Eigen::StrictlyLower>() = J.transpose();
  return J;
}

std::vector<std::string> parameter_names(const SpectralLibrary& lib) {
  std::vector<std::string> names;
  for (const auto& n : lib.material_names) names.push_back("w_" + n);
  for (int l = 0; l < lib.bands(); ++l) names.push_back("b_" + std::to_string(l + 1));
  names.push_back("t0");
  return names;
}

double relative_error_pct(double variance, double truth) {
  if (truth == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * std::sqrt(variance) / std::abs(truth);
}

CrlbReport crlb_from_fisher(const Eigen::MatrixXd& J, const Eigen::VectorXd& truth,
                            const std::vector<std::string>& names, double cap) {
  const Eigen::Index P = J.rows();
  if (P == 0 || J.cols() != P) throw ValidationError("crlb: Fisher matrix must be square and non-empty");
  if (truth.size() != 0 && truth.size() != P) throw ValidationError("crlb: truth length mismatch");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != P) {
    throw ValidationError("crlb: name count mismatch");
  }

  CrlbReport rep;
  rep.fisher = J;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  rep.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(rep.condition_number <= cap)) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "crlb: Fisher matrix singular or ill-conditioned (condition number %.3g, cap %.3g)",
                  rep.condition_number, cap);
    throw NumericalError(msg);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(J);
  if (llt.info() != Eigen::Success) throw NumericalError("crlb: Fisher matrix is not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(P, P));
  rep.variances = inv.diagonal();

  rep.names = names;
  if (rep.names.empty()) {
    for (Eigen::Index i = 0; i < P; ++i) rep.names.push_back("theta_" + std::to_string(i + 1));
  }
  rep.truth = truth;
  rep.rel_errors = Eigen::VectorXd::Constant(P, std::numeric_limits<double>::quiet_NaN());
  if (truth.size() == P) {
    for (Eigen::Index i = 0; i < P; ++i) rep.rel_errors(i) = relative_error_pct(rep.variances(i), truth(i));
  }
  return rep;
}

void CrlbConfig::validate() const {
  if (spectra.empty()) throw ValidationError("crlb config: no spectra");
  if (L < 1) throw ValidationError("crlb config: L must be >= 1");
  if (nested && (nested_max < L || nested_max % L != 0)) {
    throw ValidationError("crlb config: nested designs need L dividing " + std::to_string(nested_max));
  }
  if (w.size() != static_cast<Eigen::Index>(spectra.size())) {
    throw ValidationError("crlb config: w needs one entry per material");
  }
  if ((w.array() < 0.0).any()) throw ValidationError("crlb config: w must be >= 0");
  if (!(t0 > 1.0 && t0 < T)) throw ValidationError("crlb config: t0 must lie in (1, T)");
  if (!(background > 0.0)) throw ValidationError("crlb config: background must be > 0");
  if (!(beta > 0.0) || !(sigma2 > 0.0)) throw ValidationError("crlb config: beta and sigma2 must be > 0");
}

SpectralLibrary CrlbConfig::library() const {
  if (!nested) return resample_bands(spectra, L, band_lo, band_hi);
  const std::vector<double> full = band_grid(nested_max, band_lo, band_hi);
  std::vector<double> centers;
  for (int k = 0; k < L; ++k) centers.push_back(full[static_cast<std::size_t>(k * (nested_max / L))]);
  return resample_at(spectra, centers);
}

ParameterVector CrlbConfig::truth() const {
  ParameterVector theta;
  theta.w = w;
  theta.b = Eigen::VectorXd::Constant(L, background);
  theta.t0 = t0;
  return theta;
}

CrlbReport compute_crlb(const CrlbConfig& cfg) {
  cfg.validate();
  const SpectralLibrary lib = cfg.library();
  const ParameterVector theta = cfg.truth();
  const Eigen::MatrixXd J = fisher_matrix(lib, theta, cfg.beta, cfg.sigma2, cfg.T);
  Eigen::VectorXd truth(J.rows());
  truth << theta.w, theta.b, theta.t0;
  return crlb_from_fisher(J, truth, parameter_names(lib), cfg.condition_cap);
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "bands") return SweepAxis::Bands;
  if (name == "beta") return SweepAxis::Beta;
  if (name == "background") return SweepAxis::Background;
  throw ValidationError("unknown sweep axis '" + name + "' (expected bands, beta or background)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Bands: return "bands";
    case SweepAxis::Beta: return "beta";
    case SweepAxis::Background: return "background";
  }
  return "?";
}

std::vector<SweepPoint> sweep(const CrlbConfig& cfg, SweepAxis axis, const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("sweep: empty grid");
  std::vector<CrlbConfig> configs(grid.size(), cfg);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = grid[i];
    switch (axis) {
      case SweepAxis::Bands:
        if (v < 1.0 || v != std::floor(v)) throw ValidationError("sweep: band counts must be positive integers");
        configs[i].L = static_cast<int>(v);
        break;
      case SweepAxis::Beta: configs[i].beta = v; break;
      case SweepAxis::Background: configs[i].background = v; break;
    }
    configs[i].validate();
  }

  std::vector<SweepPoint> points(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const int n = static_cast<int>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      points[static_cast<std::size_t>(i)] = {grid[static_cast<std::size_t>(i)],
                                             compute_crlb(configs[static_cast<std::size_t>(i)])};
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return points;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write sweep file " + path.string());
  f << "axis_value,param_name,crlb,rel_err_pct\n";
  char buf[96];
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.report.names.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      std::snprintf(buf, sizeof buf, "%.10g,", p.axis_value);
      f << buf << p.report.names[i];
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g\n", p.report.variances(k), p.report.rel_errors(k));
      f << buf;
    }
  }
  if (!f) throw IoError("failed writing sweep file " + path.string());
}

namespace {

nlohmann::json nan_to_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double null_to_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

nlohmann::json crlb_to_json(const CrlbReport& report) {
  nlohmann::json j;
  j["parameter_order"] = report.names;
  j["condition_number"] = report.condition_number;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < report.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    params.push_back({{"name", report.names[i]},
                      {"truth", report.truth.size() ? nan_to_null(report.truth(k)) : nlohmann::json(nullptr)},
                      {"crlb", report.variances(k)},
                      {"rel_err_pct", nan_to_null(report.rel_errors(k))}});
  }
  j["parameters"] = params;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < report.fisher.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < report.fisher.cols(); ++c) row.push_back(report.fisher(r, c));
    rows.push_back(row);
  }
  j["fisher"] = rows;
  return j;
}

CrlbReport crlb_from_json(const nlohmann::json& j) {
  CrlbReport rep;
  try {
    rep.condition_number = j.at("condition_number").get<double>();
    const auto& params = j.at("parameters");
    const auto P = static_cast<Eigen::Index>(params.size());
    rep.truth.resize(P);
    rep.variances.resize(P);
    rep.rel_errors.resize(P);
    for (Eigen::Index i = 0; i < P; ++i) {
      const auto& p = params.at(static_cast<std::size_t>(i));
      rep.names.push_back(p.at("name").get<std::string>());
      rep.truth(i) = null_to_nan(p.at("truth"));
      rep.variances(i) = p.at("crlb").get<double>();
      rep.rel_errors(i) = null_to_nan(p.at("rel_err_pct"));
    }
    const auto& rows = j.at("fisher");
    rep.fisher.resize(P, P);
    for (Eigen::Index r = 0; r < P; ++r) {
      const auto& row = rows.at(static_cast<std::size_t>(r));
      for (Eigen::Index c = 0; c < P; ++c) rep.fisher(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("crlb report JSON: ") + e.what());
  }
  return rep;
}

}  // namespace mslu
