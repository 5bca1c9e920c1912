#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mslu/forward_model.hpp"
#include "mslu/spectral_library.hpp"

// Windowed likelihood kernels used inside the samplers.
//
// The pulse is truncated to the bins where it exceeds `cutoff * beta`
// (outside that window it is treated as exactly zero), so each evaluation
// touches O(L x window) bins instead of O(L x T). With cutoff <= 0 the window
// spans every bin and all quantities agree with the serial reference in
// posterior.hpp. Per-band partial sums run under OpenMP and are folded in
// band order, so results do not depend on the thread count.

namespace mslu {

/// Default truncation level of the pulse relative to its peak. For the
/// fitted instrument this keeps offsets in roughly [-76, +228] bins.
inline constexpr double kDefaultPulseCutoff = 1e-12;

/// Pulse samples g(first + 1), ..., g(first + size) for one surface.
struct PulseWindow {
  int first = 0;  // 0-based column of the first bin
  Eigen::VectorXd g;
  double total = 0.0;  // sum of g over the window

  int size() const { return static_cast<int>(g.size()); }
  int end() const { return first + size(); }
};

/// Likelihood kernel over a fixed count matrix Y (L x T). Keeps its own
/// band-major copy of the counts.
class PoissonKernel {
 public:
  PoissonKernel(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, PulseShape shape,
                const ImpulseParams& phi, double cutoff = kDefaultPulseCutoff);

  int bands() const { return static_cast<int>(Yt_.cols()); }
  int bins() const { return static_cast<int>(Yt_.rows()); }
  int materials() const { return static_cast<int>(M_.cols()); }
  /// Counts stored T x L, so each band is a contiguous column.
  const Eigen::MatrixXd& counts_by_band() const { return Yt_; }
  const Eigen::MatrixXd& mixing() const { return M_; }
  PulseShape shape() const { return shape_; }
  const ImpulseParams& impulse() const { return phi_; }

  /// Sum of counts of band l over columns [first, end).
  double count_sum(int l, int first, int end) const {
    return prefix_(l, end) - prefix_(l, first);
  }
  double count_total(int l) const { return prefix_(l, bins()); }

  /// Truncated pulse of a surface at `position`, clipped to [1, T].
  PulseWindow window_at(double position) const;

 private:
  Eigen::MatrixXd Yt_;
  Eigen::MatrixXd M_;
  PulseShape shape_;
  ImpulseParams phi_;
  double support_lo_, support_hi_;
  Eigen::MatrixXd prefix_;  // L x (T + 1) running count sums
};

/// Conditional of one layer's area vector with everything else frozen.
/// offset(k, l) holds b_l plus the other layers' signal at window bin k.
class AreaConditional {
 public:
  AreaConditional(const PoissonKernel& kernel, PulseWindow window, Eigen::MatrixXd offset, double alpha2);

  /// U(w) up to a constant independent of w; +inf outside the orthant or on a
  /// zero intensity under a positive count.
  double potential(const Eigen::VectorXd& w) const;
  /// dU/dw. Intensities are floored, so the result is finite for w >= 0.
  void gradient(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const;
  /// Returns U(w) and writes dU/dw into grad.
  double potential_and_gradient(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const {
    gradient(w, grad);
    return potential(w);
  }
  /// Diagonal of sum y g^2 M^2 / lambda^2 + 1/alpha2 (observed curvature).
  Eigen::VectorXd curvature_diagonal(const Eigen::VectorXd& w) const;

  const PulseWindow& window() const { return window_; }

 private:
  const PoissonKernel& kernel_;
  PulseWindow window_;
  Eigen::MatrixXd offset_;  // window x L
  double alpha2_;
};

/// Mutable model state (areas, positions, backgrounds) for the samplers,
/// with the summed layer signal cached on the union of pulse windows.
class LayeredModel {
 public:
  LayeredModel(const PoissonKernel& kernel, std::vector<double> positions, Eigen::MatrixXd W,
               Eigen::VectorXd b);

  int layers() const { return static_cast<int>(positions_.size()); }
  const PoissonKernel& kernel() const { return kernel_; }
  const Eigen::MatrixXd& areas() const { return W_; }
  const Eigen::VectorXd& background() const { return b_; }
  double position(int d) const { return positions_[static_cast<std::size_t>(d)]; }

  void set_areas(int d, const Eigen::VectorXd& w);
  void set_position(int d, double position);
  void set_background(int l, double value) { b_(l) = value; }

  AreaConditional area_conditional(int d, double alpha2) const;

  /// Log-likelihood of band l as a function of its background, up to terms
  /// independent of b_l.
  double band_log_likelihood(int l, double b) const;

  /// Single-layer only: log-likelihood as a function of the surface position,
  /// up to terms independent of it.
  double position_log_likelihood(double position) const;

  /// Full log-likelihood of the truncated model, excluding the log(y!) terms.
  double log_likelihood() const;

 private:
  struct Segment {
    int first = 0;
    int len = 0;
    Eigen::MatrixXd signal;  // len x L, sum over layers of a_dl g_d
  };
  void rebuild_signal();

  const PoissonKernel& kernel_;
  std::vector<double> positions_;
  std::vector<PulseWindow> windows_;
  Eigen::MatrixXd W_;  // R x D
  Eigen::MatrixXd A_;  // L x D band amplitudes M W
  Eigen::VectorXd b_;
  std::vector<Segment> segments_;
};

}  // namespace mslu
