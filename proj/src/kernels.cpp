#include "mslu/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "mslu/posterior.hpp"

namespace mslu {

namespace {

// Below this many bin evaluations a parallel region costs more than it saves.
constexpr long kParallelWork = 16384;

}  // namespace

PoissonKernel::PoissonKernel(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, PulseShape shape,
                             const ImpulseParams& phi, double cutoff)
    : Yt_(Y.transpose()), M_(lib.M), shape_(shape), phi_(phi) {
  if (Y.rows() != lib.bands()) throw ValidationError("kernel: Y rows differ from library bands");
  phi.validate();
  std::tie(support_lo_, support_hi_) = pulse_support(shape, phi, cutoff);
  prefix_.resize(Y.rows(), Y.cols() + 1);
  for (Eigen::Index l = 0; l < Y.rows(); ++l) {
    double running = 0.0;
    prefix_(l, 0) = 0.0;
    for (Eigen::Index t = 0; t < Y.cols(); ++t) {
      running += Y(l, t);
      prefix_(l, t + 1) = running;
    }
  }
}

PulseWindow PoissonKernel::window_at(double position) const {
  const int T = bins();
  // Bin t (1-based) is inside when t - position lies in the support.
  double first_bin = std::isinf(support_lo_) ? 1.0 : std::ceil(position + support_lo_);
  double last_bin = std::isinf(support_hi_) ? T : std::floor(position + support_hi_);
  first_bin = std::max(first_bin, 1.0);
  last_bin = std::min(last_bin, static_cast<double>(T));
  PulseWindow win;
  if (last_bin < first_bin) {
    win.first = std::clamp(static_cast<int>(first_bin) - 1, 0, T);
    return win;
  }
  win.first = static_cast<int>(first_bin) - 1;
  const int n = static_cast<int>(last_bin - first_bin) + 1;
  win.g.resize(n);
  for (int k = 0; k < n; ++k) win.g(k) = pulse(shape_, first_bin + k, position, phi_);
  win.total = win.g.sum();
  return win;
}

AreaConditional::AreaConditional(const PoissonKernel& kernel, PulseWindow window, Eigen::MatrixXd offset,
                                 double alpha2)
    : kernel_(kernel), window_(std::move(window)), offset_(std::move(offset)), alpha2_(alpha2) {}

double AreaConditional::potential(const Eigen::VectorXd& w) const {
  if ((w.array() < 0.0).any()) return kPosInf;
  const int L = kernel_.bands();
  const int n = window_.size();
  const Eigen::VectorXd amplitude = kernel_.mixing() * w;
  const auto& Yt = kernel_.counts_by_band();
  Eigen::VectorXd partial(L);
#pragma omp parallel for schedule(static) if (static_cast<long>(L) * n >= kParallelWork)
  for (int l = 0; l < L; ++l) {
    const double a = amplitude(l);
    const double* y = Yt.col(l).data() + window_.first;
    const double* off = offset_.col(l).data();
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double term = poisson_log_term(y[k], a * window_.g(k) + off[k]);
      if (term == kNegInf) {
        sum = kNegInf;
        break;
      }
      sum += term;
    }
    partial(l) = sum - a * window_.total;
  }
  double total = 0.0;
  for (int l = 0; l < L; ++l) {
    if (partial(l) == kNegInf) return kPosInf;
    total += partial(l);
  }
  return -total + w.squaredNorm() / (2.0 * alpha2_);
}

void AreaConditional::gradient(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const {
  const int L = kernel_.bands();
  const int n = window_.size();
  const Eigen::VectorXd amplitude = kernel_.mixing() * w;
  const auto& Yt = kernel_.counts_by_band();
  const double* g = window_.g.data();
  Eigen::VectorXd score(L);
#pragma omp parallel for schedule(static) if (static_cast<long>(L) * n >= kParallelWork)
  for (int l = 0; l < L; ++l) {
    const double a = amplitude(l);
    const double* y = Yt.col(l).data() + window_.first;
    const double* off = offset_.col(l).data();
    double sc = 0.0;  // sum y g / lambda
    for (int k = 0; k < n; ++k) {
      sc += y[k] * g[k] / std::max(a * g[k] + off[k], kLambdaFloor);
    }
    score(l) = sc - window_.total;
  }
  grad = w / alpha2_ - kernel_.mixing().transpose() * score;
}

Eigen::VectorXd AreaConditional::curvature_diagonal(const Eigen::VectorXd& w) const {
  const int L = kernel_.bands();
  const Eigen::VectorXd amplitude = kernel_.mixing() * w;
  const auto& Yt = kernel_.counts_by_band();
  Eigen::VectorXd per_band(L);
  for (int l = 0; l < L; ++l) {
    double s = 0.0;
    for (int k = 0; k < window_.size(); ++k) {
      const double g = window_.g(k);
      const double lambda = std::max(amplitude(l) * g + offset_(k, l), kLambdaFloor);
      s += Yt(window_.first + k, l) * g * g / (lambda * lambda);
    }
    per_band(l) = s;
  }
  const Eigen::MatrixXd& M = kernel_.mixing();
  return (M.array().square().matrix().transpose() * per_band).array() + 1.0 / alpha2_;
}

LayeredModel::LayeredModel(const PoissonKernel& kernel, std::vector<double> positions, Eigen::MatrixXd W,
                           Eigen::VectorXd b)
    : kernel_(kernel), positions_(std::move(positions)), W_(std::move(W)), b_(std::move(b)) {
  if (positions_.empty()) throw ValidationError("model: need at least one layer");
  if (W_.rows() != kernel_.materials() || W_.cols() != layers()) {
    throw ValidationError("model: W must be R x D");
  }
  if (b_.size() != kernel_.bands()) throw ValidationError("model: b must have L entries");
  for (double p : positions_) windows_.push_back(kernel_.window_at(p));
  A_ = kernel_.mixing() * W_;
  rebuild_signal();
}

void LayeredModel::set_areas(int d, const Eigen::VectorXd& w) {
  W_.col(d) = w;
  A_.col(d) = kernel_.mixing() * w;
  rebuild_signal();
}

void LayeredModel::set_position(int d, double position) {
  positions_[static_cast<std::size_t>(d)] = position;
  windows_[static_cast<std::size_t>(d)] = kernel_.window_at(position);
  rebuild_signal();
}

void LayeredModel::rebuild_signal() {
  std::vector<std::pair<int, int>> spans;
  for (const auto& w : windows_) {
    if (w.size() > 0) spans.emplace_back(w.first, w.end());
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<int, int>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, s.second);
    } else {
      merged.push_back(s);
    }
  }
  const int L = kernel_.bands();
  segments_.clear();
  for (const auto& [first, end] : merged) {
    Segment seg;
    seg.first = first;
    seg.len = end - first;
    seg.signal = Eigen::MatrixXd::Zero(seg.len, L);
    for (int d = 0; d < layers(); ++d) {
      const auto& win = windows_[static_cast<std::size_t>(d)];
      if (win.size() == 0 || win.first < first || win.end() > end) continue;
      seg.signal.middleRows(win.first - first, win.size()).noalias() += win.g * A_.col(d).transpose();
    }
    segments_.push_back(std::move(seg));
  }
}

AreaConditional LayeredModel::area_conditional(int d, double alpha2) const {
  const auto& win = windows_[static_cast<std::size_t>(d)];
  Eigen::MatrixXd offset = Eigen::RowVectorXd(b_.transpose()).replicate(win.size(), 1);
  for (int other = 0; other < layers(); ++other) {
    if (other == d) continue;
    const auto& ow = windows_[static_cast<std::size_t>(other)];
    const int lo = std::max(win.first, ow.first);
    const int hi = std::min(win.end(), ow.end());
    if (hi <= lo) continue;
    offset.middleRows(lo - win.first, hi - lo).noalias() +=
        ow.g.segment(lo - ow.first, hi - lo) * A_.col(other).transpose();
  }
  return AreaConditional(kernel_, win, std::move(offset), alpha2);
}

double LayeredModel::band_log_likelihood(int l, double b) const {
  const auto& Yt = kernel_.counts_by_band();
  double ll = 0.0;
  double active_counts = 0.0;
  for (const auto& seg : segments_) {
    const double* y = Yt.col(l).data() + seg.first;
    const double* s = seg.signal.col(l).data();
    for (int k = 0; k < seg.len; ++k) {
      const double term = poisson_log_term(y[k], s[k] + b);
      if (term == kNegInf) return kNegInf;
      ll += term;
    }
    active_counts += kernel_.count_sum(l, seg.first, seg.first + seg.len);
  }
  const double outside = poisson_log_term(kernel_.count_total(l) - active_counts, b);
  if (outside == kNegInf) return kNegInf;
  return ll + outside - kernel_.bins() * b;
}

double LayeredModel::position_log_likelihood(double position) const {
  if (layers() != 1) throw ValidationError("position_log_likelihood: single-layer models only");
  const PulseWindow win = kernel_.window_at(position);
  const int L = kernel_.bands();
  const auto& Yt = kernel_.counts_by_band();
  Eigen::VectorXd partial(L);
#pragma omp parallel for schedule(static) if (static_cast<long>(L) * win.size() >= kParallelWork)
  for (int l = 0; l < L; ++l) {
    const double a = A_(l, 0);
    const double* y = Yt.col(l).data() + win.first;
    double ll = 0.0;
    for (int k = 0; k < win.size(); ++k) {
      const double term = poisson_log_term(y[k], a * win.g(k) + b_(l));
      if (term == kNegInf) {
        ll = kNegInf;
        break;
      }
      ll += term;
    }
    const double outside =
        poisson_log_term(kernel_.count_total(l) - kernel_.count_sum(l, win.first, win.end()), b_(l));
    partial(l) = (ll == kNegInf || outside == kNegInf) ? kNegInf : ll + outside - a * win.total;
  }
  double total = 0.0;
  for (int l = 0; l < L; ++l) {
    if (partial(l) == kNegInf) return kNegInf;
    total += partial(l);
  }
  return total;
}

double LayeredModel::log_likelihood() const {
  double total = 0.0;
  for (int l = 0; l < kernel_.bands(); ++l) {
    const double band = band_log_likelihood(l, b_(l));
    if (band == kNegInf) return kNegInf;
    double signal = 0.0;
    for (const auto& seg : segments_) signal += seg.signal.col(l).sum();
    total += band - signal;
  }
  return total;
}

}  // namespace mslu
