#include "wigtomo/recon.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numbers>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>

#include "wigtomo/error.hpp"

namespace wigtomo {

namespace {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

constexpr double kPinThreshold = 1e-300;
constexpr double kFisherSingular = 1e-10;

}  // namespace

std::int64_t HistogramModel::in_range() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

HistogramModel build_histogram(std::span<const double> data, int bins, double low, double high) {
  if (data.empty()) throw std::invalid_argument("build_histogram: empty data");
  if (bins < 10) throw std::invalid_argument("build_histogram: need at least 10 bins");
  if (!(low < high)) throw std::invalid_argument("build_histogram: range must be ascending");

  HistogramModel hist;
  const auto nb = static_cast<std::size_t>(bins);
  hist.bin_edges.resize(nb + 1);
  // Written so that a symmetric range yields exactly mirrored edges.
  for (std::size_t i = 0; i <= nb; ++i) {
    hist.bin_edges[i] = (low * static_cast<double>(nb - i) + high * static_cast<double>(i)) /
                        static_cast<double>(nb);
  }
  hist.counts.assign(nb, 0);
  for (double x : data) {
    if (x < low) {
      ++hist.underflow;
    } else if (x > high) {
      ++hist.overflow;
    } else {
      auto it = std::upper_bound(hist.bin_edges.begin(), hist.bin_edges.end(), x);
      auto b = static_cast<std::size_t>(it - hist.bin_edges.begin()) - 1;
      if (b >= nb) b = nb - 1;  // x == high
      ++hist.counts[b];
    }
  }
  const std::int64_t total = hist.in_range();
  if (total == 0) throw std::invalid_argument("build_histogram: no data inside the range");
  hist.densities.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    hist.densities[b] =
        static_cast<double>(hist.counts[b]) / (static_cast<double>(total) * hist.width(b));
  }
  return hist;
}

std::vector<double> bin_averaged_fock_densities(const HistogramModel& hist, int cutoff) {
  using Rule = boost::math::quadrature::gauss<double, 8>;
  const auto& nodes = Rule::abscissa();
  const auto& weights = Rule::weights();
  const auto cols = static_cast<std::size_t>(cutoff) + 1;
  std::vector<double> out(hist.bins() * cols, 0.0);
  std::vector<double> q(cols);
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    const double mid = 0.5 * (hist.bin_edges[b] + hist.bin_edges[b + 1]);
    const double half = 0.5 * hist.width(b);
    double* row = out.data() + b * cols;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        fock_quadrature_pdfs(mid + sign * half * nodes[k], q);
        for (std::size_t n = 0; n < cols; ++n) row[n] += weights[k] * q[n];
      }
    }
    // Weights integrate over [-1, 1]; the bin average is half the sum.
    for (std::size_t n = 0; n < cols; ++n) row[n] *= 0.5;
  }
  return out;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("project_to_simplex: empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) threshold = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - threshold, 0.0);
  return out;
}

LsFitResult fit_mixture_ls(const HistogramModel& hist, int cutoff) {
  if (cutoff < 1 || cutoff > kMaxFockIndex) {
    throw std::invalid_argument("fit_mixture_ls: cutoff must lie in [1, 64]");
  }
  if (hist.bins() == 0 || hist.bin_edges.size() != hist.bins() + 1) {
    throw std::invalid_argument("fit_mixture_ls: malformed histogram");
  }
  const auto cols = static_cast<Eigen::Index>(cutoff + 1);
  const auto rows = static_cast<Eigen::Index>(hist.bins());
  const std::vector<double> model = bin_averaged_fock_densities(hist, cutoff);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      design(model.data(), rows, cols);
  const Eigen::Map<const Eigen::VectorXd> target(hist.densities.data(), rows);

  // f(p) = |A p - d|^2 = p'Gp - 2c'p + d'd
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::VectorXd cross = design.transpose() * target;
  const double offset = target.squaredNorm();
  auto objective = [&](const Eigen::VectorXd& p) {
    return p.dot(gram * p) - 2.0 * cross.dot(p) + offset;
  };
  auto gradient = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    return 2.0 * (gram * p - cross);
  };
  auto project = [](const Eigen::VectorXd& v) {
    const auto proj = project_to_simplex(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(proj.data(), v.size()));
  };

  constexpr int kMaxIterations = 100000;
  constexpr double kTolerance = 1e-10;
  constexpr double kArmijo = 1e-4;

  Eigen::VectorXd p = Eigen::VectorXd::Constant(cols, 1.0 / static_cast<double>(cols));
  Eigen::VectorXd g = gradient(p);
  double f = objective(p);
  double step = 1.0 / std::max(2.0 * gram.trace(), 1e-300);
  double pg_norm = (p - project(p - g)).norm();
  int it = 0;
  for (; it < kMaxIterations && pg_norm >= kTolerance; ++it) {
    const Eigen::VectorXd direction = project(p - step * g) - p;
    const double slope = g.dot(direction);
    double lambda = 1.0;
    Eigen::VectorXd trial = p + direction;
    double f_trial = objective(trial);
    for (int k = 0; k < 60 && f_trial > f + kArmijo * lambda * slope; ++k) {
      lambda *= 0.5;
      trial = p + lambda * direction;
      f_trial = objective(trial);
    }
    const Eigen::VectorXd g_trial = gradient(trial);
    const Eigen::VectorXd s = trial - p;
    const Eigen::VectorXd y = g_trial - g;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : 1e12;
    const bool same_support = ((trial.array() > 0.0) == (p.array() > 0.0)).all();
    p = trial;
    g = g_trial;
    f = f_trial;
    if (same_support) {
      // Stationary point of f on the current face of the simplex.
      std::vector<Eigen::Index> support;
      for (Eigen::Index n = 0; n < cols; ++n) {
        if (p[n] > 0.0) support.push_back(n);
      }
      const auto m = static_cast<Eigen::Index>(support.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs(m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = gram(support[a], support[b]);
        kkt(a, m) = kkt(m, a) = 1.0;
        rhs[a] = cross[support[a]];
      }
      rhs[m] = 1.0;
      const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
      if (sol.allFinite()) {
        // Walk towards the face minimizer, stopping where a component hits zero.
        Eigen::VectorXd direction = -p;
        for (Eigen::Index a = 0; a < m; ++a) direction[support[a]] += sol[a];
        double t = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index n : support) {
          if (direction[n] < 0.0 && -p[n] / direction[n] < t) {
            t = -p[n] / direction[n];
            blocking = n;
          }
        }
        Eigen::VectorXd candidate = (p + t * direction).cwiseMax(0.0);
        if (blocking >= 0) candidate[blocking] = 0.0;
        candidate /= candidate.sum();
        const double f_candidate = objective(candidate);
        if (f_candidate <= f) {
          p = candidate;
          g = gradient(p);
          f = f_candidate;
        }
      }
    }
    pg_norm = (p - project(p - g)).norm();
  }
  if (pg_norm >= kTolerance) {
    throw ReconstructionError("least-squares fit did not converge after " + std::to_string(it) +
                              " iterations: projected-gradient norm " + std::to_string(pg_norm) +
                              ", residual " + std::to_string(f));
  }

  std::vector<double> probs(p.data(), p.data() + p.size());
  for (double& v : probs) v = std::max(v, 0.0);
  LsFitResult result;
  result.p = PhotonNumberDistribution::from_weights(std::move(probs));
  result.iterations = it;
  result.residual = std::max(f, 0.0);
  result.projected_gradient_norm = pg_norm;
  return result;
}

FockDesign::FockDesign(std::span<const double> data, int cutoff)
    : points_(data.size()), cutoff_(cutoff) {
  if (cutoff < 0 || cutoff > kMaxFockIndex) throw std::invalid_argument("FockDesign: bad cutoff");
  const auto cols = static_cast<std::size_t>(cutoff) + 1;
  values_.resize(points_ * cols);
  for (std::size_t k = 0; k < points_; ++k) {
    fock_quadrature_pdfs(data[k], std::span<double>(values_.data() + k * cols, cols));
  }
}

double log_likelihood(const PhotonNumberDistribution& p, std::span<const double> data) {
  std::vector<double> q(p.probs().size());
  CompensatedSum sum;
  for (std::size_t k = 0; k < data.size(); ++k) {
    fock_quadrature_pdfs(data[k], q);
    double density = 0.0;
    for (std::size_t n = 0; n < q.size(); ++n) density += p.probs()[n] * q[n];
    if (!(density > 0.0)) {
      throw ReconstructionError("zero likelihood at data point " + std::to_string(k) +
                                " (x = " + std::to_string(data[k]) + ")");
    }
    sum.add(std::log(density));
  }
  return sum.value();
}

PhotonNumberDistribution em_step(const PhotonNumberDistribution& p, std::span<const double> data) {
  if (data.empty()) throw std::invalid_argument("em_step: empty data");
  const auto probs = p.probs();
  const std::size_t cols = probs.size();
  std::vector<double> q(cols);
  std::vector<CompensatedSum> acc(cols);
  for (std::size_t k = 0; k < data.size(); ++k) {
    fock_quadrature_pdfs(data[k], q);
    double density = 0.0;
    for (std::size_t n = 0; n < cols; ++n) density += probs[n] * q[n];
    if (!(density > 0.0)) {
      throw ReconstructionError("em_step: zero mixture density at data point " +
                                std::to_string(k));
    }
    for (std::size_t n = 0; n < cols; ++n) acc[n].add(q[n] / density);
  }
  std::vector<double> next(cols);
  const auto count = static_cast<double>(data.size());
  for (std::size_t n = 0; n < cols; ++n) next[n] = probs[n] / count * acc[n].value();
  return PhotonNumberDistribution::from_weights(std::move(next));
}

namespace {

struct FisherDiagnostics {
  double condition = 1.0;
  bool near_singular = false;
};

FisherDiagnostics fisher_diagnostics(const FockDesign& design, std::span<const double> weights,
                                     std::span<const double> probs) {
  const int free = design.cutoff();
  if (free < 1) return {};
  Eigen::MatrixXd fisher = Eigen::MatrixXd::Zero(free, free);
  Eigen::VectorXd score(free);
  for (std::size_t k = 0; k < design.points(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    if (w == 0.0) continue;
    const auto q = design.row(k);
    double density = 0.0;
    for (std::size_t n = 0; n < q.size(); ++n) density += probs[n] * q[n];
    for (int m = 1; m <= free; ++m) score(m - 1) = (q[static_cast<std::size_t>(m)] - q[0]) / density;
    fisher.noalias() += w * score * score.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(fisher, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double largest = ev(ev.size() - 1);
  FisherDiagnostics out;
  out.condition = largest > 0.0 ? std::max(ev(0), 0.0) / largest : 0.0;
  out.near_singular = out.condition < kFisherSingular;
  return out;
}

}  // namespace

namespace {

// Points that carry weight, row-major, grouped by multiplicity so each group
// contributes w * sum ln P(x) to the log-likelihood.
struct CompactDesign {
  struct Group {
    std::size_t begin = 0;
    std::size_t end = 0;
    double weight = 1.0;
  };

  std::size_t points = 0;
  std::size_t cols = 0;
  std::vector<double> rows;        // points x cols
  std::vector<std::size_t> index;  // original data index of each point
  std::vector<Group> groups;

  const double* row(std::size_t i) const { return rows.data() + i * cols; }
};

CompactDesign compact(const FockDesign& design, std::span<const double> weights) {
  CompactDesign c;
  c.cols = static_cast<std::size_t>(design.cutoff()) + 1;
  for (std::size_t k = 0; k < design.points(); ++k) {
    if (weights.empty() || weights[k] != 0.0) c.index.push_back(k);
  }
  if (!weights.empty()) {
    std::stable_sort(c.index.begin(), c.index.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a] < weights[b]; });
  }
  c.points = c.index.size();
  c.rows.resize(c.cols * c.points);
  for (std::size_t i = 0; i < c.points; ++i) {
    const auto row = design.row(c.index[i]);
    std::copy(row.begin(), row.end(), c.rows.begin() + static_cast<std::ptrdiff_t>(i * c.cols));
  }
  for (std::size_t i = 0; i < c.points;) {
    const double w = weights.empty() ? 1.0 : weights[c.index[i]];
    std::size_t j = i;
    while (j < c.points && (weights.empty() ? 1.0 : weights[c.index[j]]) == w) ++j;
    c.groups.push_back({i, j, w});
    i = j;
  }
  return c;
}

constexpr std::size_t kBlock = 256;

// Running product of densities with the binary exponent stripped off every
// few factors, so one logarithm covers a whole group of points. Factors small
// enough to threaten underflow bypass the product.
class LogProduct {
 public:
  void multiply(double d) {
    if (d < kTiny) {
      direct_.add(std::log(d));
      return;
    }
    mantissa_[pending_ & 1u] *= d;
    if (++pending_ == 8) {
      pending_ = 0;
      renormalize(mantissa_[0]);
      renormalize(mantissa_[1]);
    }
  }

  double log() const {
    CompensatedSum total = direct_;
    total.add(std::log(mantissa_[0]) + std::log(mantissa_[1]));
    total.add(static_cast<double>(exponent_) * std::numbers::ln2);
    return total.value();
  }

 private:
  static constexpr double kTiny = 1e-70;  // four such factors stay above DBL_MIN
  static constexpr std::uint64_t kExponentMask = 0x7ffULL << 52;
  static constexpr std::uint64_t kUnitExponent = 1023ULL << 52;

  void renormalize(double& m) {
    const auto bits = std::bit_cast<std::uint64_t>(m);
    exponent_ += static_cast<std::int64_t>((bits & kExponentMask) >> 52) - 1023;
    m = std::bit_cast<double>((bits & ~kExponentMask) | kUnitExponent);
  }

  CompensatedSum direct_;
  double mantissa_[2] = {1.0, 1.0};
  std::int64_t exponent_ = 0;
  unsigned pending_ = 0;
};

// One sweep over the data: accumulates sum_k w_k Q_n(x_k) / P(x_k) into
// `sums` and returns sum_k w_k ln P(x_k). Partial sums run in blocks of
// kBlock points and are combined with compensation, in a fixed order.
template <std::size_t kCols>
double em_sweep(const CompactDesign& c, const double* p, double* sums, int iteration) {
  const std::size_t cols = kCols > 0 ? kCols : c.cols;
  std::vector<CompensatedSum> totals(cols);
  std::vector<double> block_dynamic(kCols > 0 ? 0 : cols);
  double block_fixed[kCols > 0 ? kCols : 1] = {};
  double* block = kCols > 0 ? block_fixed : block_dynamic.data();

  CompensatedSum loglik;
  std::size_t in_block = 0;
  auto flush = [&] {
    for (std::size_t n = 0; n < cols; ++n) {
      totals[n].add(block[n]);
      block[n] = 0.0;
    }
    in_block = 0;
  };

  for (const auto& group : c.groups) {
    LogProduct product;
    for (std::size_t i = group.begin; i < group.end; ++i) {
      const double* q = c.row(i);
      double density = 0.0;
      for (std::size_t n = 0; n < cols; ++n) density += p[n] * q[n];
      if (!(density > 0.0)) {
        throw ReconstructionError("EM: zero mixture density at data point " +
                                  std::to_string(c.index[i]) + " in iteration " +
                                  std::to_string(iteration));
      }
      const double ratio = group.weight / density;
      for (std::size_t n = 0; n < cols; ++n) block[n] += q[n] * ratio;
      product.multiply(density);
      if (++in_block == kBlock) flush();
    }
    loglik.add(group.weight * product.log());
  }
  flush();
  for (std::size_t n = 0; n < cols; ++n) sums[n] = totals[n].value();
  return loglik.value();
}

using SweepFn = double (*)(const CompactDesign&, const double*, double*, int);

SweepFn select_sweep(std::size_t cols) {
  switch (cols) {
    case 2: return em_sweep<2>;
    case 3: return em_sweep<3>;
    case 4: return em_sweep<4>;
    case 5: return em_sweep<5>;
    case 6: return em_sweep<6>;
    case 7: return em_sweep<7>;
    case 8: return em_sweep<8>;
    case 11: return em_sweep<11>;
    default: return em_sweep<0>;
  }
}

}  // namespace

EmResult em_reconstruct(const FockDesign& design, std::span<const double> weights,
                        const EmOptions& options) {
  if (design.points() == 0) throw std::invalid_argument("em_reconstruct: empty data");
  if (design.cutoff() < 1) throw std::invalid_argument("em_reconstruct: cutoff must be >= 1");
  if (!(options.tol > 0.0)) throw std::invalid_argument("em_reconstruct: tol must be > 0");
  if (options.max_iter < 0) throw std::invalid_argument("em_reconstruct: max_iter must be >= 0");
  if (!weights.empty() && weights.size() != design.points()) {
    throw std::invalid_argument("em_reconstruct: weight count != data count");
  }

  double total_weight = 0.0;
  if (weights.empty()) {
    total_weight = static_cast<double>(design.points());
  } else {
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("em_reconstruct: weights must be finite and >= 0");
      }
      total_weight += w;
    }
    if (!(total_weight > 0.0)) throw std::invalid_argument("em_reconstruct: zero total weight");
  }

  const CompactDesign c = compact(design, weights);
  const std::size_t cols = c.cols;
  const SweepFn sweep = select_sweep(cols);
  std::vector<double> p(cols, 1.0 / static_cast<double>(cols));
  std::vector<bool> pinned(cols, false);
  std::vector<double> sums(cols);

  EmResult result;
  for (int iteration = 0;; ++iteration) {
    const double value = sweep(c, p.data(), sums.data(), iteration);
    result.log_likelihood_trajectory.push_back(value);
    result.iterations = iteration;
    if (iteration > 0) {
      const auto& traj = result.log_likelihood_trajectory;
      if (std::abs(value - traj[traj.size() - 2]) < options.tol * (1.0 + std::abs(value))) {
        result.converged = true;
        break;
      }
    }
    if (iteration >= options.max_iter) break;

    double sum = 0.0;
    for (std::size_t n = 0; n < cols; ++n) {
      double updated = p[n] / total_weight * sums[n];
      if (updated < kPinThreshold) {
        if (p[n] != 0.0) pinned[n] = true;
        updated = 0.0;
      }
      p[n] = updated;
      sum += updated;
    }
    for (double& v : p) v /= sum;
  }

  result.final_log_likelihood = result.log_likelihood_trajectory.back();
  for (std::size_t n = 0; n < cols; ++n) {
    if (pinned[n]) result.pinned_components.push_back(static_cast<int>(n));
  }
  if (options.fisher_diagnostics) {
    const auto diag = fisher_diagnostics(design, weights, p);
    result.fisher_condition = diag.condition;
    result.fisher_near_singular = diag.near_singular;
  } else {
    result.fisher_condition = std::numeric_limits<double>::quiet_NaN();
  }
  result.p_hat = PhotonNumberDistribution(std::move(p));
  return result;
}

EmResult em_reconstruct(std::span<const double> data, int cutoff, const EmOptions& options) {
  if (data.empty()) throw std::invalid_argument("em_reconstruct: empty data");
  if (cutoff < 1 || cutoff > kMaxFockIndex) {
    throw std::invalid_argument("em_reconstruct: cutoff must lie in [1, 64]");
  }
  const FockDesign design(data, cutoff);
  return em_reconstruct(design, {}, options);
}

}  // namespace wigtomo
