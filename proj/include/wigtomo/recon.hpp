#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wigtomo/fock.hpp"

namespace wigtomo {

/// Normalized quadrature histogram. Values outside the range are tallied in
/// underflow/overflow and excluded from the densities.
struct HistogramModel {
  std::vector<double> bin_edges;
  std::vector<double> densities;
  std::vector<std::int64_t> counts;
  std::int64_t underflow = 0;
  std::int64_t overflow = 0;

  std::size_t bins() const noexcept { return densities.size(); }
  double width(std::size_t b) const { return bin_edges[b + 1] - bin_edges[b]; }
  std::int64_t in_range() const noexcept;
};

inline constexpr int kDefaultBins = 100;
inline constexpr double kDefaultHistogramLow = -5.0;
inline constexpr double kDefaultHistogramHigh = 5.0;

HistogramModel build_histogram(std::span<const double> data, int bins = kDefaultBins,
                               double low = kDefaultHistogramLow,
                               double high = kDefaultHistogramHigh);

/// Q_n averaged over each histogram bin by 8-point Gauss-Legendre; row b,
/// column n (row-major, bins x (cutoff + 1)).
std::vector<double> bin_averaged_fock_densities(const HistogramModel& hist, int cutoff);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

struct LsFitResult {
  PhotonNumberDistribution p = PhotonNumberDistribution::uniform(0);
  int iterations = 0;
  double residual = 0.0;                  // sum of squared density residuals
  double projected_gradient_norm = 0.0;   // ||p - P(p - grad)||
};

/// Simplex-constrained least-squares fit of bin-averaged Fock densities to the
/// histogram, by projected gradient descent with a Barzilai-Borwein trial step
/// and multiplicative backtracking. Throws ReconstructionError if the
/// projected-gradient norm has not dropped below 1e-10 after 1e5 iterations.
LsFitResult fit_mixture_ls(const HistogramModel& hist, int cutoff);

/// Q_n(x_k) for every data point, row-major K x (cutoff + 1).
class FockDesign {
 public:
  FockDesign(std::span<const double> data, int cutoff);

  std::size_t points() const noexcept { return points_; }
  int cutoff() const noexcept { return cutoff_; }
  std::span<const double> row(std::size_t k) const {
    return {values_.data() + k * static_cast<std::size_t>(cutoff_ + 1),
            static_cast<std::size_t>(cutoff_ + 1)};
  }

 private:
  std::size_t points_ = 0;
  int cutoff_ = 0;
  std::vector<double> values_;
};

/// sum_k ln P(x_k), Neumaier-compensated in data order. Throws
/// ReconstructionError naming the first point with zero density.
double log_likelihood(const PhotonNumberDistribution& p, std::span<const double> data);

/// One expectation-maximization update
///   p_m <- (p_m / K) sum_k Q_m(x_k) / sum_n p_n Q_n(x_k).
PhotonNumberDistribution em_step(const PhotonNumberDistribution& p, std::span<const double> data);

struct EmOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  bool fisher_diagnostics = true;
};

struct EmResult {
  PhotonNumberDistribution p_hat = PhotonNumberDistribution::uniform(0);
  int iterations = 0;
  double final_log_likelihood = 0.0;
  bool converged = false;
  std::vector<double> log_likelihood_trajectory;
  /// Components that fell below 1e-300 and were set to exactly zero.
  std::vector<int> pinned_components;
  /// Ratio of smallest to largest eigenvalue of the observed Fisher matrix in
  /// the free (p_1..p_N) coordinates; NaN when diagnostics are disabled.
  double fisher_condition = 0.0;
  bool fisher_near_singular = false;
};

/// EM from the uniform start until |dlogL| < tol (1 + |logL|) or max_iter.
/// Non-convergence is flagged in the result, not thrown.
EmResult em_reconstruct(std::span<const double> data, int cutoff, const EmOptions& options = {});

/// Same iteration on precomputed densities with per-point multiplicities
/// (an empty `weights` means every point counts once). A bootstrap resample
/// is represented exactly by its multiplicities.
EmResult em_reconstruct(const FockDesign& design, std::span<const double> weights,
                        const EmOptions& options = {});

}  // namespace wigtomo
