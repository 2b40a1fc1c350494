#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wigtomo/fock.hpp"
#include "wigtomo/recon.hpp"

namespace wigtomo {

/// Wigner function sampled on a square grid over [-extent, extent]^2.
/// Row i is x_i, column j is y_j.
struct WignerGrid {
  double extent = 0.0;
  int resolution = 0;
  std::vector<double> values;

  double coordinate(int i) const noexcept;
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * resolution + j]; }
  double min() const;
  double max() const;
  /// Two-dimensional trapezoid rule over the grid.
  double integral() const;
};

/// Requires odd resolution >= 11 so the origin is a grid point.
WignerGrid wigner_grid(const PhotonNumberDistribution& p, double extent, int resolution,
                       unsigned threads = 0);

struct NegativityReport {
  double origin = 0.0;
  double grid_min = 0.0;
  double min_radius = 0.0;
};

/// Radial scan of W over r in [0, 6] with step 1e-3.
NegativityReport negativity_report(const PhotonNumberDistribution& p);

inline constexpr int kDefaultReplicas = 400;

struct BootstrapReport {
  int replicas = 0;
  int cutoff = 0;
  std::uint64_t rng_seed = 0;
  std::vector<double> point_p;  // EM estimate from the full data set
  double point_estimate = 0.0;  // W(0,0) of point_p
  double origin_mean = 0.0;
  double origin_std = 0.0;
  double significance = 0.0;    // |W(0,0)| / std when W(0,0) < 0, else 0
  std::vector<double> per_replica_origin;
  std::vector<std::vector<double>> per_replica_p;
};

/// Nonparametric bootstrap of W(0,0): replica r resamples the data with
/// replacement from substream (seed, r) and reruns the EM reconstruction.
BootstrapReport bootstrap_negativity(std::span<const double> data, int cutoff, int replicas,
                                     std::uint64_t rng_seed, const EmOptions& options = {},
                                     unsigned threads = 0);

}  // namespace wigtomo
