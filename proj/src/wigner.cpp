#include "wigtomo/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "wigtomo/error.hpp"
#include "wigtomo/parallel.hpp"
#include "wigtomo/random.hpp"

namespace wigtomo {

double WignerGrid::coordinate(int i) const noexcept {
  // Exactly antisymmetric about the center index; the center is exactly 0.
  const int half = resolution - 1;
  return extent * static_cast<double>(2 * i - half) / static_cast<double>(half);
}

double WignerGrid::min() const { return *std::min_element(values.begin(), values.end()); }
double WignerGrid::max() const { return *std::max_element(values.begin(), values.end()); }

double WignerGrid::integral() const {
  const double h = 2.0 * extent / static_cast<double>(resolution - 1);
  double sum = 0.0;
  for (int i = 0; i < resolution; ++i) {
    const double wi = (i == 0 || i == resolution - 1) ? 0.5 : 1.0;
    for (int j = 0; j < resolution; ++j) {
      const double wj = (j == 0 || j == resolution - 1) ? 0.5 : 1.0;
      sum += wi * wj * at(i, j);
    }
  }
  return sum * h * h;
}

WignerGrid wigner_grid(const PhotonNumberDistribution& p, double extent, int resolution,
                       unsigned threads) {
  if (!(extent > 0.0) || !std::isfinite(extent)) {
    throw std::invalid_argument("wigner_grid: extent must be > 0");
  }
  if (resolution < 11) throw std::invalid_argument("wigner_grid: resolution must be >= 11");
  if (resolution % 2 == 0) {
    throw std::invalid_argument("wigner_grid: resolution must be odd so the origin is sampled");
  }
  WignerGrid grid;
  grid.extent = extent;
  grid.resolution = resolution;
  grid.values.resize(static_cast<std::size_t>(resolution) * resolution);
  parallel_for(
      static_cast<std::size_t>(resolution),
      [&](std::size_t row) {
        const double x = grid.coordinate(static_cast<int>(row));
        for (int j = 0; j < resolution; ++j) {
          grid.values[row * resolution + j] = wigner_eval(p, x, grid.coordinate(j));
        }
      },
      threads);
  return grid;
}

NegativityReport negativity_report(const PhotonNumberDistribution& p) {
  constexpr double step = 1e-3;
  constexpr int points = 6000;
  NegativityReport report;
  report.origin = wigner_origin(p);
  report.grid_min = report.origin;
  report.min_radius = 0.0;
  for (int i = 1; i <= points; ++i) {
    const double r = i * step;
    const double w = wigner_eval(p, r, 0.0);
    if (w < report.grid_min) {
      report.grid_min = w;
      report.min_radius = r;
    }
  }
  return report;
}

BootstrapReport bootstrap_negativity(std::span<const double> data, int cutoff, int replicas,
                                     std::uint64_t rng_seed, const EmOptions& options,
                                     unsigned threads) {
  if (data.empty()) throw std::invalid_argument("bootstrap_negativity: empty data");
  if (replicas < 2) throw std::invalid_argument("bootstrap_negativity: need at least 2 replicas");

  const FockDesign design(data, cutoff);
  EmOptions replica_options = options;
  replica_options.fisher_diagnostics = false;

  BootstrapReport report;
  report.replicas = replicas;
  report.cutoff = cutoff;
  report.rng_seed = rng_seed;
  const auto point = em_reconstruct(design, {}, replica_options).p_hat;
  report.point_p.assign(point.probs().begin(), point.probs().end());
  report.point_estimate = wigner_origin(point);
  report.per_replica_origin.resize(static_cast<std::size_t>(replicas));
  report.per_replica_p.resize(static_cast<std::size_t>(replicas));

  const std::size_t size = data.size();
  parallel_for(
      static_cast<std::size_t>(replicas),
      [&](std::size_t r) {
        auto engine = rng::substream(rng_seed, rng::Stream::bootstrap, r);
        std::uniform_int_distribution<std::size_t> pick(0, size - 1);
        std::vector<double> multiplicity(size, 0.0);
        for (std::size_t i = 0; i < size; ++i) multiplicity[pick(engine)] += 1.0;
        try {
          const EmResult fit = em_reconstruct(design, multiplicity, replica_options);
          report.per_replica_origin[r] = wigner_origin(fit.p_hat);
          const auto probs = fit.p_hat.probs();
          report.per_replica_p[r].assign(probs.begin(), probs.end());
        } catch (const std::exception& e) {
          throw ReconstructionError("bootstrap replica " + std::to_string(r) + " failed: " +
                                    e.what());
        }
      },
      threads);

  double mean = 0.0;
  for (double w : report.per_replica_origin) mean += w;
  mean /= static_cast<double>(replicas);
  double ss = 0.0;
  for (double w : report.per_replica_origin) ss += (w - mean) * (w - mean);
  report.origin_mean = mean;
  report.origin_std = std::sqrt(ss / static_cast<double>(replicas - 1));
  if (report.point_estimate < 0.0 && report.origin_std > 0.0) {
    report.significance = std::abs(report.point_estimate) / report.origin_std;
  }
  return report;
}

}  // namespace wigtomo
