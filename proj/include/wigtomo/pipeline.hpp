#pragma once

#include <span>
#include <vector>

#include "wigtomo/mode.hpp"
#include "wigtomo/simulation.hpp"

namespace wigtomo {

/// Per-index variance across segments and its asymptotic floor V0.
struct VarianceTrace {
  std::vector<double> variance;
  double baseline = 0.0;
  int count = 0;
};

/// Calibrated quadratures in vacuum units (vacuum variance 1/2).
struct QuadratureDataset {
  std::vector<double> values;
  double calibration_scale = 1.0;  // raw units per vacuum-normalized unit
  BatchKind source_kind = BatchKind::heralded;
};

struct CalibratedPair {
  QuadratureDataset vacuum;
  QuadratureDataset heralded;
};

inline constexpr double kDefaultBaselineFraction = 0.1;

/// Unbiased per-index variance over segments (accumulated in segment order).
/// The baseline is the mean over the first and last ceil(fraction * length)
/// indices.
VarianceTrace compute_variance_trace(const SegmentBatch& batch,
                                     double baseline_window_fraction = kDefaultBaselineFraction);

/// f(i) = sqrt(max(V(i) - V0, 0)), normalized. Throws NoSignalError if no
/// index rises above the baseline.
ModeFunction extract_mode_function(const VarianceTrace& trace);

/// Mode-weighted sum of every segment, in batch order.
std::vector<double> project_quadratures(const SegmentBatch& batch, const ModeFunction& mode);

/// Scales both vectors so the vacuum data have variance exactly 1/2.
CalibratedPair calibrate(std::span<const double> vacuum_raw, std::span<const double> signal_raw);

/// Unbiased sample variance.
double sample_variance(std::span<const double> values);

/// z-score of the heralded variance excess over the vacuum variance, using
/// the normal-theory standard error of each variance.
double excess_variance_significance(const QuadratureDataset& vacuum,
                                    const QuadratureDataset& heralded);

}  // namespace wigtomo
