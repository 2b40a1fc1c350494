#include "wigtomo/pipeline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "wigtomo/error.hpp"

namespace wigtomo {

VarianceTrace compute_variance_trace(const SegmentBatch& batch, double baseline_window_fraction) {
  if (batch.size() < 2) throw InputError("variance trace needs at least 2 segments");
  if (!(baseline_window_fraction > 0.0 && baseline_window_fraction <= 0.4)) {
    throw std::invalid_argument("baseline window fraction must lie in (0, 0.4]");
  }
  batch.validate();
  const std::size_t len = batch.samples_per_segment();

  // Welford, one accumulator per index, segments visited in order.
  std::vector<double> mean(len, 0.0);
  std::vector<double> m2(len, 0.0);
  std::size_t count = 0;
  for (const auto& seg : batch.segments) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < len; ++i) {
      const double delta = seg.samples[i] - mean[i];
      mean[i] += delta * inv;
      m2[i] += delta * (seg.samples[i] - mean[i]);
    }
  }

  VarianceTrace trace;
  trace.count = static_cast<int>(count);
  trace.variance.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double v = m2[i] / static_cast<double>(count - 1);
    if (!(v > 0.0)) {
      throw InputError("degenerate segments: zero variance at sample index " + std::to_string(i));
    }
    trace.variance[i] = v;
  }

  const auto window = static_cast<std::size_t>(
      std::ceil(baseline_window_fraction * static_cast<double>(len)));
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) sum += trace.variance[i] + trace.variance[len - 1 - i];
  trace.baseline = sum / static_cast<double>(2 * window);
  return trace;
}

ModeFunction extract_mode_function(const VarianceTrace& trace) {
  if (!(trace.baseline > 0.0)) throw std::invalid_argument("variance trace baseline must be > 0");
  std::vector<double> raw(trace.variance.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double excess = trace.variance[i] - trace.baseline;
    if (excess > 0.0) {
      raw[i] = std::sqrt(excess);
      any = true;
    }
  }
  if (!any) throw NoSignalError("no signal: variance never exceeds the baseline");
  return ModeFunction::from_raw(std::move(raw));
}

std::vector<double> project_quadratures(const SegmentBatch& batch, const ModeFunction& mode) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& samples = batch.segments[k].samples;
    if (samples.size() != mode.size()) {
      throw std::invalid_argument("project_quadratures: segment " + std::to_string(k) +
                                  " length " + std::to_string(samples.size()) +
                                  " != mode length " + std::to_string(mode.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) acc += mode.weights[i] * samples[i];
    out.push_back(acc);
  }
  return out;
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample variance needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

CalibratedPair calibrate(std::span<const double> vacuum_raw, std::span<const double> signal_raw) {
  if (vacuum_raw.size() < 100) {
    throw InputError("calibration needs at least 100 vacuum values, got " +
                     std::to_string(vacuum_raw.size()));
  }
  const double var = sample_variance(vacuum_raw);
  if (!(var > 0.0) || !std::isfinite(var)) throw InputError("vacuum reference has zero variance");
  const double scale = std::sqrt(var / 0.5);

  auto make = [scale](std::span<const double> raw, BatchKind kind) {
    QuadratureDataset ds;
    ds.calibration_scale = scale;
    ds.source_kind = kind;
    ds.values.reserve(raw.size());
    for (double v : raw) {
      if (!std::isfinite(v)) throw InputError("non-finite raw quadrature value");
      ds.values.push_back(v / scale);
    }
    return ds;
  };
  return {make(vacuum_raw, BatchKind::vacuum), make(signal_raw, BatchKind::heralded)};
}

double excess_variance_significance(const QuadratureDataset& vacuum,
                                    const QuadratureDataset& heralded) {
  const double vv = sample_variance(vacuum.values);
  const double vh = sample_variance(heralded.values);
  const double se_v = vv * std::sqrt(2.0 / static_cast<double>(vacuum.values.size() - 1));
  const double se_h = vh * std::sqrt(2.0 / static_cast<double>(heralded.values.size() - 1));
  return (vh - vv) / (se_v + se_h);
}

}  // namespace wigtomo
