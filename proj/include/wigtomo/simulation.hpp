#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "wigtomo/fock.hpp"
#include "wigtomo/mode.hpp"
#include "wigtomo/random.hpp"

namespace wigtomo {

/// f(t) ~ exp(-decay_rate |t - t_peak|), the envelope of a photon leaving a
/// Lorentzian cavity.
struct DoubleExponentialShape {
  double decay_rate = 0.0;  // 1/s
};

/// f(t) ~ exp(-(t - t_peak)^2 / (2 width^2)).
struct GaussianShape {
  double width = 0.0;  // s
};

using ModeShape = std::variant<DoubleExponentialShape, GaussianShape>;

/// Decay rate matching a 120 MHz FWHM cavity: gamma = 2 pi * 120 MHz / 2.
double default_decay_rate();

struct SimulationConfig {
  PhotonNumberDistribution true_p = reference_photon_numbers();
  int segments = 50000;          // heralded batch size K
  int vacuum_segments = 10000;   // calibration batch size
  int samples_per_segment = 1000;
  double sample_interval = 0.5e-9;  // s, 2 GSa/s
  ModeShape mode_shape = DoubleExponentialShape{default_decay_rate()};
  double peak_offset = -10e-9;      // s, mode peak relative to trigger
  double background_variance = 1e-3;  // raw per-sample variance V0
  double signal_gain = 1.0;           // raw units per quadrature unit
  std::uint64_t rng_seed = 1550;

  int trigger_index() const noexcept { return samples_per_segment / 2; }
  int segment_count(bool vacuum) const noexcept { return vacuum ? vacuum_segments : segments; }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  /// 64-bit FNV-1a hash over the canonical JSON form.
  std::uint64_t fingerprint() const;
};

/// A raw homodyne time series around one trigger event.
struct Segment {
  std::vector<double> samples;
  int trigger_index = 0;
};

enum class BatchKind : std::uint8_t { vacuum = 0, heralded = 1 };

const char* to_string(BatchKind kind);

struct SegmentBatch {
  std::vector<Segment> segments;
  BatchKind kind = BatchKind::vacuum;
  std::uint64_t config_fingerprint = 0;

  std::size_t size() const noexcept { return segments.size(); }
  std::size_t samples_per_segment() const noexcept {
    return segments.empty() ? 0 : segments.front().samples.size();
  }
  int trigger_index() const noexcept {
    return segments.empty() ? 0 : segments.front().trigger_index;
  }

  /// Multiplies every raw sample by `gain`.
  SegmentBatch scaled(double gain) const;

  /// Throws InputError if segments differ in length or trigger, or hold non-finite samples.
  void validate() const;
};

/// Draws quadrature values from the phase-averaged Fock mixture
/// sum_n p_n Q_n(x): pick n ~ p, then rejection-sample Q_n under a Gaussian
/// envelope of variance (2n + 1) / 2.
class FockMixtureSampler {
 public:
  explicit FockMixtureSampler(const PhotonNumberDistribution& p);

  double operator()(rng::Engine& engine) const;

  /// sup_x Q_n(x) / g_n(x) for the Gaussian envelope g_n, with a small margin.
  double envelope_bound(int n) const { return bounds_.at(static_cast<std::size_t>(n)); }

 private:
  std::vector<double> cumulative_;
  std::vector<double> bounds_;
};

double sample_quadrature(const FockMixtureSampler& sampler, rng::Engine& engine);

/// Generator-side mode on the segment grid, unit norm, peaked at peak_offset.
ModeFunction synth_mode_function(const SimulationConfig& config);

/// Embeds quadrature `x` along `mode` in white background noise whose
/// component along the mode has been removed, so that
/// sum_i f_i s_i == signal_gain * x.
Segment generate_segment(double x, const ModeFunction& mode, const SimulationConfig& config,
                         rng::Engine& engine);

/// Vacuum batches draw x from Q_0, heralded batches from true_p. Segment i
/// uses substream (rng_seed, kind, i), so the output does not depend on the
/// thread count.
SegmentBatch generate_batch(const SimulationConfig& config, BatchKind kind, unsigned threads = 0);

}  // namespace wigtomo
