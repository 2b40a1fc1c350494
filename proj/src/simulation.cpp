#include "wigtomo/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "wigtomo/error.hpp"
#include "wigtomo/io.hpp"
#include "wigtomo/parallel.hpp"

namespace wigtomo {

double default_decay_rate() { return 2.0 * std::numbers::pi * 120e6 / 2.0; }

void SimulationConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("simulation config: " + msg); };
  if (segments < 1) fail("segments must be >= 1");
  if (vacuum_segments < 1) fail("vacuum_segments must be >= 1");
  if (samples_per_segment < 16) fail("samples_per_segment must be >= 16");
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) fail("sample_interval must be > 0");
  if (!(background_variance > 0.0) || !std::isfinite(background_variance)) {
    fail("background_variance must be > 0");
  }
  if (!(signal_gain > 0.0) || !std::isfinite(signal_gain)) fail("signal_gain must be > 0");
  if (!(std::abs(peak_offset) < samples_per_segment * sample_interval / 2.0)) {
    fail("peak_offset must lie inside the segment window");
  }
  std::visit(
      [&](const auto& shape) {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, DoubleExponentialShape>) {
          if (!(shape.decay_rate > 0.0)) fail("decay_rate must be > 0");
        } else {
          if (!(shape.width > 0.0)) fail("gaussian width must be > 0");
        }
      },
      mode_shape);
}

std::uint64_t SimulationConfig::fingerprint() const {
  const std::string canonical = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* to_string(BatchKind kind) {
  return kind == BatchKind::vacuum ? "vacuum" : "heralded";
}

SegmentBatch SegmentBatch::scaled(double gain) const {
  SegmentBatch out = *this;
  for (auto& seg : out.segments) {
    for (double& s : seg.samples) s *= gain;
  }
  return out;
}

void SegmentBatch::validate() const {
  if (segments.empty()) return;
  const std::size_t len = samples_per_segment();
  const int trigger = trigger_index();
  if (trigger < 0 || static_cast<std::size_t>(trigger) >= len) {
    throw InputError("segment trigger index out of bounds");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (seg.samples.size() != len || seg.trigger_index != trigger) {
      throw InputError("segment " + std::to_string(i) + " differs in length or trigger index");
    }
    for (double s : seg.samples) {
      if (!std::isfinite(s)) throw InputError("segment " + std::to_string(i) + " holds a non-finite sample");
    }
  }
}

namespace {

double gaussian_envelope(int n, double x) {
  const double var = fock_variance(n);
  return std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

double envelope_ratio(int n, double x) {
  return fock_quadrature_pdf(n, x) / gaussian_envelope(n, x);
}

// The ratio is even in x with at most n+1 local maxima on x >= 0 and decays
// like x^{2n} exp(-x^2 n/(n + 1/2)); a grid scan finds the global bump, a
// golden-section search polishes it.
double envelope_sup(int n) {
  constexpr double step = 1e-3;
  const double span = 6.0 + 2.0 * std::sqrt(2.0 * n + 1.0);
  double best_x = 0.0;
  double best = envelope_ratio(n, 0.0);
  for (double x = step; x <= span; x += step) {
    const double r = envelope_ratio(n, x);
    if (r > best) {
      best = r;
      best_x = x;
    }
  }
  double lo = std::max(0.0, best_x - step);
  double hi = best_x + step;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (envelope_ratio(n, a) > envelope_ratio(n, b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  best = std::max(best, envelope_ratio(n, 0.5 * (lo + hi)));
  return best * (1.0 + 1e-9);
}

}  // namespace

FockMixtureSampler::FockMixtureSampler(const PhotonNumberDistribution& p) {
  const auto probs = p.probs();
  cumulative_.resize(probs.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    acc += probs[n];
    cumulative_[n] = acc;
  }
  // Absorb rounding so the last nonzero component catches u -> 1.
  for (std::size_t n = probs.size(); n-- > 0;) {
    if (probs[n] > 0.0) {
      for (std::size_t m = n; m < probs.size(); ++m) cumulative_[m] = 1.0;
      break;
    }
  }
  bounds_.resize(probs.size());
  for (std::size_t n = 0; n < probs.size(); ++n) {
    bounds_[n] = probs[n] > 0.0 ? envelope_sup(static_cast<int>(n)) : 0.0;
  }
}

double FockMixtureSampler::operator()(rng::Engine& engine) const {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(engine);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const int n = static_cast<int>(std::min<std::ptrdiff_t>(
      it - cumulative_.begin(), static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));

  std::normal_distribution<double> envelope(0.0, std::sqrt(fock_variance(n)));
  const double bound = bounds_[static_cast<std::size_t>(n)];
  while (true) {
    const double x = envelope(engine);
    const double accept = uniform(engine) * bound * gaussian_envelope(n, x);
    if (accept <= fock_quadrature_pdf(n, x)) return x;
  }
}

double sample_quadrature(const FockMixtureSampler& sampler, rng::Engine& engine) {
  return sampler(engine);
}

ModeFunction synth_mode_function(const SimulationConfig& config) {
  config.validate();
  const int len = config.samples_per_segment;
  const int trigger = config.trigger_index();
  std::vector<double> raw(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    const double dt = (i - trigger) * config.sample_interval - config.peak_offset;
    raw[static_cast<std::size_t>(i)] = std::visit(
        [dt](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, DoubleExponentialShape>) {
            return std::exp(-shape.decay_rate * std::abs(dt));
          } else {
            return std::exp(-dt * dt / (2.0 * shape.width * shape.width));
          }
        },
        config.mode_shape);
  }
  return ModeFunction::from_raw(std::move(raw));
}

Segment generate_segment(double x, const ModeFunction& mode, const SimulationConfig& config,
                         rng::Engine& engine) {
  const auto len = static_cast<std::size_t>(config.samples_per_segment);
  if (mode.size() != len) {
    throw std::invalid_argument("generate_segment: mode length " + std::to_string(mode.size()) +
                                " != samples_per_segment " + std::to_string(len));
  }
  std::normal_distribution<double> noise(0.0, std::sqrt(config.background_variance));
  Segment seg;
  seg.trigger_index = config.trigger_index();
  seg.samples.resize(len);
  double along = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    seg.samples[i] = noise(engine);
    along += mode.weights[i] * seg.samples[i];
  }
  const double amplitude = config.signal_gain * x;
  for (std::size_t i = 0; i < len; ++i) {
    seg.samples[i] += (amplitude - along) * mode.weights[i];
  }
  return seg;
}

SegmentBatch generate_batch(const SimulationConfig& config, BatchKind kind, unsigned threads) {
  config.validate();
  const bool vacuum = kind == BatchKind::vacuum;
  const auto count = static_cast<std::size_t>(config.segment_count(vacuum));
  const ModeFunction mode = synth_mode_function(config);
  const FockMixtureSampler sampler(vacuum ? PhotonNumberDistribution::fock(0, 0) : config.true_p);
  const auto stream = vacuum ? rng::Stream::vacuum_batch : rng::Stream::heralded_batch;

  SegmentBatch batch;
  batch.kind = kind;
  batch.config_fingerprint = config.fingerprint();
  batch.segments.resize(count);
  parallel_for(
      count,
      [&](std::size_t i) {
        auto engine = rng::substream(config.rng_seed, stream, i);
        const double x = sample_quadrature(sampler, engine);
        batch.segments[i] = generate_segment(x, mode, config, engine);
      },
      threads);
  return batch;
}

}  // namespace wigtomo
