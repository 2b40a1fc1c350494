#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "support.hpp"
#include "wigtomo/mode.hpp"
#include "wigtomo/random.hpp"
#include "wigtomo/simulation.hpp"

using namespace wigtomo;
using doctest::Approx;

namespace {

SimulationConfig small_config() {
  SimulationConfig c;
  c.segments = 400;
  c.vacuum_segments = 300;
  c.samples_per_segment = 200;
  return c;
}

}  // namespace

TEST_CASE("substreams are reproducible and distinct") {
  auto a = rng::substream(7, rng::Stream::bootstrap, 3);
  auto b = rng::substream(7, rng::Stream::bootstrap, 3);
  CHECK(a() == b());
  CHECK(rng::substream_seed(7, 1, 0) != rng::substream_seed(7, 2, 0));
  CHECK(rng::substream_seed(7, 1, 0) != rng::substream_seed(7, 1, 1));
  CHECK(rng::substream_seed(7, 1, 0) != rng::substream_seed(8, 1, 0));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(SimulationConfig{}.validate());
  auto bad = [](auto mutate) {
    SimulationConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](SimulationConfig& c) { c.segments = 0; });
  bad([](SimulationConfig& c) { c.vacuum_segments = 0; });
  bad([](SimulationConfig& c) { c.samples_per_segment = 4; });
  bad([](SimulationConfig& c) { c.sample_interval = 0.0; });
  bad([](SimulationConfig& c) { c.background_variance = -1.0; });
  bad([](SimulationConfig& c) { c.signal_gain = 0.0; });
  bad([](SimulationConfig& c) { c.peak_offset = 1.0; });
  bad([](SimulationConfig& c) { c.mode_shape = GaussianShape{0.0}; });
  CHECK(SimulationConfig{}.segments == 50000);
  CHECK(SimulationConfig{}.vacuum_segments == 10000);
  CHECK(SimulationConfig{}.samples_per_segment == 1000);
}

TEST_CASE("fingerprint follows the configuration") {
  SimulationConfig a;
  SimulationConfig b;
  CHECK(a.fingerprint() == b.fingerprint());
  b.rng_seed = 2;
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("envelope bounds dominate the density ratio") {
  const FockMixtureSampler sampler(PhotonNumberDistribution::uniform(10));
  for (int n = 0; n <= 10; ++n) {
    const double var = fock_variance(n);
    double worst = 0.0;
    for (double x = 0.0; x < 12.0; x += 1e-3) {
      const double g = std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
      worst = std::max(worst, fock_quadrature_pdf(n, x) / g);
    }
    CHECK(sampler.envelope_bound(n) >= worst);
    CHECK(sampler.envelope_bound(n) <= worst * 1.001);
  }
}

TEST_CASE("single fock state samples follow Q_n") {
  for (int n : {0, 1, 3}) {
    const FockMixtureSampler sampler(PhotonNumberDistribution::fock(n, n));
    auto engine = rng::substream(99, rng::Stream::heralded_batch, static_cast<std::uint64_t>(n));
    constexpr int draws = 200000;
    constexpr int bins = 40;
    std::vector<double> counts(bins, 0.0);
    double sum2 = 0.0;
    int outside = 0;
    for (int i = 0; i < draws; ++i) {
      const double x = sample_quadrature(sampler, engine);
      sum2 += x * x;
      const int b = static_cast<int>(std::floor((x + 4.0) / 8.0 * bins));
      if (b < 0 || b >= bins) {
        ++outside;
        continue;
      }
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    double chi2 = 0.0;
    int used = 0;
    for (int b = 0; b < bins; ++b) {
      const double lo = -4.0 + 8.0 * b / bins;
      const double mass = testsupport::integrate(
          [n](double x) { return fock_quadrature_pdf(n, x); }, lo, lo + 8.0 / bins, 1);
      const double expected = mass * draws;
      if (expected < 5.0) continue;
      chi2 += (counts[static_cast<std::size_t>(b)] - expected) *
              (counts[static_cast<std::size_t>(b)] - expected) / expected;
      ++used;
    }
    const double pvalue = boost::math::gamma_q((used - 1) / 2.0, chi2 / 2.0);
    CHECK(pvalue > 1e-4);
    CHECK(sum2 / draws == Approx(fock_variance(n)).epsilon(0.02));
    CHECK(outside < draws / 100);
  }
}

TEST_CASE("mixture sampler picks components by weight") {
  const FockMixtureSampler sampler(PhotonNumberDistribution({0.0, 0.0, 1.0}));
  auto engine = rng::substream(1, rng::Stream::heralded_batch, 0);
  double sum2 = 0.0;
  for (int i = 0; i < 50000; ++i) {
    const double x = sampler(engine);
    sum2 += x * x;
  }
  CHECK(sum2 / 50000 == Approx(2.5).epsilon(0.03));
}

TEST_CASE("synthetic mode function") {
  SimulationConfig c = small_config();
  const ModeFunction f = synth_mode_function(c);
  CHECK_NOTHROW(f.validate());
  CHECK(f.size() == 200);
  const int offset = static_cast<int>(std::lround(c.peak_offset / c.sample_interval));
  CHECK(std::abs(f.peak_index - (c.trigger_index() + offset)) <= 1);

  c.mode_shape = GaussianShape{5e-9};
  const ModeFunction g = synth_mode_function(c);
  CHECK_NOTHROW(g.validate());
  CHECK(std::abs(g.peak_index - (c.trigger_index() + offset)) <= 1);
}

TEST_CASE("segment projection recovers the embedded quadrature") {
  SimulationConfig c = small_config();
  c.signal_gain = 3.7;
  const ModeFunction f = synth_mode_function(c);
  auto engine = rng::substream(5, rng::Stream::heralded_batch, 0);
  for (double x : {-2.5, 0.0, 0.7, 4.1}) {
    const Segment seg = generate_segment(x, f, c, engine);
    CHECK(seg.trigger_index == c.trigger_index());
    double proj = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) proj += f.weights[i] * seg.samples[i];
    CHECK(std::abs(proj - c.signal_gain * x) <= 1e-9);
  }
  CHECK_THROWS_AS(generate_segment(0.0, ModeFunction::from_raw({1.0, 2.0}), c, engine),
                  std::invalid_argument);
}

TEST_CASE("batches are deterministic and independent of thread count") {
  const SimulationConfig c = small_config();
  const SegmentBatch a = generate_batch(c, BatchKind::heralded, 1);
  const SegmentBatch b = generate_batch(c, BatchKind::heralded, 3);
  REQUIRE(a.size() == 400);
  CHECK(a.kind == BatchKind::heralded);
  CHECK(a.config_fingerprint == c.fingerprint());
  CHECK(a.samples_per_segment() == 200);
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) identical = identical && a.segments[i].samples == b.segments[i].samples;
  CHECK(identical);

  const SegmentBatch v = generate_batch(c, BatchKind::vacuum, 2);
  CHECK(v.size() == 300);
  CHECK(v.kind == BatchKind::vacuum);
  CHECK(v.segments[0].samples != a.segments[0].samples);
  CHECK_NOTHROW(v.validate());
}

TEST_CASE("batch validation") {
  SegmentBatch b = generate_batch(small_config(), BatchKind::vacuum, 1);
  b.segments[3].samples.pop_back();
  CHECK_THROWS(b.validate());
  b = generate_batch(small_config(), BatchKind::vacuum, 1);
  b.segments[1].samples[4] = NAN;
  CHECK_THROWS(b.validate());
}
