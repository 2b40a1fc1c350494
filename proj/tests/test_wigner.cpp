#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "support.hpp"
#include "wigtomo/error.hpp"
#include "wigtomo/random.hpp"
#include "wigtomo/simulation.hpp"
#include "wigtomo/wigner.hpp"

using namespace wigtomo;
using doctest::Approx;

namespace {

std::vector<double> draw(const PhotonNumberDistribution& p, int count, std::uint64_t seed) {
  const FockMixtureSampler sampler(p);
  auto engine = rng::substream(seed, rng::Stream::heralded_batch, 0);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& x : out) x = sampler(engine);
  return out;
}

}  // namespace

TEST_CASE("grid validation and layout") {
  const auto p = reference_photon_numbers();
  CHECK_THROWS_AS(wigner_grid(p, 4.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(wigner_grid(p, 4.0, 9), std::invalid_argument);
  CHECK_THROWS_AS(wigner_grid(p, 0.0, 11), std::invalid_argument);

  const WignerGrid g = wigner_grid(p, 3.0, 31);
  CHECK(g.values.size() == 31u * 31u);
  CHECK(g.coordinate(0) == -3.0);
  CHECK(g.coordinate(15) == 0.0);
  CHECK(g.coordinate(30) == 3.0);
  CHECK(g.at(4, 9) == wigner_eval(p, g.coordinate(4), g.coordinate(9)));
}

TEST_CASE("vacuum grid") {
  const WignerGrid g = wigner_grid(PhotonNumberDistribution({1.0}), 3.0, 21);
  CHECK(g.min() > 0.0);
  CHECK(g.max() == g.at(10, 10));
  CHECK(g.at(10, 10) == Approx(1.0 / std::numbers::pi).epsilon(1e-15));
}

TEST_CASE("reference state grid") {
  const auto p = reference_photon_numbers();
  const WignerGrid g = wigner_grid(p, 4.0, 201);
  CHECK(g.at(100, 100) == wigner_origin(p));
  CHECK(g.at(100, 100) == Approx(-0.0643).epsilon(1e-3));
  CHECK(g.min() == g.at(100, 100));
  CHECK(g.integral() == Approx(1.0).epsilon(2e-3));
}

TEST_CASE("grid symmetries") {
  std::mt19937_64 rng(53);
  const auto p = testsupport::random_simplex(7, rng);
  const WignerGrid g = wigner_grid(p, 5.0, 41, 3);
  const int last = g.resolution - 1;
  for (int i = 0; i <= last; ++i) {
    for (int j = 0; j <= last; ++j) {
      const double v = g.at(i, j);
      CHECK(std::abs(v - g.at(j, i)) <= 1e-12);
      CHECK(std::abs(v - g.at(last - i, j)) <= 1e-12);
      CHECK(std::abs(v - g.at(i, last - j)) <= 1e-12);
    }
  }
  CHECK(g.integral() == Approx(1.0).epsilon(2e-3));
}

TEST_CASE("negativity report") {
  const auto single = negativity_report(PhotonNumberDistribution({0.0, 1.0}));
  CHECK(single.origin == Approx(-1.0 / std::numbers::pi).epsilon(1e-15));
  CHECK(single.grid_min == single.origin);
  CHECK(single.min_radius == 0.0);

  CHECK(negativity_report(PhotonNumberDistribution({1.0})).grid_min > 0.0);
  CHECK(negativity_report(reference_photon_numbers()).origin == Approx(-0.0643).epsilon(2e-3));

  // |2>: W is positive at the origin and most negative on the ring L_2(2r^2) minimum.
  const auto two = negativity_report(PhotonNumberDistribution({0.0, 0.0, 1.0}));
  CHECK(two.origin > 0.0);
  CHECK(two.grid_min < 0.0);
  CHECK(two.min_radius > 0.5);
  double best = INFINITY;
  for (double r = 0.0; r <= 6.0; r += 1e-4) best = std::min(best, wigner_eval(PhotonNumberDistribution({0.0, 0.0, 1.0}), r, 0.0));
  CHECK(two.grid_min == Approx(best).epsilon(1e-5));
}

TEST_CASE("bootstrap basics") {
  const std::vector<double> tiny = {-0.3, 0.8};
  const BootstrapReport r = bootstrap_negativity(tiny, 1, 2, 9);
  CHECK(r.replicas == 2);
  CHECK(r.origin_std >= 0.0);
  CHECK(r.per_replica_p.size() == 2);
  CHECK(r.rng_seed == 9);
  CHECK_THROWS_AS(bootstrap_negativity(tiny, 1, 1, 9), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_negativity(std::vector<double>{}, 1, 5, 9), std::invalid_argument);
}

TEST_CASE("bootstrap is deterministic and thread-count independent") {
  const auto data = draw(reference_photon_numbers(), 3000, 61);
  const BootstrapReport a = bootstrap_negativity(data, 5, 12, 77, {}, 1);
  const BootstrapReport b = bootstrap_negativity(data, 5, 12, 77, {}, 4);
  CHECK(a.per_replica_origin == b.per_replica_origin);
  CHECK(a.per_replica_p == b.per_replica_p);
  CHECK(a.origin_std == b.origin_std);
  const BootstrapReport c = bootstrap_negativity(data, 5, 12, 78, {}, 1);
  CHECK(c.per_replica_origin != a.per_replica_origin);

  for (const auto& row : a.per_replica_p) {
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == Approx(1.0).epsilon(1e-12));
  }
  CHECK(a.point_p.size() == 6);
  CHECK(a.point_estimate == wigner_origin(PhotonNumberDistribution(a.point_p)));
  if (a.point_estimate < 0.0) {
    CHECK(a.significance == Approx(-a.point_estimate / a.origin_std));
  } else {
    CHECK(a.significance == 0.0);
  }
}

TEST_CASE("bootstrap spread shrinks with sample size") {
  const auto truth = reference_photon_numbers();
  const auto small = draw(truth, 2000, 71);
  const auto large = draw(truth, 8000, 72);
  const double s_small = bootstrap_negativity(small, 5, 60, 5).origin_std;
  const double s_large = bootstrap_negativity(large, 5, 60, 5).origin_std;
  CHECK(s_small > s_large);
  // K^{-1/2} scaling predicts a ratio of 2.
  CHECK(s_small / s_large >= 2.0 / 1.5);
  CHECK(s_small / s_large <= 2.0 * 1.5);
}

TEST_CASE("negativity certificate on simulated data") {
  const auto data = draw(reference_photon_numbers(), 20000, 81);
  const BootstrapReport r = bootstrap_negativity(data, 5, 40, 3);
  CHECK(r.origin_mean < 0.0);
  CHECK(r.origin_mean + 3.0 * r.origin_std < 0.0);
}

TEST_CASE("vacuum data give no significance") {
  const auto data = draw(PhotonNumberDistribution({1.0}), 2000, 91);
  const BootstrapReport r = bootstrap_negativity(data, 3, 10, 1);
  CHECK(r.point_estimate > 0.0);
  CHECK(r.significance == 0.0);
}
