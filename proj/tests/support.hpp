#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/quadrature/gauss.hpp>

#include "wigtomo/fock.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("wigtomo_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Uniform point on the simplex of dimension cutoff + 1.
inline wigtomo::PhotonNumberDistribution random_simplex(int cutoff, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(static_cast<std::size_t>(cutoff) + 1);
  for (double& v : w) v = e(rng);
  return wigtomo::PhotonNumberDistribution::from_weights(std::move(w));
}

// Composite 20-point Gauss-Legendre rule over [a, b] with `panels` panels.
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels) {
  double total = 0.0;
  const double h = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    const double lo = a + k * h;
    total += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + h);
  }
  return total;
}

inline double integrate_2d(const std::function<double(double, double)>& f, double a, double b,
                           int panels) {
  return integrate([&](double x) { return integrate([&](double y) { return f(x, y); }, a, b, panels); },
                   a, b, panels);
}

}  // namespace testsupport
