#include "wigtomo/fock.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wigtomo {

namespace {

void check_index(int n, const char* what) {
  if (n < 0 || n > kMaxFockIndex) {
    throw std::invalid_argument(std::string(what) + ": index " + std::to_string(n) +
                                " outside [0, " + std::to_string(kMaxFockIndex) + "]");
  }
}

// log(1 / (sqrt(pi) 2^n n!))
double log_fock_prefactor(int n) {
  return -0.5 * std::log(std::numbers::pi) - n * std::numbers::ln2 - std::lgamma(n + 1.0);
}

double scaled_square(double h, double log_prefactor, double x) {
  if (h == 0.0) return 0.0;
  if (!std::isfinite(h)) return 0.0;  // |x| so large the density underflows anyway
  return std::exp(2.0 * std::log(std::abs(h)) + log_prefactor - x * x);
}

}  // namespace

PhotonNumberDistribution::PhotonNumberDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("photon-number distribution is empty");
  if (cutoff() > kMaxFockIndex) throw std::invalid_argument("photon-number cutoff too large");
  double sum = 0.0;
  for (double v : probs_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("photon-number probabilities must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("photon-number probabilities sum to " + std::to_string(sum));
  }
  for (double& v : probs_) v /= sum;
}

PhotonNumberDistribution PhotonNumberDistribution::from_weights(std::vector<double> weights) {
  double sum = 0.0;
  for (double v : weights) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("weights must be finite and >= 0");
    }
    sum += v;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("weights must have a positive sum");
  for (double& v : weights) v /= sum;
  return PhotonNumberDistribution(std::move(weights));
}

PhotonNumberDistribution PhotonNumberDistribution::uniform(int cutoff) {
  check_index(cutoff, "uniform");
  return PhotonNumberDistribution(
      std::vector<double>(static_cast<std::size_t>(cutoff) + 1, 1.0 / (cutoff + 1)));
}

PhotonNumberDistribution PhotonNumberDistribution::fock(int n, int cutoff) {
  check_index(n, "fock");
  check_index(cutoff, "fock");
  if (cutoff < n) throw std::invalid_argument("fock: cutoff below photon number");
  std::vector<double> probs(static_cast<std::size_t>(cutoff) + 1, 0.0);
  probs[static_cast<std::size_t>(n)] = 1.0;
  return PhotonNumberDistribution(std::move(probs));
}

double PhotonNumberDistribution::mean() const noexcept {
  double m = 0.0;
  for (std::size_t n = 0; n < probs_.size(); ++n) m += static_cast<double>(n) * probs_[n];
  return m;
}

PhotonNumberDistribution reference_photon_numbers() {
  return PhotonNumberDistribution({0.392, 0.572, 0.003, 0.028, 0.004, 0.001});
}

double hermite(int n, double x) {
  check_index(n, "hermite");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 2.0 * x;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * x * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double laguerre(int n, double x) {
  check_index(n, "laguerre");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = 1.0 - x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double fock_quadrature_pdf(int n, double x) {
  check_index(n, "fock_quadrature_pdf");
  return scaled_square(hermite(n, x), log_fock_prefactor(n), x);
}

void fock_quadrature_pdfs(double x, std::span<double> out) {
  if (out.empty()) return;
  const int cutoff = static_cast<int>(out.size()) - 1;
  check_index(cutoff, "fock_quadrature_pdfs");
  // Same recurrence as hermite(), so each entry matches fock_quadrature_pdf bitwise.
  double prev = 1.0;
  double cur = 2.0 * x;
  out[0] = scaled_square(1.0, log_fock_prefactor(0), x);
  for (int n = 1; n <= cutoff; ++n) {
    if (n > 1) {
      const double next = 2.0 * x * cur - 2.0 * (n - 1) * prev;
      prev = cur;
      cur = next;
    }
    out[static_cast<std::size_t>(n)] = scaled_square(cur, log_fock_prefactor(n), x);
  }
}

double mixture_pdf(const PhotonNumberDistribution& p, double x) {
  std::vector<double> q(p.probs().size());
  fock_quadrature_pdfs(x, q);
  double sum = 0.0;
  for (std::size_t n = 0; n < q.size(); ++n) sum += p.probs()[n] * q[n];
  return sum;
}

double fock_variance(int n) {
  if (n < 0) throw std::invalid_argument("fock_variance: negative photon number");
  return (2.0 * n + 1.0) / 2.0;
}

double wigner_eval(const PhotonNumberDistribution& p, double x, double y) {
  const double r2 = x * x + y * y;
  const double arg = 2.0 * r2;
  // Laguerre recurrence shared across n.
  const auto probs = p.probs();
  double sum = probs[0];
  double prev = 1.0;
  double cur = 1.0 - arg;
  for (std::size_t n = 1; n < probs.size(); ++n) {
    if (n > 1) {
      const double k = static_cast<double>(n - 1);
      const double next = ((2.0 * k + 1.0 - arg) * cur - k * prev) / (k + 1.0);
      prev = cur;
      cur = next;
    }
    const double term = probs[n] * cur;
    sum += (n % 2 == 0) ? term : -term;
  }
  return sum * std::exp(-r2) / std::numbers::pi;
}

double wigner_origin(const PhotonNumberDistribution& p) {
  const auto probs = p.probs();
  double sum = probs[0];
  for (std::size_t n = 1; n < probs.size(); ++n) {
    sum += (n % 2 == 0) ? probs[n] : -probs[n];
  }
  return sum * 1.0 / std::numbers::pi;
}

PhotonNumberDistribution apply_loss(const PhotonNumberDistribution& p, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("apply_loss: transmission must lie in [0, 1]");
  }
  const auto probs = p.probs();
  const int cutoff = p.cutoff();
  std::vector<double> out(probs.size(), 0.0);
  for (int n = 0; n <= cutoff; ++n) {
    const double pn = probs[static_cast<std::size_t>(n)];
    if (pn == 0.0) continue;
    // Binomial(n, eta) weights built up by the ratio C(n,m+1)/C(n,m).
    double coeff = 1.0;
    for (int m = 0; m <= n; ++m) {
      out[static_cast<std::size_t>(m)] +=
          pn * coeff * std::pow(eta, m) * std::pow(1.0 - eta, n - m);
      coeff = coeff * (n - m) / (m + 1.0);
    }
  }
  return PhotonNumberDistribution::from_weights(std::move(out));
}

}  // namespace wigtomo
