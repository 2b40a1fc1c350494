#pragma once

#include <span>
#include <vector>

namespace wigtomo {

/// Largest Fock index accepted by the polynomial and density routines.
inline constexpr int kMaxFockIndex = 64;

/// Diagonal Fock-basis state: probabilities p_0..p_N.
///
/// Always nonnegative and normalized; the constructors reject anything that
/// cannot be brought onto the simplex by a tiny renormalization.
class PhotonNumberDistribution {
 public:
  /// Accepts probabilities whose sum is within 1e-6 of one and renormalizes.
  explicit PhotonNumberDistribution(std::vector<double> probs);

  /// Normalizes arbitrary nonnegative weights with a positive sum.
  static PhotonNumberDistribution from_weights(std::vector<double> weights);
  static PhotonNumberDistribution uniform(int cutoff);
  /// Pure Fock state |n> padded with zeros up to `cutoff` (>= n).
  static PhotonNumberDistribution fock(int n, int cutoff);

  int cutoff() const noexcept { return static_cast<int>(probs_.size()) - 1; }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](int n) const { return probs_.at(static_cast<std::size_t>(n)); }

  /// Mean photon number.
  double mean() const noexcept;

  friend bool operator==(const PhotonNumberDistribution&,
                         const PhotonNumberDistribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Reconstructed photon-number probabilities from the heralded 1550 nm data
/// set (EM estimate, N = 5). Used as the default simulation ground truth.
PhotonNumberDistribution reference_photon_numbers();

/// Physicists' Hermite polynomial H_n(x) via the three-term recurrence.
double hermite(int n, double x);

/// Laguerre polynomial L_n(x) via the three-term recurrence.
double laguerre(int n, double x);

/// Quadrature density of Fock state |n>,
/// Q_n(x) = H_n(x)^2 exp(-x^2) / (sqrt(pi) 2^n n!), vacuum variance 1/2.
double fock_quadrature_pdf(int n, double x);

/// Writes Q_0(x)..Q_N(x) into `out` (size N+1) with a single recurrence pass.
/// Values are bit-identical to fock_quadrature_pdf(n, x).
void fock_quadrature_pdfs(double x, std::span<double> out);

/// Phase-averaged quadrature density sum_n p_n Q_n(x).
double mixture_pdf(const PhotonNumberDistribution& p, double x);

/// Quadrature variance of |n>: (2n + 1) / 2.
double fock_variance(int n);

/// Wigner function of the phase-symmetric state at (x, y).
double wigner_eval(const PhotonNumberDistribution& p, double x, double y);

/// Wigner function at the origin, (1/pi) sum_n (-1)^n p_n.
double wigner_origin(const PhotonNumberDistribution& p);

/// Binomial photon-loss channel with transmission eta in [0, 1].
PhotonNumberDistribution apply_loss(const PhotonNumberDistribution& p, double eta);

}  // namespace wigtomo
