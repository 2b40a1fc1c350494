#include "wigtomo/mode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wigtomo {

ModeFunction ModeFunction::from_raw(std::vector<double> raw) {
  double norm2 = 0.0;
  for (double w : raw) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("mode weights must be finite and nonnegative");
    }
    norm2 += w * w;
  }
  if (!(norm2 > 0.0)) throw std::invalid_argument("mode weights are all zero");
  const double norm = std::sqrt(norm2);
  for (double& w : raw) w /= norm;
  ModeFunction mode;
  mode.peak_index = static_cast<int>(std::max_element(raw.begin(), raw.end()) - raw.begin());
  mode.weights = std::move(raw);
  return mode;
}

void ModeFunction::validate() const {
  if (weights.empty()) throw std::invalid_argument("mode function is empty");
  double norm2 = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("mode weights must be finite and nonnegative");
    }
    norm2 += w * w;
  }
  if (std::abs(norm2 - 1.0) > 1e-9) throw std::invalid_argument("mode function is not unit norm");
  const auto peak = std::max_element(weights.begin(), weights.end()) - weights.begin();
  if (peak_index < 0 || static_cast<std::size_t>(peak_index) >= weights.size() ||
      weights[static_cast<std::size_t>(peak_index)] != weights[static_cast<std::size_t>(peak)]) {
    throw std::invalid_argument("mode peak_index is not the argmax");
  }
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw std::invalid_argument("cosine_similarity: zero vector");
  return ab / std::sqrt(aa * bb);
}

}  // namespace wigtomo
