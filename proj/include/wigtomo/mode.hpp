#pragma once

#include <span>
#include <vector>

namespace wigtomo {

/// Discrete temporal mode: one nonnegative weight per sample index,
/// unit Euclidean norm.
struct ModeFunction {
  std::vector<double> weights;
  int peak_index = 0;

  /// Normalizes nonnegative raw weights to unit norm and locates the peak.
  static ModeFunction from_raw(std::vector<double> raw);

  std::size_t size() const noexcept { return weights.size(); }

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// Cosine similarity between two equal-length vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace wigtomo
