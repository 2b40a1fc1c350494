#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "wigtomo/pipeline.hpp"
#include "wigtomo/recon.hpp"
#include "wigtomo/simulation.hpp"

namespace wigtomo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCriteriaFailed = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNoSignal = 3;
inline constexpr int kExitReconstruction = 4;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "WIGTOMO_OUTPUT_DIR";

/// Every tunable of the command-line tool.
struct RunConfig {
  SimulationConfig simulation;
  double baseline_fraction = kDefaultBaselineFraction;
  double min_significance = 5.0;  // heralded excess-variance z-score
  int bins = kDefaultBins;
  double range_low = kDefaultHistogramLow;
  double range_high = kDefaultHistogramHigh;
  int cutoff = 5;
  double tol = 1e-10;
  int max_iter = 10000;
  double extent = 4.0;
  int resolution = 201;
  int replicas = 400;
  unsigned threads = 0;
  std::filesystem::path output_dir = ".";

  std::uint64_t seed() const noexcept { return simulation.rng_seed; }
};

/// Canonical form echoed into outputs. Paths and thread count are left out so
/// identical runs in different directories produce identical bytes.
nlohmann::json to_json(const RunConfig& config);
/// Overlays the keys present in `j`; InputError on unknown keys or bad types.
void apply_json(RunConfig& config, const nlohmann::json& j);

/// Parses `args` (without the program name) and runs the selected command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace wigtomo::cli
