#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "wigtomo/pipeline.hpp"
#include "wigtomo/recon.hpp"
#include "wigtomo/simulation.hpp"
#include "wigtomo/wigner.hpp"

namespace wigtomo {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Segment batch binary layout (all little-endian):
//   0  char[4]  magic "HSEG"
//   4  u16      format version
//   6  u8       kind (0 vacuum, 1 heralded)
//   7  u8[9]    reserved, zero
//  16  u32      segment count
//  20  u32      samples per segment
//  24  u32      trigger index
//  28  f32[]    samples, segment-major
inline constexpr char kBatchMagic[4] = {'H', 'S', 'E', 'G'};
inline constexpr std::uint16_t kBatchVersion = 1;
inline constexpr std::size_t kBatchHeaderSize = 16;

void write_batch(const fs::path& path, const SegmentBatch& batch);
/// Throws InputError on a missing file, bad magic/version/kind or truncation.
SegmentBatch read_batch(const fs::path& path);
/// FNV-1a over the samples as stored on disk (float32).
std::uint64_t content_checksum(const SegmentBatch& batch);
/// One segment per row.
void write_batch_csv(const fs::path& path, const SegmentBatch& batch);

/// Sidecar path for a batch file: "<file>.json".
fs::path metadata_path(const fs::path& batch_path);
void write_batch_metadata(const fs::path& batch_path, const SimulationConfig& config,
                          const SegmentBatch& batch);

json to_json(const SimulationConfig& config);
/// Overlays the keys present in `j` onto `base`.
SimulationConfig simulation_config_from_json(const json& j, SimulationConfig base = {});
std::string fingerprint_hex(std::uint64_t fingerprint);

/// Reads a JSON document; InputError if missing or malformed.
json read_json(const fs::path& path);
/// Pretty-printed JSON followed by a newline.
void write_json(const fs::path& path, const json& doc);

/// Header comments ("# key: value") then one value per line.
void write_quadratures_csv(const fs::path& path, const QuadratureDataset& data,
                           const json& metadata = json::object());

struct QuadratureFile {
  QuadratureDataset data;
  json metadata = json::object();
};
QuadratureFile read_quadratures_csv(const fs::path& path);

/// Columns: time offset from trigger (s), weight.
void write_mode_csv(const fs::path& path, const ModeFunction& mode, int trigger_index,
                    double sample_interval, const json& metadata = json::object());
/// Columns: time offset from trigger (s), variance; baseline in the header.
void write_variance_trace_csv(const fs::path& path, const VarianceTrace& trace, int trigger_index,
                              double sample_interval, const json& metadata = json::object());

json to_json(const HistogramModel& hist);
json to_json(const LsFitResult& fit, int cutoff);
json to_json(const EmResult& result, int cutoff);
json to_json(const BootstrapReport& report);

/// Grid values as a resolution x resolution CSV matrix (rows are x).
void write_wigner_csv(const fs::path& path, const WignerGrid& grid,
                      const json& metadata = json::object());
/// 8-bit binary PGM; gray level maps [min, max] linearly onto [0, 255].
void write_wigner_pgm(const fs::path& path, const WignerGrid& grid,
                      const json& metadata = json::object());

}  // namespace wigtomo
