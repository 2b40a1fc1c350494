#include "wigtomo/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "wigtomo/error.hpp"

namespace wigtomo {

namespace {

static_assert(std::endian::native == std::endian::little,
              "segment I/O assumes a little-endian host");

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) throw InputError("input file not found: " + path.string());
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(const std::vector<char>& bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

void write_header_comments(std::ostream& out, const json& metadata) {
  for (const auto& [key, value] : metadata.items()) {
    out << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
        << '\n';
  }
}

const char* shape_name(const ModeShape& shape) {
  return std::holds_alternative<DoubleExponentialShape>(shape) ? "double_exponential" : "gaussian";
}

}  // namespace

void write_batch(const fs::path& path, const SegmentBatch& batch) {
  batch.validate();
  auto out = open_output(path, std::ios::out | std::ios::binary);
  out.write(kBatchMagic, 4);
  put<std::uint16_t>(out, kBatchVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(batch.kind));
  const std::array<char, 9> reserved{};
  out.write(reserved.data(), reserved.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.samples_per_segment()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.trigger_index()));
  std::vector<float> row;
  for (const auto& seg : batch.segments) {
    row.assign(seg.samples.begin(), seg.samples.end());
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw InputError("write failed: " + path.string());
}

SegmentBatch read_batch(const fs::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::vector<char> head(kBatchHeaderSize + 12);
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  if (in.gcount() != static_cast<std::streamsize>(head.size())) {
    throw InputError(path.string() + ": truncated header (" + std::to_string(in.gcount()) +
                     " of " + std::to_string(head.size()) + " bytes)");
  }
  if (std::memcmp(head.data(), kBatchMagic, 4) != 0) {
    std::string found;
    for (int i = 0; i < 4; ++i) {
      char hex[4];
      std::snprintf(hex, sizeof hex, "%02x", static_cast<unsigned char>(head[i]));
      found += hex;
    }
    throw InputError(path.string() + ": bad magic bytes 0x" + found +
                     ", expected \"HSEG\" (0x48534547); not a segment batch file");
  }
  const auto version = get<std::uint16_t>(head, 4);
  if (version != kBatchVersion) {
    throw InputError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto kind = get<std::uint8_t>(head, 6);
  if (kind > 1) throw InputError(path.string() + ": unknown batch kind " + std::to_string(kind));
  const auto count = get<std::uint32_t>(head, 16);
  const auto samples = get<std::uint32_t>(head, 20);
  const auto trigger = get<std::uint32_t>(head, 24);
  if (samples == 0 || trigger >= samples) {
    throw InputError(path.string() + ": inconsistent segment geometry");
  }
  const std::uintmax_t expected =
      head.size() + static_cast<std::uintmax_t>(count) * samples * sizeof(float);
  const std::uintmax_t actual = fs::file_size(path);
  if (actual != expected) {
    throw InputError(path.string() + ": size " + std::to_string(actual) + " bytes, header implies " +
                     std::to_string(expected));
  }

  SegmentBatch batch;
  batch.kind = static_cast<BatchKind>(kind);
  batch.segments.resize(count);
  std::vector<float> row(samples);
  for (auto& seg : batch.segments) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw InputError(path.string() + ": truncated sample data");
    seg.samples.assign(row.begin(), row.end());
    seg.trigger_index = static_cast<int>(trigger);
  }
  batch.validate();

  const fs::path meta = metadata_path(path);
  if (fs::exists(meta)) {
    const json j = read_json(meta);
    if (j.contains("fingerprint")) {
      batch.config_fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    }
  }
  return batch;
}

void write_batch_csv(const fs::path& path, const SegmentBatch& batch) {
  auto out = open_output(path);
  for (const auto& seg : batch.segments) {
    for (std::size_t i = 0; i < seg.samples.size(); ++i) {
      if (i) out << ',';
      out << format_double(static_cast<float>(seg.samples[i]));
    }
    out << '\n';
  }
}

fs::path metadata_path(const fs::path& batch_path) {
  fs::path p = batch_path;
  p += ".json";
  return p;
}

std::uint64_t content_checksum(const SegmentBatch& batch) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& seg : batch.segments) {
    for (double v : seg.samples) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf.data();
}

void write_batch_metadata(const fs::path& batch_path, const SimulationConfig& config,
                          const SegmentBatch& batch) {
  json j;
  j["format"] = "HSEG";
  j["version"] = kBatchVersion;
  j["kind"] = to_string(batch.kind);
  j["segments"] = batch.size();
  j["samples_per_segment"] = batch.samples_per_segment();
  j["trigger_index"] = batch.trigger_index();
  j["sample_interval"] = config.sample_interval;
  j["seed"] = config.rng_seed;
  j["fingerprint"] = fingerprint_hex(batch.config_fingerprint);
  j["config"] = to_json(config);
  write_json(metadata_path(batch_path), j);
}

json to_json(const SimulationConfig& config) {
  json j;
  j["true_p"] = std::vector<double>(config.true_p.probs().begin(), config.true_p.probs().end());
  j["segments"] = config.segments;
  j["vacuum_segments"] = config.vacuum_segments;
  j["samples_per_segment"] = config.samples_per_segment;
  j["sample_interval"] = config.sample_interval;
  j["mode_shape"] = shape_name(config.mode_shape);
  if (const auto* de = std::get_if<DoubleExponentialShape>(&config.mode_shape)) {
    j["decay_rate"] = de->decay_rate;
  } else {
    j["gaussian_width"] = std::get<GaussianShape>(config.mode_shape).width;
  }
  j["peak_offset"] = config.peak_offset;
  j["background_variance"] = config.background_variance;
  j["signal_gain"] = config.signal_gain;
  j["seed"] = config.rng_seed;
  return j;
}

SimulationConfig simulation_config_from_json(const json& j, SimulationConfig base) {
  try {
    if (j.contains("true_p")) {
      base.true_p = PhotonNumberDistribution(j.at("true_p").get<std::vector<double>>());
    }
    if (j.contains("segments")) base.segments = j.at("segments").get<int>();
    if (j.contains("vacuum_segments")) base.vacuum_segments = j.at("vacuum_segments").get<int>();
    if (j.contains("samples_per_segment")) {
      base.samples_per_segment = j.at("samples_per_segment").get<int>();
    }
    if (j.contains("sample_interval")) base.sample_interval = j.at("sample_interval").get<double>();
    if (j.contains("mode_shape")) {
      const auto name = j.at("mode_shape").get<std::string>();
      if (name == "double_exponential") {
        base.mode_shape = DoubleExponentialShape{j.value("decay_rate", default_decay_rate())};
      } else if (name == "gaussian") {
        base.mode_shape = GaussianShape{j.value("gaussian_width", 5e-9)};
      } else {
        throw InputError("unknown mode_shape \"" + name + "\"");
      }
    } else if (j.contains("decay_rate")) {
      base.mode_shape = DoubleExponentialShape{j.at("decay_rate").get<double>()};
    } else if (j.contains("gaussian_width")) {
      base.mode_shape = GaussianShape{j.at("gaussian_width").get<double>()};
    }
    if (j.contains("peak_offset")) base.peak_offset = j.at("peak_offset").get<double>();
    if (j.contains("background_variance")) {
      base.background_variance = j.at("background_variance").get<double>();
    }
    if (j.contains("signal_gain")) base.signal_gain = j.at("signal_gain").get<double>();
    if (j.contains("seed")) base.rng_seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad simulation config: ") + e.what());
  }
  return base;
}

json read_json(const fs::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

void write_quadratures_csv(const fs::path& path, const QuadratureDataset& data,
                           const json& metadata) {
  auto out = open_output(path);
  json header = metadata;
  header["source"] = to_string(data.source_kind);
  header["calibration_scale"] = data.calibration_scale;
  header["count"] = data.values.size();
  write_header_comments(out, header);
  for (double v : data.values) out << format_double(v) << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

QuadratureFile read_quadratures_csv(const fs::path& path) {
  auto in = open_input(path);
  QuadratureFile file;
  file.data.source_kind = BatchKind::heralded;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(1, colon - 1));
      const std::string value = trim(line.substr(colon + 1));
      json parsed = json::parse(value, nullptr, false);
      file.metadata[key] = parsed.is_discarded() ? json(value) : parsed;
      continue;
    }
    double v = 0.0;
    const char* first = line.data();
    const char* last = line.data() + line.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || !std::isfinite(v)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) +
                       ": not a finite number: \"" + line + "\"");
    }
    file.data.values.push_back(v);
  }
  if (file.data.values.empty()) throw InputError(path.string() + ": no quadrature values");
  if (file.metadata.contains("calibration_scale") &&
      file.metadata["calibration_scale"].is_number()) {
    file.data.calibration_scale = file.metadata["calibration_scale"].get<double>();
  }
  if (file.metadata.contains("source") && file.metadata["source"] == "vacuum") {
    file.data.source_kind = BatchKind::vacuum;
  }
  return file;
}

void write_mode_csv(const fs::path& path, const ModeFunction& mode, int trigger_index,
                    double sample_interval, const json& metadata) {
  auto out = open_output(path);
  json header = metadata;
  header["peak_index"] = mode.peak_index;
  header["trigger_index"] = trigger_index;
  header["sample_interval"] = sample_interval;
  write_header_comments(out, header);
  out << "time_offset_s,weight\n";
  for (std::size_t i = 0; i < mode.size(); ++i) {
    out << format_double((static_cast<int>(i) - trigger_index) * sample_interval) << ','
        << format_double(mode.weights[i]) << '\n';
  }
}

void write_variance_trace_csv(const fs::path& path, const VarianceTrace& trace, int trigger_index,
                              double sample_interval, const json& metadata) {
  auto out = open_output(path);
  json header = metadata;
  header["baseline"] = trace.baseline;
  header["segments"] = trace.count;
  write_header_comments(out, header);
  out << "time_offset_s,variance\n";
  for (std::size_t i = 0; i < trace.variance.size(); ++i) {
    out << format_double((static_cast<int>(i) - trigger_index) * sample_interval) << ','
        << format_double(trace.variance[i]) << '\n';
  }
}

json to_json(const HistogramModel& hist) {
  return json{{"edges", hist.bin_edges},
              {"densities", hist.densities},
              {"counts", hist.counts},
              {"underflow", hist.underflow},
              {"overflow", hist.overflow}};
}

json to_json(const LsFitResult& fit, int cutoff) {
  return json{{"method", "least_squares"},
              {"cutoff", cutoff},
              {"p", std::vector<double>(fit.p.probs().begin(), fit.p.probs().end())},
              {"iterations", fit.iterations},
              {"converged", true},
              {"residual", fit.residual},
              {"projected_gradient_norm", fit.projected_gradient_norm}};
}

json to_json(const EmResult& result, int cutoff) {
  json j{{"method", "expectation_maximization"},
         {"cutoff", cutoff},
         {"p", std::vector<double>(result.p_hat.probs().begin(), result.p_hat.probs().end())},
         {"log_likelihood", result.final_log_likelihood},
         {"iterations", result.iterations},
         {"converged", result.converged},
         {"pinned_components", result.pinned_components},
         {"fisher_near_singular", result.fisher_near_singular}};
  j["fisher_condition"] =
      std::isfinite(result.fisher_condition) ? json(result.fisher_condition) : json(nullptr);
  return j;
}

json to_json(const BootstrapReport& report) {
  return json{{"replicas", report.replicas},
              {"cutoff", report.cutoff},
              {"seed", report.rng_seed},
              {"point_p", report.point_p},
              {"point_estimate", report.point_estimate},
              {"origin_mean", report.origin_mean},
              {"origin_std", report.origin_std},
              {"significance", report.significance},
              {"per_replica_origin", report.per_replica_origin},
              {"per_replica_p", report.per_replica_p}};
}

void write_wigner_csv(const fs::path& path, const WignerGrid& grid, const json& metadata) {
  auto out = open_output(path);
  json header = metadata;
  header["extent"] = grid.extent;
  header["resolution"] = grid.resolution;
  write_header_comments(out, header);
  for (int i = 0; i < grid.resolution; ++i) {
    for (int j = 0; j < grid.resolution; ++j) {
      if (j) out << ',';
      out << format_double(grid.at(i, j));
    }
    out << '\n';
  }
}

void write_wigner_pgm(const fs::path& path, const WignerGrid& grid, const json& metadata) {
  auto out = open_output(path, std::ios::out | std::ios::binary);
  const double lo = grid.min();
  const double hi = grid.max();
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n";
  out << "# wigner grid, gray = 255 * (W - min) / (max - min)\n";
  out << "# min: " << format_double(lo) << "\n# max: " << format_double(hi) << '\n';
  out << "# extent: " << format_double(grid.extent) << '\n';
  for (const auto& [key, value] : metadata.items()) {
    out << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
        << '\n';
  }
  out << grid.resolution << ' ' << grid.resolution << "\n255\n";
  // Image rows run from +y (top) to -y; columns from -x to +x.
  for (int j = grid.resolution - 1; j >= 0; --j) {
    for (int i = 0; i < grid.resolution; ++i) {
      const double level = std::round(255.0 * (grid.at(i, j) - lo) / span);
      out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0.0, 255.0))));
    }
  }
}

}  // namespace wigtomo
