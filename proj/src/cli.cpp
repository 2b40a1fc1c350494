#include "wigtomo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "wigtomo/error.hpp"
#include "wigtomo/fock.hpp"
#include "wigtomo/io.hpp"
#include "wigtomo/wigner.hpp"

namespace wigtomo::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVacuumBatch = "vacuum.hseg";
constexpr const char* kHeraldedBatch = "heralded.hseg";
constexpr const char* kModeCsv = "mode.csv";
constexpr const char* kTraceCsv = "variance_trace.csv";
constexpr const char* kVacuumCsv = "vacuum_quadratures.csv";
constexpr const char* kHeraldedCsv = "heralded_quadratures.csv";
constexpr const char* kExtractJson = "extract.json";
constexpr const char* kReconstructionJson = "reconstruction.json";
constexpr const char* kAnalysisJson = "bootstrap.json";
constexpr const char* kGridCsv = "wigner_grid.csv";
constexpr const char* kGridPgm = "wigner_grid.pgm";
constexpr const char* kReportJson = "reproduce_report.json";

constexpr int kReliableReplicas = 30;
constexpr int kReferenceSegments = 50000;
constexpr int kQuickSegments = 5000;
constexpr int kQuickReplicas = 50;
constexpr double kReferenceOrigin = -0.0643;
constexpr double kPublishedOrigin = -0.063;
constexpr double kPublishedUncertainty = 0.004;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<double> to_vector(const PhotonNumberDistribution& p) {
  return {p.probs().begin(), p.probs().end()};
}

std::string verdict(double origin, double std_dev, double significance) {
  return "W(0,0) = " + fixed(origin, 4) + " ± " + fixed(std_dev, 4) + " (" +
         fixed(significance, 1) + " sigma)";
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw InputError("input file not found: " + path.string());
}

json read_sidecar(const fs::path& batch_path) {
  const fs::path meta = metadata_path(batch_path);
  return fs::exists(meta) ? read_json(meta) : json::object();
}

template <class T>
T get_key(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key \"") + key + "\": " + e.what());
  }
}

// ---- stages ---------------------------------------------------------------

EmOptions em_options(const RunConfig& c) {
  EmOptions opts;
  opts.tol = c.tol;
  opts.max_iter = c.max_iter;
  return opts;
}

struct ExtractOutcome {
  VarianceTrace trace;
  ModeFunction mode;
  CalibratedPair pair;
  double significance = 0.0;
};

ExtractOutcome extract_stage(const SegmentBatch& vacuum, const SegmentBatch& heralded,
                             const RunConfig& c) {
  if (vacuum.samples_per_segment() != heralded.samples_per_segment()) {
    throw InputError("vacuum and heralded batches differ in segment length (" +
                     std::to_string(vacuum.samples_per_segment()) + " vs " +
                     std::to_string(heralded.samples_per_segment()) + ")");
  }
  ExtractOutcome o;
  o.trace = compute_variance_trace(heralded, c.baseline_fraction);
  o.mode = extract_mode_function(o.trace);
  o.pair = calibrate(project_quadratures(vacuum, o.mode), project_quadratures(heralded, o.mode));
  o.significance = excess_variance_significance(o.pair.vacuum, o.pair.heralded);
  if (!(o.significance >= c.min_significance)) {
    throw NoSignalError("heralded variance excess is " + fixed(o.significance, 2) +
                        " standard errors, below the threshold " +
                        fixed(c.min_significance, 2));
  }
  return o;
}

void write_extract_outputs(const fs::path& dir, const ExtractOutcome& o, int trigger_index,
                           double sample_interval, const json& meta) {
  write_mode_csv(dir / kModeCsv, o.mode, trigger_index, sample_interval, meta);
  write_variance_trace_csv(dir / kTraceCsv, o.trace, trigger_index, sample_interval, meta);
  write_quadratures_csv(dir / kVacuumCsv, o.pair.vacuum, meta);
  write_quadratures_csv(dir / kHeraldedCsv, o.pair.heralded, meta);

  json summary = meta;
  summary["trace_baseline"] = o.trace.baseline;
  summary["mode_peak_index"] = o.mode.peak_index;
  summary["mode_peak_offset_s"] = (o.mode.peak_index - trigger_index) * sample_interval;
  summary["calibration_scale"] = o.pair.vacuum.calibration_scale;
  summary["vacuum_count"] = o.pair.vacuum.values.size();
  summary["heralded_count"] = o.pair.heralded.values.size();
  summary["vacuum_variance"] = sample_variance(o.pair.vacuum.values);
  summary["heralded_variance"] = sample_variance(o.pair.heralded.values);
  summary["excess_variance_significance"] = o.significance;
  write_json(dir / kExtractJson, summary);
}

struct Reconstruction {
  HistogramModel histogram;
  LsFitResult ls;
  EmResult em;
};

Reconstruction reconstruct_stage(std::span<const double> values, const RunConfig& c) {
  Reconstruction r;
  r.histogram = build_histogram(values, c.bins, c.range_low, c.range_high);
  r.ls = fit_mixture_ls(r.histogram, c.cutoff);
  r.em = em_reconstruct(values, c.cutoff, em_options(c));
  return r;
}

json reconstruction_json(const Reconstruction& r, const RunConfig& c, const json& meta) {
  json j = meta;
  j["cutoff"] = c.cutoff;
  j["least_squares"] = to_json(r.ls, c.cutoff);
  j["least_squares"]["wigner_origin"] = wigner_origin(r.ls.p);
  j["em"] = to_json(r.em, c.cutoff);
  j["em"]["wigner_origin"] = wigner_origin(r.em.p_hat);
  j["histogram"] = to_json(r.histogram);
  return j;
}

void report_reconstruction(const Reconstruction& r, std::ostream& out, std::ostream& err) {
  auto list = [](const PhotonNumberDistribution& p) {
    std::string s;
    for (double v : p.probs()) s += (s.empty() ? "" : " ") + fixed(v, 4);
    return s;
  };
  out << "least squares: p = " << list(r.ls.p) << " (" << r.ls.iterations << " iterations)\n";
  out << "EM:            p = " << list(r.em.p_hat) << " (" << r.em.iterations << " iterations)\n";
  if (!r.em.converged) {
    err << "warning: EM stopped at the iteration limit without meeting the tolerance\n";
  }
  if (r.em.fisher_near_singular) {
    err << "warning: Fisher information is near singular; some p_n are poorly determined\n";
  }
}

struct Analysis {
  std::optional<BootstrapReport> bootstrap;
  PhotonNumberDistribution p = PhotonNumberDistribution::uniform(0);
  NegativityReport negativity;
  WignerGrid grid;
  std::string verdict;
};

void finish_analysis(Analysis& a, const RunConfig& c) {
  a.negativity = negativity_report(a.p);
  a.grid = wigner_grid(a.p, c.extent, c.resolution, c.threads);
  if (a.bootstrap) {
    a.verdict = verdict(a.bootstrap->point_estimate, a.bootstrap->origin_std,
                        a.bootstrap->significance);
  } else {
    a.verdict = "W(0,0) = " + fixed(a.negativity.origin, 4) + " (no bootstrap)";
  }
}

Analysis analyze_data(std::span<const double> values, const RunConfig& c, std::uint64_t seed) {
  Analysis a;
  a.bootstrap =
      bootstrap_negativity(values, c.cutoff, c.replicas, seed, em_options(c), c.threads);
  a.p = PhotonNumberDistribution(a.bootstrap->point_p);
  finish_analysis(a, c);
  return a;
}

json write_analysis_outputs(const fs::path& dir, const Analysis& a, const json& meta) {
  json grid_meta = meta;
  write_wigner_csv(dir / kGridCsv, a.grid, grid_meta);
  write_wigner_pgm(dir / kGridPgm, a.grid, grid_meta);

  json j = meta;
  j["p"] = to_vector(a.p);
  j["negativity"] = {{"origin", a.negativity.origin},
                     {"grid_min", a.negativity.grid_min},
                     {"min_radius", a.negativity.min_radius}};
  j["grid"] = {{"extent", a.grid.extent},
               {"resolution", a.grid.resolution},
               {"min", a.grid.min()},
               {"max", a.grid.max()},
               {"integral", a.grid.integral()}};
  j["bootstrap"] = a.bootstrap ? to_json(*a.bootstrap) : json(nullptr);
  j["verdict"] = a.verdict;
  write_json(dir / kAnalysisJson, j);
  return j;
}

void warn_replicas(const RunConfig& c, std::ostream& err) {
  if (c.replicas < kReliableReplicas) {
    err << "warning: only " << c.replicas
        << " bootstrap replicas; the standard deviation estimate is unreliable (use at least "
        << kReliableReplicas << ")\n";
  }
}

// ---- commands ---------------------------------------------------------------

struct Paths {
  std::string vacuum;
  std::string heralded;
  std::string input;
  std::string reconstruction;
};

fs::path or_default(const std::string& given, const fs::path& dir, const char* name) {
  return given.empty() ? dir / name : fs::path(given);
}

json base_meta(const RunConfig& c, std::uint64_t seed) {
  return json{{"seed", seed}, {"config", to_json(c)}};
}

int cmd_simulate(const RunConfig& c, bool csv, std::ostream& out) {
  c.simulation.validate();
  fs::create_directories(c.output_dir);
  for (BatchKind kind : {BatchKind::vacuum, BatchKind::heralded}) {
    const SegmentBatch batch = generate_batch(c.simulation, kind, c.threads);
    const fs::path path =
        c.output_dir / (kind == BatchKind::vacuum ? kVacuumBatch : kHeraldedBatch);
    write_batch(path, batch);
    write_batch_metadata(path, c.simulation, batch);
    if (csv) write_batch_csv(fs::path(path).replace_extension(".csv"), batch);
    out << to_string(kind) << ": " << batch.size() << " segments x "
        << batch.samples_per_segment() << " samples -> " << path.string() << " (config "
        << fingerprint_hex(batch.config_fingerprint) << ", content "
        << fingerprint_hex(content_checksum(batch)) << ")\n";
  }
  out << "seed " << c.seed() << "\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& c, const Paths& paths, std::ostream& out) {
  const fs::path vac_path = or_default(paths.vacuum, c.output_dir, kVacuumBatch);
  const fs::path her_path = or_default(paths.heralded, c.output_dir, kHeraldedBatch);
  require_file(vac_path);
  require_file(her_path);
  const json sidecar = read_sidecar(her_path);
  const std::uint64_t seed = sidecar.value("seed", c.seed());
  const double interval = sidecar.value("sample_interval", c.simulation.sample_interval);

  const SegmentBatch vacuum = read_batch(vac_path);
  const SegmentBatch heralded = read_batch(her_path);
  const ExtractOutcome o = extract_stage(vacuum, heralded, c);

  fs::create_directories(c.output_dir);
  json meta = base_meta(c, seed);
  write_extract_outputs(c.output_dir, o, heralded.trigger_index(), interval, meta);
  out << "mode peak at sample " << o.mode.peak_index << " (trigger " << heralded.trigger_index()
      << "), calibration scale " << o.pair.vacuum.calibration_scale << "\n";
  out << "heralded variance " << fixed(sample_variance(o.pair.heralded.values), 4)
      << " vs vacuum 0.5000, excess " << fixed(o.significance, 1) << " standard errors\n";
  out << "wrote " << (c.output_dir / kHeraldedCsv).string() << "\n";
  return kExitOk;
}

int cmd_reconstruct(const RunConfig& c, const Paths& paths, std::ostream& out,
                    std::ostream& err) {
  const fs::path input = or_default(paths.input, c.output_dir, kHeraldedCsv);
  require_file(input);
  const QuadratureFile file = read_quadratures_csv(input);
  const std::uint64_t seed = file.metadata.value("seed", c.seed());

  const Reconstruction r = reconstruct_stage(file.data.values, c);
  json meta = base_meta(c, seed);
  meta["input"] = input.filename().string();
  meta["count"] = file.data.values.size();
  fs::create_directories(c.output_dir);
  write_json(c.output_dir / kReconstructionJson, reconstruction_json(r, c, meta));
  report_reconstruction(r, out, err);
  out << "wrote " << (c.output_dir / kReconstructionJson).string() << "\n";
  return kExitOk;
}

int cmd_analyze(const RunConfig& c, bool seed_given, const Paths& paths, std::ostream& out,
                std::ostream& err) {
  Analysis a;
  json meta;
  if (paths.input.empty() && !paths.reconstruction.empty()) {
    const fs::path path(paths.reconstruction);
    require_file(path);
    const json rec = read_json(path);
    try {
      a.p = PhotonNumberDistribution(rec.at("em").at("p").get<std::vector<double>>());
    } catch (const json::exception& e) {
      throw InputError(path.string() + ": no EM estimate (" + e.what() + ")");
    } catch (const std::invalid_argument& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    finish_analysis(a, c);
    meta = base_meta(c, rec.value("seed", c.seed()));
    meta["input"] = path.filename().string();
  } else {
    const fs::path input = or_default(paths.input, c.output_dir, kHeraldedCsv);
    require_file(input);
    warn_replicas(c, err);
    const QuadratureFile file = read_quadratures_csv(input);
    const std::uint64_t data_seed = file.metadata.value("seed", c.seed());
    const std::uint64_t seed = seed_given ? c.seed() : data_seed;
    a = analyze_data(file.data.values, c, seed);
    meta = base_meta(c, seed);
    meta["data_seed"] = data_seed;
    meta["input"] = input.filename().string();
  }
  fs::create_directories(c.output_dir);
  write_analysis_outputs(c.output_dir, a, meta);
  out << "wrote " << (c.output_dir / kGridCsv).string() << ", "
      << (c.output_dir / kGridPgm).string() << ", " << (c.output_dir / kAnalysisJson).string()
      << "\n";
  out << a.verdict << "\n";
  return kExitOk;
}

json criterion(const char* name, double value, bool pass, json extra) {
  extra["name"] = name;
  extra["value"] = value;
  extra["pass"] = pass;
  return extra;
}

int cmd_reproduce(const RunConfig& c, bool keep_batches, std::ostream& out, std::ostream& err) {
  c.simulation.validate();
  warn_replicas(c, err);
  fs::create_directories(c.output_dir);
  const json meta = base_meta(c, c.seed());

  ExtractOutcome extracted;
  {
    const SegmentBatch vacuum = generate_batch(c.simulation, BatchKind::vacuum, c.threads);
    const SegmentBatch heralded = generate_batch(c.simulation, BatchKind::heralded, c.threads);
    if (keep_batches) {
      for (const SegmentBatch* b : {&vacuum, &heralded}) {
        const fs::path path =
            c.output_dir / (b->kind == BatchKind::vacuum ? kVacuumBatch : kHeraldedBatch);
        write_batch(path, *b);
        write_batch_metadata(path, c.simulation, *b);
      }
    }
    extracted = extract_stage(vacuum, heralded, c);
    write_extract_outputs(c.output_dir, extracted, heralded.trigger_index(),
                          c.simulation.sample_interval, meta);
  }
  out << "simulated " << c.simulation.segments << " heralded + " << c.simulation.vacuum_segments
      << " vacuum segments, excess variance " << fixed(extracted.significance, 1)
      << " standard errors\n";

  const auto& values = extracted.pair.heralded.values;
  const Reconstruction rec = reconstruct_stage(values, c);
  write_json(c.output_dir / kReconstructionJson, reconstruction_json(rec, c, meta));
  report_reconstruction(rec, out, err);

  const Analysis analysis = analyze_data(values, c, c.seed());
  write_analysis_outputs(c.output_dir, analysis, meta);
  const BootstrapReport& boot = *analysis.bootstrap;

  // Tolerances are stated for the reference batch size and widen as K^-1/2
  // for smaller runs.
  const double widen =
      std::max(1.0, std::sqrt(static_cast<double>(kReferenceSegments) / c.simulation.segments));
  const auto truth = to_vector(c.simulation.true_p);
  const auto recovered = to_vector(rec.em.p_hat);
  const std::size_t n = std::max(truth.size(), recovered.size());
  std::vector<double> errors(n);
  double max_error = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = i < truth.size() ? truth[i] : 0.0;
    const double r = i < recovered.size() ? recovered[i] : 0.0;
    errors[i] = r - t;
    max_error = std::max(max_error, std::abs(errors[i]));
  }
  const double identity = wigner_origin(reference_photon_numbers());
  const double target = wigner_origin(c.simulation.true_p);
  const double p_tol = 0.015 * widen;
  const double w_tol = 0.01 * widen;
  const double std_low = 0.002 * widen;
  const double std_high = 0.008 * widen;
  const double sig_min = 10.0 / widen;

  json criteria = json::array();
  criteria.push_back(criterion("wigner_origin_identity", identity,
                               std::abs(identity - kReferenceOrigin) <= 0.0005,
                               {{"target", kReferenceOrigin}, {"tolerance", 0.0005}}));
  criteria.push_back(criterion("photon_numbers", max_error, max_error <= p_tol,
                               {{"errors", errors}, {"tolerance", p_tol}}));
  criteria.push_back(criterion("wigner_origin", boot.point_estimate,
                               std::abs(boot.point_estimate - target) <= w_tol,
                               {{"target", target}, {"tolerance", w_tol}}));
  criteria.push_back(criterion("bootstrap_std", boot.origin_std,
                               boot.origin_std >= std_low && boot.origin_std <= std_high,
                               {{"low", std_low}, {"high", std_high}}));
  criteria.push_back(criterion("significance", boot.significance, boot.significance > sig_min,
                               {{"threshold", sig_min}}));
  bool all_pass = true;
  for (const auto& cr : criteria) all_pass = all_pass && cr["pass"].get<bool>();

  json report = meta;
  report["quick"] = c.simulation.segments < kReferenceSegments;
  report["tolerance_scale"] = widen;
  report["true_p"] = truth;
  report["em_p"] = recovered;
  report["least_squares_p"] = to_vector(rec.ls.p);
  report["wigner_origin"] = boot.point_estimate;
  report["wigner_origin_truth"] = target;
  report["bootstrap"] = {{"replicas", boot.replicas},
                         {"origin_mean", boot.origin_mean},
                         {"origin_std", boot.origin_std},
                         {"significance", boot.significance}};
  report["reference"] = {{"p", to_vector(reference_photon_numbers())},
                         {"wigner_origin", kPublishedOrigin},
                         {"uncertainty", kPublishedUncertainty}};
  report["criteria"] = criteria;
  report["all_pass"] = all_pass;
  report["verdict"] = analysis.verdict;
  write_json(c.output_dir / kReportJson, report);

  for (const auto& cr : criteria) {
    out << (cr["pass"].get<bool>() ? "PASS " : "FAIL ") << cr["name"].get<std::string>() << " "
        << cr["value"].dump() << "\n";
  }
  out << analysis.verdict << "\n";
  out << "wrote " << (c.output_dir / kReportJson).string() << "\n";
  return all_pass ? kExitOk : kExitCriteriaFailed;
}

// ---- option plumbing ------------------------------------------------------------

// Options write into private storage; the values are applied on top of the
// config file only when the flag was actually given.
class Overrides {
 public:
  template <class T, class Set>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc, Set set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    setters_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }

  void apply(RunConfig& c) const {
    for (const auto& s : setters_) s(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> setters_;
};

void simulation_flags(CLI::App* app, Overrides& ov) {
  ov.add<int>(app, "--segments", "heralded segments K",
              [](RunConfig& c, int v) { c.simulation.segments = v; });
  ov.add<int>(app, "--vacuum-segments", "vacuum calibration segments",
              [](RunConfig& c, int v) { c.simulation.vacuum_segments = v; });
  ov.add<int>(app, "--samples", "samples per segment",
              [](RunConfig& c, int v) { c.simulation.samples_per_segment = v; });
  ov.add<double>(app, "--sample-interval", "sample spacing in seconds",
                 [](RunConfig& c, double v) { c.simulation.sample_interval = v; });
  ov.add<double>(app, "--background-variance", "raw per-sample noise variance",
                 [](RunConfig& c, double v) { c.simulation.background_variance = v; });
  ov.add<double>(app, "--signal-gain", "raw units per quadrature unit",
                 [](RunConfig& c, double v) { c.simulation.signal_gain = v; });
  ov.add<std::vector<double>>(app, "--true-p", "photon-number distribution to simulate",
                              [](RunConfig& c, const std::vector<double>& v) {
                                c.simulation.true_p = PhotonNumberDistribution(v);
                              })
      ->delimiter(',');
}

void extract_flags(CLI::App* app, Overrides& ov) {
  ov.add<double>(app, "--baseline-fraction", "edge window fraction for the noise floor",
                 [](RunConfig& c, double v) { c.baseline_fraction = v; });
  ov.add<double>(app, "--min-significance", "excess-variance z-score needed to accept a signal",
                 [](RunConfig& c, double v) { c.min_significance = v; });
}

void reconstruction_flags(CLI::App* app, Overrides& ov) {
  ov.add<int>(app, "--cutoff", "highest photon number N",
              [](RunConfig& c, int v) { c.cutoff = v; });
  ov.add<double>(app, "--tol", "EM relative log-likelihood tolerance",
                 [](RunConfig& c, double v) { c.tol = v; });
  ov.add<int>(app, "--max-iter", "EM iteration limit",
              [](RunConfig& c, int v) { c.max_iter = v; });
}

void histogram_flags(CLI::App* app, Overrides& ov) {
  ov.add<int>(app, "--bins", "histogram bins", [](RunConfig& c, int v) { c.bins = v; });
  ov.add<double>(app, "--range-low", "histogram lower edge",
                 [](RunConfig& c, double v) { c.range_low = v; });
  ov.add<double>(app, "--range-high", "histogram upper edge",
                 [](RunConfig& c, double v) { c.range_high = v; });
}

void analysis_flags(CLI::App* app, Overrides& ov) {
  ov.add<int>(app, "--replicas", "bootstrap replicas R",
              [](RunConfig& c, int v) { c.replicas = v; });
  ov.add<double>(app, "--extent", "Wigner grid half-width",
                 [](RunConfig& c, double v) { c.extent = v; });
  ov.add<int>(app, "--resolution", "Wigner grid points per axis (odd)",
              [](RunConfig& c, int v) { c.resolution = v; });
}

}  // namespace

json to_json(const RunConfig& c) {
  return json{{"simulation", wigtomo::to_json(c.simulation)},
              {"baseline_fraction", c.baseline_fraction},
              {"min_significance", c.min_significance},
              {"bins", c.bins},
              {"range_low", c.range_low},
              {"range_high", c.range_high},
              {"cutoff", c.cutoff},
              {"tol", c.tol},
              {"max_iter", c.max_iter},
              {"extent", c.extent},
              {"resolution", c.resolution},
              {"replicas", c.replicas}};
}

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw InputError("config file must hold a JSON object");
  static const std::vector<std::string> known = {
      "simulation", "baseline_fraction", "min_significance", "bins", "range_low", "range_high",
      "cutoff", "tol", "max_iter", "extent", "resolution", "replicas", "threads", "output_dir",
      "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("unknown config key \"" + key + "\"");
    }
  }
  try {
    if (j.contains("simulation")) {
      c.simulation = simulation_config_from_json(j.at("simulation"), c.simulation);
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config \"simulation\": ") + e.what());
  }
  if (j.contains("seed")) c.simulation.rng_seed = get_key<std::uint64_t>(j, "seed");
  if (j.contains("baseline_fraction")) c.baseline_fraction = get_key<double>(j, "baseline_fraction");
  if (j.contains("min_significance")) c.min_significance = get_key<double>(j, "min_significance");
  if (j.contains("bins")) c.bins = get_key<int>(j, "bins");
  if (j.contains("range_low")) c.range_low = get_key<double>(j, "range_low");
  if (j.contains("range_high")) c.range_high = get_key<double>(j, "range_high");
  if (j.contains("cutoff")) c.cutoff = get_key<int>(j, "cutoff");
  if (j.contains("tol")) c.tol = get_key<double>(j, "tol");
  if (j.contains("max_iter")) c.max_iter = get_key<int>(j, "max_iter");
  if (j.contains("extent")) c.extent = get_key<double>(j, "extent");
  if (j.contains("resolution")) c.resolution = get_key<int>(j, "resolution");
  if (j.contains("replicas")) c.replicas = get_key<int>(j, "replicas");
  if (j.contains("threads")) c.threads = get_key<unsigned>(j, "threads");
  if (j.contains("output_dir")) c.output_dir = get_key<std::string>(j, "output_dir");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heralded-state homodyne tomography: simulate, extract, reconstruct, analyze"};
  app.name("wigtomo");
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  Overrides common;
  app.add_option("--config", config_path, "JSON config file (flags take precedence)");
  app.add_option("--out", out_dir, std::string("output directory (default $") + kOutputDirEnv +
                                       " or the current directory)");
  CLI::Option* seed_opt = common.add<std::uint64_t>(
      &app, "--seed", "64-bit RNG seed", [](RunConfig& c, std::uint64_t v) {
        c.simulation.rng_seed = v;
      });
  common.add<unsigned>(&app, "--threads", "worker threads (0 = hardware concurrency)",
                       [](RunConfig& c, unsigned v) { c.threads = v; });

  Overrides ov;
  Paths paths;
  bool csv = false;
  bool quick = false;
  bool keep_batches = false;

  auto* simulate = app.add_subcommand("simulate", "write vacuum and heralded segment batches");
  simulation_flags(simulate, ov);
  simulate->add_flag("--csv", csv, "also write each batch as CSV");

  auto* extract = app.add_subcommand("extract", "mode function and calibrated quadratures");
  extract->add_option("--vacuum", paths.vacuum, "vacuum batch (default <out>/vacuum.hseg)");
  extract->add_option("--heralded", paths.heralded,
                      "heralded batch (default <out>/heralded.hseg)");
  extract_flags(extract, ov);

  auto* reconstruct = app.add_subcommand("reconstruct", "least-squares and EM photon statistics");
  reconstruct->add_option("--input", paths.input,
                          "quadrature CSV (default <out>/heralded_quadratures.csv)");
  reconstruction_flags(reconstruct, ov);
  histogram_flags(reconstruct, ov);

  auto* analyze = app.add_subcommand("analyze", "Wigner grid and bootstrap negativity");
  analyze->add_option("--input", paths.input,
                      "quadrature CSV (default <out>/heralded_quadratures.csv)");
  analyze->add_option("--reconstruction", paths.reconstruction,
                      "reconstruction JSON; grid only, no bootstrap");
  reconstruction_flags(analyze, ov);
  analysis_flags(analyze, ov);

  auto* reproduce = app.add_subcommand("reproduce", "simulate and analyze end to end");
  reproduce->add_flag("--quick", quick, "5000 segments and 50 replicas, widened tolerances");
  reproduce->add_flag("--keep-batches", keep_batches, "also write the segment batches");
  simulation_flags(reproduce, ov);
  extract_flags(reproduce, ov);
  reconstruction_flags(reproduce, ov);
  histogram_flags(reproduce, ov);
  analysis_flags(reproduce, ov);

  for (auto* sub : {simulate, extract, reconstruct, analyze, reproduce}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    RunConfig config;
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
      config.output_dir = env;
    }
    if (reproduce->parsed() && quick) {
      config.simulation.segments = kQuickSegments;
      config.replicas = kQuickReplicas;
    }
    json file_config = json::object();
    if (!config_path.empty()) {
      require_file(config_path);
      file_config = read_json(config_path);
      apply_json(config, file_config);
    }
    common.apply(config);
    ov.apply(config);
    if (!out_dir.empty()) config.output_dir = out_dir;
    const bool seed_given = seed_opt->count() > 0 || file_config.contains("seed");

    if (simulate->parsed()) return cmd_simulate(config, csv, out);
    if (extract->parsed()) return cmd_extract(config, paths, out);
    if (reconstruct->parsed()) return cmd_reconstruct(config, paths, out, err);
    if (analyze->parsed()) return cmd_analyze(config, seed_given, paths, out, err);
    return cmd_reproduce(config, keep_batches, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NoSignalError& e) {
    err << "no signal: " << e.what() << "\n";
    return kExitNoSignal;
  } catch (const ReconstructionError& e) {
    err << "reconstruction failed: " << e.what() << "\n";
    return kExitReconstruction;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace wigtomo::cli
