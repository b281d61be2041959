#include "ran/cli.hpp"

#include "ran/config.hpp"
#include "ran/io.hpp"
#include "ran/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

namespace ran::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// A numeric output (NaN/inf) that must never reach a report.
struct numeric_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Stopwatch {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  double stop_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

void check_finite_json(const json& j, const std::string& where) {
  if (j.is_number_float() && !std::isfinite(j.get<double>()))
    throw numeric_failure("non-finite value in " + where);
  if (j.is_array() || j.is_object())
    for (const auto& item : j) check_finite_json(item, where);
}

struct FileRecord {
  std::string path;
  std::string digest;
};

json files_json(const std::vector<FileRecord>& files) {
  json arr = json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"fnv1a64", f.digest}});
  return arr;
}

json make_manifest(const std::string& command, const json& config, uint64_t seed,
                   const std::vector<FileRecord>& inputs, const std::vector<FileRecord>& outputs,
                   const std::map<std::string, double>& timings_ms) {
  json m;
  m["tool"] = "ran";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["threads"] = max_threads();
  m["inputs"] = files_json(inputs);
  m["outputs"] = files_json(outputs);
  json t;
  for (const auto& [name, ms] : timings_ms) t[name] = ms;
  m["timings_ms"] = std::move(t);
  return m;
}

void write_json_atomic(const fs::path& path, const json& j) {
  io::atomic_write_text(path, j.dump(2) + "\n");
}

Vec3d parse_triple(const std::string& text, const char* what) {
  Vec3d out;
  std::stringstream ss(text);
  std::string item;
  int n = 0;
  while (std::getline(ss, item, ',')) {
    if (n >= 3) throw std::invalid_argument(std::string(what) + ": expected three values");
    out[n++] = std::stod(item);
  }
  if (n != 3) throw std::invalid_argument(std::string(what) + ": expected three values");
  return out;
}

Dims parse_dims(const std::string& text) {
  const Vec3d v = parse_triple(text, "--dims");
  const Dims d{Index(v[0]), Index(v[1]), Index(v[2])};
  require_positive(d, "--dims");
  return d;
}

std::vector<Index> parse_index_list(const std::string& text, const char* what) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Index(std::stoll(item)));
  if (out.empty()) throw std::invalid_argument(std::string(what) + ": expected a list");
  return out;
}

std::set<int32_t> labels_present(const LabelVolume& v) {
  std::set<int32_t> out;
  for (Index i = 0; i < v.data.size(); ++i)
    if (v.data[i] != 0) out.insert(v.data[i]);
  return out;
}

// per-label overlap/surface metrics of warped source labels against target
json label_metrics_json(const LabelVolume& warped, const LabelVolume& tgt, const Vec3d& spacing) {
  json per_label = json::object();
  double dsc_sum = 0.0;
  Index dsc_n = 0;
  auto labels = labels_present(tgt);
  for (const int32_t l : labels_present(warped)) labels.insert(l);
  for (const int32_t label : labels) {
    json entry;
    const double d = dice(warped, tgt, label);
    entry["dsc"] = d;
    dsc_sum += d;
    ++dsc_n;
    try {
      const auto sd = surface_distances(warped, tgt, label, spacing);
      entry["hd_mm"] = sd.hausdorff_mm;
      entry["asd_mm"] = sd.average_mm;
    } catch (const undefined_metric_error&) {
      // one side has no voxels for this label; surface distances are undefined
    }
    per_label[std::to_string(label)] = std::move(entry);
  }
  json out;
  out["per_label"] = std::move(per_label);
  if (dsc_n > 0) out["dsc"] = dsc_sum / double(dsc_n);
  return out;
}

struct RegisterOptions {
  std::string src, tgt, config, out;
  std::string report;
  std::string src_labels, tgt_labels;
  uint64_t seed = 0;
};

int cmd_register(const RegisterOptions& opt) {
  std::map<std::string, double> timings;
  Stopwatch watch;
  std::vector<FileRecord> inputs;

  watch.start();
  const PipelineConfig cfg = load_pipeline_config(opt.config);
  inputs.push_back({opt.config, io::fnv1a64_file(opt.config)});

  const Volume src = io::read_volume(opt.src);
  const Volume tgt = io::read_volume(opt.tgt);
  inputs.push_back({opt.src, io::fnv1a64_file(opt.src)});
  inputs.push_back({opt.tgt, io::fnv1a64_file(opt.tgt)});

  LabelVolume src_labels, tgt_labels;
  const bool with_labels = !opt.src_labels.empty() && !opt.tgt_labels.empty();
  if (with_labels) {
    src_labels = io::read_labels(opt.src_labels);
    tgt_labels = io::read_labels(opt.tgt_labels);
    inputs.push_back({opt.src_labels, io::fnv1a64_file(opt.src_labels)});
    inputs.push_back({opt.tgt_labels, io::fnv1a64_file(opt.tgt_labels)});
  }
  timings["load"] = watch.stop_ms();

  watch.start();
  const auto result = register_volumes(src, tgt, cfg.arch, cfg.params);
  timings["register"] = watch.stop_ms();

  if (!result.final_ddf.data.allFinite())
    throw numeric_failure("registration produced a non-finite field");
  if (result.coverage_warning)
    std::fprintf(stderr,
                 "warning: the coarsest level does not cover the whole image (Eq. of global "
                 "coverage unmet); large motions may be missed\n");

  watch.start();
  json report;
  report["objective_trace"] = result.objective_trace;
  report["final_objective"] = result.objective_trace.empty() ? 0.0 : result.objective_trace.back();
  report["coverage_warning"] = result.coverage_warning;
  report["objective_increased"] = result.objective_increased;
  double max_abs = 0.0, mean_abs = 0.0;
  for (Index i = 0; i < result.final_ddf.data.size(); ++i) {
    const double a = std::abs(double(result.final_ddf.data[i]));
    max_abs = std::max(max_abs, a);
    mean_abs += a;
  }
  mean_abs /= double(result.final_ddf.data.size());
  report["field_stats"] = {{"max_abs_voxels", max_abs}, {"mean_abs_voxels", mean_abs}};

  if (with_labels) {
    const LabelVolume warped = warp_labels_nearest(src_labels, result.final_ddf);
    json lm = label_metrics_json(warped, tgt_labels, tgt.spacing);
    lm["neg_jacobian_count"] = neg_jacobian_count(result.final_ddf, tgt_labels);
    report["labels"] = std::move(lm);
  }
  check_finite_json(report, "report");

  io::write_field(opt.out, result.final_ddf);
  const fs::path report_path =
      opt.report.empty() ? fs::path(opt.out).replace_extension(".report.json") : fs::path(opt.report);
  write_json_atomic(report_path, report);
  timings["write"] = watch.stop_ms();

  std::vector<FileRecord> outputs;
  outputs.push_back({opt.out, io::fnv1a64_file(opt.out)});
  const fs::path raw = io::raw_path_for(opt.out);
  outputs.push_back({raw.string(), io::fnv1a64_file(raw)});
  outputs.push_back({report_path.string(), io::fnv1a64_file(report_path)});

  const fs::path manifest_path = fs::path(opt.out).replace_extension(".manifest.json");
  write_json_atomic(manifest_path,
                    make_manifest("register", pipeline_config_json(cfg), opt.seed, inputs, outputs,
                                  timings));
  std::printf("registered %s -> %s: final objective %.6g, field written to %s\n", opt.src.c_str(),
              opt.tgt.c_str(), report["final_objective"].get<double>(), opt.out.c_str());
  return kExitOk;
}

struct AnalyzeOptions {
  std::string config;
  std::string json_out, csv_out;
  std::string dims;
};

int cmd_analyze(const AnalyzeOptions& opt) {
  const PipelineConfig cfg = load_pipeline_config(opt.config);
  const auto profile = separability_profile(cfg.arch);

  std::printf("%3s %6s %8s %8s %8s\n", "k", "p_k", "|r_k|_1", "s_k", "a_k");
  json jlevels = json::array();
  for (size_t k = 0; k < cfg.arch.levels.size(); ++k) {
    const auto& lvl = cfg.arch.levels[k];
    const Index s = receptive_field_size(lvl);
    const double a = capture_range(lvl);
    std::printf("%3zu %6lld %8lld %8lld %8.1f\n", k + 1, (long long)lvl.pool_size,
                (long long)dilation_l1(lvl), (long long)s, a);
    jlevels.push_back({{"k", k + 1},
                       {"pool", lvl.pool_size},
                       {"dilation_l1", dilation_l1(lvl)},
                       {"receptive_field", s},
                       {"capture_range", a}});
  }
  std::printf("separability breakpoints:");
  for (size_t i = 0; i < profile.breakpoints.size(); ++i)
    std::printf(" (p>=%g: %g)", profile.breakpoints[i], profile.values[i]);
  std::printf("\n");

  if (!opt.dims.empty()) {
    const Dims dims = parse_dims(opt.dims);
    std::printf("covers whole image at %lldx%lldx%lld: %s\n", (long long)dims.t, (long long)dims.h,
                (long long)dims.w, covers_whole_image(cfg.arch, dims) ? "yes" : "no");
  }

  if (!opt.json_out.empty()) {
    json j;
    j["levels"] = std::move(jlevels);
    j["profile"] = {{"breakpoints", profile.breakpoints}, {"values", profile.values}};
    check_finite_json(j, "analyze output");
    write_json_atomic(opt.json_out, j);
  }
  if (!opt.csv_out.empty()) {
    std::string csv = "p,delta_inf\n";
    for (size_t i = 0; i < profile.breakpoints.size(); ++i)
      csv += std::to_string(profile.breakpoints[i]) + "," + std::to_string(profile.values[i]) + "\n";
    io::atomic_write_text(opt.csv_out, csv);
  }
  return kExitOk;
}

struct SynthOptions {
  std::string dims = "32,32,32";
  std::string out_prefix;
  uint64_t seed = 0;
  double amplitude = 2.0;
  Index scale = 8;
  std::string rotate = "0,0,0";
  std::string translate = "0,0,0";
  Index blob_grid = 4;
  double label_threshold = 0.3;
};

int cmd_synth(const SynthOptions& opt) {
  std::map<std::string, double> timings;
  Stopwatch watch;
  watch.start();

  const Dims dims = parse_dims(opt.dims);
  SyntheticDeformation sd;
  sd.rotation = parse_triple(opt.rotate, "--rotate");
  sd.translation = parse_triple(opt.translate, "--translate");
  sd.deform_amplitude = opt.amplitude;
  sd.deform_scale = opt.scale;
  sd.seed = opt.seed;

  BlobSceneParams blobs;
  blobs.grid_spacing = opt.blob_grid;
  const Volume src = make_blob_volume(dims, opt.seed, blobs);
  const auto ddf = synth_ddf(dims, sd);
  const Volume tgt = warp(src, ddf);

  LabelVolume src_labels(dims);
  for (Index i = 0; i < dims.count(); ++i)
    src_labels.data[i] = src.data[i] > float(opt.label_threshold) ? 1 : 0;
  const LabelVolume tgt_labels = warp_labels_nearest(src_labels, ddf);
  timings["generate"] = watch.stop_ms();

  watch.start();
  const std::string p = opt.out_prefix;
  io::write_volume(p + "_src.json", src);
  io::write_volume(p + "_tgt.json", tgt);
  io::write_field(p + "_ddf.json", ddf);
  io::write_labels(p + "_src_labels.json", src_labels);
  io::write_labels(p + "_tgt_labels.json", tgt_labels);
  timings["write"] = watch.stop_ms();

  std::vector<FileRecord> outputs;
  for (const std::string name :
       {"_src.json", "_src.raw", "_tgt.json", "_tgt.raw", "_ddf.json", "_ddf.raw",
        "_src_labels.json", "_src_labels.raw", "_tgt_labels.json", "_tgt_labels.raw"})
    outputs.push_back({p + name, io::fnv1a64_file(p + name)});

  json config;
  config["dims"] = {dims.t, dims.h, dims.w};
  config["amplitude"] = opt.amplitude;
  config["scale"] = opt.scale;
  config["rotate"] = opt.rotate;
  config["translate"] = opt.translate;
  config["blob_grid"] = opt.blob_grid;
  config["label_threshold"] = opt.label_threshold;
  write_json_atomic(p + ".manifest.json",
                    make_manifest("synth", config, opt.seed, {}, outputs, timings));
  std::printf("synthesized %lldx%lldx%lld pair with prefix %s\n", (long long)dims.t,
              (long long)dims.h, (long long)dims.w, p.c_str());
  return kExitOk;
}

struct MetricsOptions {
  std::string ddf, src_labels, tgt_labels;
  std::string out;
  std::string spacing = "1,1,1";
  std::string pdf_csv;
  Index bins = 32;
  double pdf_sigma = 1.0;
  Index pair_budget = 2000000;
  uint64_t seed = 0;
};

std::string pdf_to_csv(const MotionPairPdf& pdf) {
  std::string csv;
  for (Index dist = 0; dist < pdf.density.cols(); ++dist)
    for (Index diff = 0; diff < pdf.density.rows(); ++diff) {
      char line[96];
      std::snprintf(line, sizeof line, "%lld,%lld,%.9g\n", (long long)dist, (long long)diff,
                    pdf.density(diff, dist));
      csv += line;
    }
  return csv;
}

int cmd_metrics(const MetricsOptions& opt) {
  std::map<std::string, double> timings;
  Stopwatch watch;
  watch.start();
  const auto ddf = io::read_field(opt.ddf);
  const auto src_labels = io::read_labels(opt.src_labels);
  const auto tgt_labels = io::read_labels(opt.tgt_labels);
  if (src_labels.dims != ddf.dims || tgt_labels.dims != ddf.dims)
    throw invalid_data_error("metrics: label and field dimensions differ");
  const Vec3d spacing = parse_triple(opt.spacing, "--spacing");
  std::vector<FileRecord> inputs{{opt.ddf, io::fnv1a64_file(opt.ddf)},
                                 {opt.src_labels, io::fnv1a64_file(opt.src_labels)},
                                 {opt.tgt_labels, io::fnv1a64_file(opt.tgt_labels)}};
  timings["load"] = watch.stop_ms();

  watch.start();
  const LabelVolume warped = warp_labels_nearest(src_labels, ddf);
  json report = label_metrics_json(warped, tgt_labels, spacing);
  report["detj_count"] = neg_jacobian_count(ddf, tgt_labels);

  // means over labels with defined surface metrics
  double hd_sum = 0, asd_sum = 0;
  Index sd_n = 0;
  for (const auto& [label, entry] : report["per_label"].items()) {
    if (entry.contains("hd_mm")) {
      hd_sum += entry["hd_mm"].get<double>();
      asd_sum += entry["asd_mm"].get<double>();
      ++sd_n;
    }
  }
  if (sd_n > 0) {
    report["hd_mm"] = hd_sum / double(sd_n);
    report["asd_mm"] = asd_sum / double(sd_n);
  }
  timings["metrics"] = watch.stop_ms();

  std::vector<FileRecord> outputs;
  if (!opt.pdf_csv.empty()) {
    watch.start();
    MotionPdfOptions po;
    po.bins = opt.bins;
    po.sigma = opt.pdf_sigma;
    po.pair_budget = opt.pair_budget;
    po.seed = opt.seed;
    const auto pdf = motion_pair_pdf(ddf, src_labels, tgt_labels, po);
    if (pdf.empty)
      std::fprintf(stderr, "warning: no correctly registered labelled voxels; PDF is empty\n");
    report["pdf_empty"] = pdf.empty;
    io::atomic_write_text(opt.pdf_csv, pdf_to_csv(pdf));
    outputs.push_back({opt.pdf_csv, io::fnv1a64_file(opt.pdf_csv)});
    timings["pdf"] = watch.stop_ms();
  }

  check_finite_json(report, "metrics report");
  const fs::path report_path =
      opt.out.empty() ? fs::path(opt.ddf).replace_extension(".metrics.json") : fs::path(opt.out);
  write_json_atomic(report_path, report);
  outputs.push_back({report_path.string(), io::fnv1a64_file(report_path)});
  write_json_atomic(fs::path(report_path).replace_extension(".manifest.json"),
                    make_manifest("metrics", json::object(), opt.seed, inputs, outputs, timings));
  std::printf("metrics written to %s\n", report_path.string().c_str());
  return kExitOk;
}

struct SeparabilityOptions2 {
  std::string config;
  std::string out_prefix;
  std::string qs = "0,3,4";
  std::string dims = "32,32,32";
  Index budget = 36;
  uint64_t seed = 1;
  Index gap = 6;
  double motion = 3.0;
  double body_radius = 2.0;
  Index bins = 24;
  // label mode
  std::string ddf, src_labels, tgt_labels, pdf_csv;
};

double region_mass(const MotionPairPdf& pdf, Index max_dist, Index min_diff) {
  double mass = 0.0;
  for (Index dist = 0; dist <= std::min<Index>(max_dist, pdf.density.cols() - 1); ++dist)
    for (Index diff = min_diff; diff < pdf.density.rows(); ++diff) mass += pdf.density(diff, dist);
  return mass;
}

int cmd_separability(const SeparabilityOptions2& opt) {
  if (!opt.ddf.empty()) {
    // label mode: one PDF from provided data
    const auto ddf = io::read_field(opt.ddf);
    const auto src_labels = io::read_labels(opt.src_labels);
    const auto tgt_labels = io::read_labels(opt.tgt_labels);
    MotionPdfOptions po;
    po.bins = opt.bins;
    po.seed = opt.seed;
    const auto pdf = motion_pair_pdf(ddf, src_labels, tgt_labels, po);
    if (pdf.empty)
      std::fprintf(stderr, "warning: no correctly registered labelled voxels; PDF is empty\n");
    const fs::path csv = opt.pdf_csv.empty() ? fs::path(opt.ddf).replace_extension(".pdf.csv")
                                             : fs::path(opt.pdf_csv);
    io::atomic_write_text(csv, pdf_to_csv(pdf));
    json summary;
    summary["empty"] = pdf.empty;
    summary["csv"] = csv.string();
    write_json_atomic(fs::path(csv).replace_extension(".json"), summary);
    std::printf("pdf written to %s%s\n", csv.string().c_str(), pdf.empty ? " (empty)" : "");
    return kExitOk;
  }

  const PipelineConfig base = load_pipeline_config(opt.config);
  if (base.schedule_levels < 1)
    throw std::invalid_argument(
        "separability: the config must specify \"levels\" as an integer schedule");
  const Dims dims = parse_dims(opt.dims);
  const auto q_list = parse_index_list(opt.qs, "--qs");

  json summary;
  summary["qs"] = q_list;
  json runs = json::array();
  std::vector<FileRecord> outputs;
  std::map<std::string, double> timings;
  Stopwatch watch;
  watch.start();

  const Index gap = opt.gap;
  const Vec3i ca(dims.t / 2, dims.h / 2, dims.w / 2 - gap / 2);
  const Vec3i cb(dims.t / 2, dims.h / 2, dims.w / 2 - gap / 2 + gap);
  // the left body moved +motion, the right -motion (pulling convention)
  const Vec3d motion_a(0, 0, -opt.motion);
  const Vec3d motion_b(0, 0, opt.motion);
  const auto scene = make_two_body_scene(dims, ca, cb, motion_a, motion_b, opt.body_radius);

  MotionPairPdf first_pdf;
  Index first_q = -1;
  for (const Index q : q_list) {
    const auto cfg = ma_config(base.schedule_levels, q, base.base_dilation, base.arch.heads);

    SeparabilityOptions so;
    so.dims = dims;
    so.trial_budget = opt.budget;
    so.seed = opt.seed;
    so.body_radius = std::min(opt.body_radius, 1.5);
    const auto table = measured_separability(cfg, base.params, so);
    std::string csv = "p,measured,bound\n";
    for (size_t i = 0; i < table.distances.size(); ++i) {
      char line[96];
      std::snprintf(line, sizeof line, "%g,%.6g,%g\n", table.distances[i], table.measured[i],
                    table.bound[i]);
      csv += line;
    }
    const std::string sep_path = opt.out_prefix + "_q" + std::to_string(q) + "_separability.csv";
    io::atomic_write_text(sep_path, csv);
    outputs.push_back({sep_path, io::fnv1a64_file(sep_path)});

    const auto res = register_volumes(scene.source, scene.target, cfg, base.params);
    double err_a = 0, err_b = 0;
    Index n_a = 0, n_b = 0;
    for (Index i = 0; i < dims.count(); ++i) {
      const int32_t label = scene.target_labels.data[i];
      if (label == 0) continue;
      const Vec3d gt = label == 1 ? motion_a : motion_b;
      double e = 0;
      for (int c = 0; c < 3; ++c)
        e = std::max(e, std::abs(double(res.final_ddf.data[i * 3 + c]) - gt[c]));
      if (label == 1) {
        err_a += e;
        ++n_a;
      } else {
        err_b += e;
        ++n_b;
      }
    }
    err_a = n_a > 0 ? err_a / double(n_a) : 0.0;
    err_b = n_b > 0 ? err_b / double(n_b) : 0.0;

    MotionPdfOptions po;
    po.bins = opt.bins;
    po.seed = opt.seed;
    const auto pdf = motion_pair_pdf(res.final_ddf, scene.source_labels, scene.target_labels, po);
    const std::string pdf_path = opt.out_prefix + "_q" + std::to_string(q) + "_pdf.csv";
    io::atomic_write_text(pdf_path, pdf_to_csv(pdf));
    outputs.push_back({pdf_path, io::fnv1a64_file(pdf_path)});

    json run;
    run["q"] = q;
    run["blob_error_a"] = err_a;
    run["blob_error_b"] = err_b;
    run["pdf_empty"] = pdf.empty;
    run["mass_lowdist_highdiff"] = region_mass(pdf, 2 * gap, Index(opt.motion));

    if (first_q < 0) {
      first_q = q;
      first_pdf = pdf;
    } else if (!pdf.empty && !first_pdf.empty) {
      Eigen::ArrayXXd diff = pdf.density - first_pdf.density;
      std::string dcsv;
      for (Index dist = 0; dist < diff.cols(); ++dist)
        for (Index dd = 0; dd < diff.rows(); ++dd) {
          char line[96];
          std::snprintf(line, sizeof line, "%lld,%lld,%.9g\n", (long long)dist, (long long)dd,
                        diff(dd, dist));
          dcsv += line;
        }
      const std::string diff_path = opt.out_prefix + "_q" + std::to_string(q) + "_minus_q" +
                                    std::to_string(first_q) + "_pdf.csv";
      io::atomic_write_text(diff_path, dcsv);
      outputs.push_back({diff_path, io::fnv1a64_file(diff_path)});
      MotionPairPdf diff_pdf;
      diff_pdf.density = diff;
      run["diff_mass_lowdist_highdiff"] = region_mass(diff_pdf, 2 * gap, Index(opt.motion));
    }
    runs.push_back(std::move(run));
    std::printf("q=%lld: blob errors (%.3f, %.3f) voxels\n", (long long)q, err_a, err_b);
  }
  summary["runs"] = std::move(runs);
  summary["scene"] = {{"gap", gap},
                      {"motion", opt.motion},
                      {"body_radius", opt.body_radius},
                      {"dims", {dims.t, dims.h, dims.w}}};
  timings["experiment"] = watch.stop_ms();
  check_finite_json(summary, "separability summary");

  const std::string summary_path = opt.out_prefix + "_summary.json";
  write_json_atomic(summary_path, summary);
  outputs.push_back({summary_path, io::fnv1a64_file(summary_path)});
  write_json_atomic(opt.out_prefix + ".manifest.json",
                    make_manifest("separability", pipeline_config_json(base), opt.seed,
                                  {{opt.config, io::fnv1a64_file(opt.config)}}, outputs, timings));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ran: coarse-to-fine volumetric registration with residual alignment"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap the worker count (default: RAN_THREADS or all cores)");

  RegisterOptions reg;
  auto* creg = app.add_subcommand("register", "register a source volume onto a target");
  creg->add_option("--src", reg.src, "source volume (.json sidecar or .nii)")->required();
  creg->add_option("--tgt", reg.tgt, "target volume")->required();
  creg->add_option("--config", reg.config, "pipeline configuration JSON")->required();
  creg->add_option("--out", reg.out, "output displacement field (.json sidecar)")->required();
  creg->add_option("--report", reg.report, "report JSON path (default: <out>.report.json)");
  creg->add_option("--src-labels", reg.src_labels, "optional source labels");
  creg->add_option("--tgt-labels", reg.tgt_labels, "optional target labels");
  creg->add_option("--seed", reg.seed, "seed recorded in the manifest");

  AnalyzeOptions ana;
  auto* cana = app.add_subcommand("analyze", "capture range and separability of a configuration");
  cana->add_option("--config", ana.config, "pipeline configuration JSON")->required();
  cana->add_option("--json", ana.json_out, "write the analysis as JSON");
  cana->add_option("--csv", ana.csv_out, "write the separability breakpoints as CSV");
  cana->add_option("--dims", ana.dims, "image dims T,H,W for the coverage check");

  SynthOptions syn;
  auto* csyn = app.add_subcommand("synth", "fabricate a synthetic (src, tgt, ddf) triple");
  csyn->add_option("--dims", syn.dims, "volume dims T,H,W (default 32,32,32)");
  csyn->add_option("--out-prefix", syn.out_prefix, "output path prefix")->required();
  csyn->add_option("--seed", syn.seed, "deformation and scene seed");
  csyn->add_option("--amplitude", syn.amplitude, "control-grid offset amplitude, voxels");
  csyn->add_option("--scale", syn.scale, "control-grid spacing, voxels (>= 2)");
  csyn->add_option("--rotate", syn.rotate, "rigid rotation rz,ry,rx in radians");
  csyn->add_option("--translate", syn.translate, "rigid translation tz,ty,tx in voxels");
  csyn->add_option("--blob-grid", syn.blob_grid, "blob lattice spacing of the test scene");
  csyn->add_option("--label-threshold", syn.label_threshold, "intensity above which voxels are labelled");

  MetricsOptions met;
  auto* cmet = app.add_subcommand("metrics", "evaluate a displacement field against labels");
  cmet->add_option("--ddf", met.ddf, "displacement field")->required();
  cmet->add_option("--src-labels", met.src_labels, "source labels")->required();
  cmet->add_option("--tgt-labels", met.tgt_labels, "target labels")->required();
  cmet->add_option("--out", met.out, "report JSON path (default: <ddf>.metrics.json)");
  cmet->add_option("--spacing", met.spacing, "voxel spacing sz,sy,sx in mm (default 1,1,1)");
  cmet->add_option("--pdf-csv", met.pdf_csv, "write the motion-pair PDF as CSV");
  cmet->add_option("--bins", met.bins, "PDF bins per axis");
  cmet->add_option("--pdf-sigma", met.pdf_sigma, "PDF smoothing in bins");
  cmet->add_option("--pair-budget", met.pair_budget, "sampled pairs when not exact");
  cmet->add_option("--seed", met.seed, "pair-sampling seed");

  SeparabilityOptions2 sep;
  auto* csep = app.add_subcommand("separability",
                                  "measured separability and motion-pair PDFs across q");
  csep->add_option("--config", sep.config, "schedule configuration JSON");
  csep->add_option("--out-prefix", sep.out_prefix, "output path prefix");
  csep->add_option("--qs", sep.qs, "motion-aware depths to compare (default 0,3,4)");
  csep->add_option("--dims", sep.dims, "scene dims T,H,W");
  csep->add_option("--budget", sep.budget, "registration budget for the probe table");
  csep->add_option("--seed", sep.seed, "scene seed");
  csep->add_option("--gap", sep.gap, "two-body gap in voxels");
  csep->add_option("--motion", sep.motion, "opposed motion magnitude in voxels");
  csep->add_option("--body-radius", sep.body_radius, "body radius in voxels");
  csep->add_option("--bins", sep.bins, "PDF bins per axis");
  csep->add_option("--ddf", sep.ddf, "label mode: displacement field");
  csep->add_option("--src-labels", sep.src_labels, "label mode: source labels");
  csep->add_option("--tgt-labels", sep.tgt_labels, "label mode: target labels");
  csep->add_option("--pdf-csv", sep.pdf_csv, "label mode: PDF CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (threads > 0) set_max_threads(threads);

  try {
    if (creg->parsed()) return cmd_register(reg);
    if (cana->parsed()) return cmd_analyze(ana);
    if (csyn->parsed()) return cmd_synth(syn);
    if (cmet->parsed()) return cmd_metrics(met);
    if (csep->parsed()) {
      if (sep.ddf.empty() && (sep.config.empty() || sep.out_prefix.empty()))
        throw std::invalid_argument(
            "separability: needs either --config and --out-prefix, or --ddf with labels");
      if (!sep.ddf.empty() && (sep.src_labels.empty() || sep.tgt_labels.empty()))
        throw std::invalid_argument("separability: label mode needs --src-labels and --tgt-labels");
      return cmd_separability(sep);
    }
  } catch (const numeric_failure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const invalid_data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const undefined_metric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ran::cli
