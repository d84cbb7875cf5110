// lusline: line-artefact detection in lung ultrasound frames.

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lusline/errors.hpp"
#include "lusline/imaging.hpp"
#include "lusline/metrics.hpp"
#include "lusline/phantom.hpp"
#include "lusline/pipeline.hpp"
#include "lusline/raster_io.hpp"

namespace fs = std::filesystem;
using namespace lusline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPipeline = 2;

struct CommonFlags {
  std::string config;
  std::string out;
  bool overlay = false;
  bool trace = false;
  int jobs = -1;
};

pipeline::PipelineConfig resolve_config(const CommonFlags& f) {
  pipeline::PipelineConfig cfg = f.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(f.config);
  if (!f.out.empty()) cfg.io.out_dir = f.out;
  if (f.overlay) cfg.io.overlay = true;
  if (f.trace) cfg.io.trace = true;
  if (f.jobs >= 0) cfg.jobs = f.jobs;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Writes the detection JSON plus optional overlay and trace for one frame.
void write_frame_outputs(const imaging::Frame& frame, const pipeline::FrameResult& r,
                         const pipeline::PipelineConfig& cfg) {
  const fs::path& dir = cfg.io.out_dir;
  write_text(dir / (r.frame_id + ".json"), pipeline::detection_json(r));
  if (cfg.io.overlay) io::write_png_rgb(dir / (r.frame_id + "_overlay.png"), pipeline::render_overlay(frame, r));
  if (cfg.io.trace) solver::write_trace_csv(dir / (r.frame_id + "_trace.csv"), r.solve);
}

int cmd_detect(const std::string& input, const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  ensure_dir(cfg.io.out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const imaging::Frame frame = [&] {
    try {
      return imaging::load_frame(input, cfg.imaging.masks);
    } catch (const Error& e) {
      throw pipeline::StageError("imaging", e.what());
    }
  }();
  const auto result = pipeline::process_frame(frame, fs::path(input).stem().string(), cfg);
  write_frame_outputs(frame, result, cfg);
  std::fprintf(stderr, "%s: %zu B-line(s), %d iterations, %.2f s\n", result.frame_id.c_str(),
               result.detection.b_lines.size(), result.solve.iterations, seconds_since(t0));
  return kExitOk;
}

int cmd_sequence(const std::string& input, const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  if (!fs::is_directory(input)) throw ArgumentError("'" + input + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_regular_file() && io::is_supported_raster(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ArgumentError("no frames found in '" + input + "'");
  ensure_dir(cfg.io.out_dir);

  struct Outcome {
    std::optional<std::size_t> b_count;
    double seconds = 0.0;
    std::string error;
  };
  std::vector<Outcome> outcomes(files.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::min<int>(cfg.jobs > 0 ? cfg.jobs : static_cast<int>(hw), static_cast<int>(files.size()));
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&] {
    // Frame-level workers take the cores; kernels run serially inside each.
    if (workers > 1) omp_set_num_threads(1);
    for (std::size_t i = next++; i < files.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      Outcome& o = outcomes[i];
      try {
        const auto frame = imaging::load_frame(files[i], cfg.imaging.masks);
        const auto r = pipeline::process_frame(frame, files[i].stem().string(), cfg);
        write_frame_outputs(frame, r, cfg);
        o.b_count = r.detection.b_lines.size();
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        o.error = e.what();
        std::lock_guard lock(log_mutex);
        std::fprintf(stderr, "warning: skipping %s: %s\n", files[i].filename().string().c_str(), e.what());
      }
      o.seconds = seconds_since(t0);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work();
        } catch (...) {
          errors[w] = std::current_exception();
          next = files.size();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::ofstream csv(cfg.io.out_dir / "sequence.csv");
  if (!csv) throw Error("cannot write sequence.csv");
  csv << "frame,seconds,b_count,running_mean_b\n";
  nlohmann::json summary;
  summary["skipped"] = nlohmann::json::array();
  double total_b = 0.0, total_s = 0.0;
  int done = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& o = outcomes[i];
    const std::string id = files[i].stem().string();
    if (!o.b_count) {
      summary["skipped"].push_back({{"frame", id}, {"reason", o.error}});
      continue;
    }
    ++done;
    total_b += static_cast<double>(*o.b_count);
    total_s += o.seconds;
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.3f,%zu,%.6f\n", id.c_str(), o.seconds, *o.b_count, total_b / done);
    csv << line;
  }
  summary["frames"] = files.size();
  summary["processed"] = done;
  summary["mean_seconds_per_frame"] = done ? total_s / done : 0.0;
  summary["mean_b_lines"] = done ? total_b / done : 0.0;
  summary["jobs"] = workers;
  write_text(cfg.io.out_dir / "summary.json", summary.dump(2));
  std::fprintf(stderr, "%d/%zu frame(s) processed, mean %.2f s/frame, mean B-lines %.3f\n", done, files.size(),
               done ? total_s / done : 0.0, done ? total_b / done : 0.0);
  return done > 0 ? kExitOk : kExitPipeline;
}

struct PhantomFlags {
  int size = 512;
  int count = 1;
  int b_lines = 2;
  std::vector<double> angles;
  double speckle = 0.5;
  double attenuation = -1.0;
  double brightness = -1.0;
  int pleural_depth = -1;
  int horizontal = 1;
  std::string id = "phantom";
};

int cmd_phantom(const PhantomFlags& pf, std::uint64_t seed, const CommonFlags& flags) {
  if (!flags.config.empty()) pipeline::load_config(flags.config);  // validated for consistency only
  const fs::path dir = flags.out.empty() ? fs::path("out") : fs::path(flags.out);
  if (pf.count < 1) throw ConfigError("--count must be at least 1");
  if (pf.b_lines < -1) throw ConfigError("--b-lines must be >= 0, or -1 for a random count in [0,4]");
  ensure_dir(dir);

  std::mt19937_64 count_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<metrics::Annotation> annotations;
  for (int i = 0; i < pf.count; ++i) {
    phantom::PhantomParams p;
    p.height = p.width = pf.size;
    p.pleural_depth = pf.pleural_depth > 0 ? pf.pleural_depth : pf.size / 5;
    p.horizontal_lines = pf.horizontal;
    p.speckle = pf.speckle;
    if (pf.attenuation >= 0.0) p.attenuation = pf.attenuation;
    if (pf.brightness >= 0.0) p.b_line_brightness = pf.brightness;
    p.b_line_angles = pf.angles;
    p.b_lines = pf.b_lines >= 0 ? pf.b_lines : std::uniform_int_distribution<int>(0, 4)(count_rng);
    p.seed = seed + static_cast<std::uint64_t>(i);
    const std::string id = pf.count == 1 ? pf.id : pf.id + "_" + std::to_string(1000 + i).substr(1);
    try {
      p.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    const auto ph = phantom::generate(p, id);
    io::write_png_gray(dir / (id + ".png"), ph.pixels);
    annotations.push_back(ph.annotation);
  }
  metrics::write_annotations(dir / (pf.count == 1 ? pf.id + ".json" : "annotations.json"), annotations);
  std::fprintf(stderr, "wrote %d phantom frame(s) to %s\n", pf.count, dir.string().c_str());
  return kExitOk;
}

int cmd_evaluate(const std::string& det_dir, const std::string& ann_file, const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  if (!fs::is_directory(det_dir)) throw ArgumentError("'" + det_dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(det_dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".json" && p.filename() != "summary.json" && p.filename() != "metrics.json") {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<pipeline::DetectionRecord> records;
  for (const auto& f : files) records.push_back(pipeline::read_detection(f));
  const auto annotations = metrics::read_annotations(ann_file);
  const auto result = pipeline::evaluate(records, annotations, cfg.evaluation);

  ensure_dir(cfg.io.out_dir);
  write_text(cfg.io.out_dir / "metrics.json", pipeline::evaluation_json(result));
  const std::string table = metrics::format_report(result.report);
  write_text(cfg.io.out_dir / "metrics.txt", table);
  if (result.roc) {
    std::ofstream roc(cfg.io.out_dir / "roc.csv");
    roc << "threshold,fpr,tpr\n";
    for (const auto& p : result.roc->points) roc << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  std::cout << table;
  for (const auto& n : result.notes) std::fprintf(stderr, "note: %s\n", n.c_str());
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_jobs) {
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--out", f.out, "output directory (default: out)");
  cmd->add_flag("--overlay", f.overlay, "write a PNG overlay per frame");
  cmd->add_flag("--trace", f.trace, "write the solver trace CSV per frame");
  if (with_jobs) cmd->add_option("--jobs", f.jobs, "frame-level workers (0 = all cores)")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line-artefact detection in lung ultrasound frames"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string input, second;
  std::uint64_t seed = 1;
  PhantomFlags pf;

  auto* detect = app.add_subcommand("detect", "detect lines in one frame");
  detect->add_option("frame", input, "input raster (PNG or PGM)")->required();
  add_common(detect, flags, false);

  auto* sequence = app.add_subcommand("sequence", "process every frame in a directory");
  sequence->add_option("dir", input, "directory of frames")->required();
  add_common(sequence, flags, true);

  auto* phantom = app.add_subcommand("phantom", "render synthetic frames with ground truth");
  phantom->add_option("--config", flags.config, "JSON configuration file");
  phantom->add_option("--out", flags.out, "output directory (default: out)");
  phantom->add_option("--seed", seed, "random seed");
  phantom->add_option("--size", pf.size, "frame height and width");
  phantom->add_option("--count", pf.count, "number of frames");
  phantom->add_option("--b-lines", pf.b_lines, "B-lines per frame (-1: random in [0,4])");
  phantom->add_option("--angles", pf.angles, "explicit B-line angles in degrees")->delimiter(',');
  phantom->add_option("--speckle", pf.speckle, "speckle coefficient of variation");
  phantom->add_option("--attenuation", pf.attenuation, "depth attenuation per pixel");
  phantom->add_option("--brightness", pf.brightness, "B-line brightness");
  phantom->add_option("--pleural-depth", pf.pleural_depth, "pleural line depth in pixels");
  phantom->add_option("--horizontal", pf.horizontal, "horizontal lines below the pleural line");
  phantom->add_option("--id", pf.id, "frame id (prefix when --count > 1)");

  auto* evaluate = app.add_subcommand("evaluate", "score detections against annotations");
  evaluate->add_option("detections", input, "directory of detection JSON files")->required();
  evaluate->add_option("annotations", second, "annotation JSON file")->required();
  add_common(evaluate, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*detect) return cmd_detect(input, flags);
    if (*sequence) return cmd_sequence(input, flags);
    if (*phantom) return cmd_phantom(pf, seed, flags);
    if (*evaluate) return cmd_evaluate(input, second, flags);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const pipeline::StageError& e) {
    std::fprintf(stderr, "error in stage %s\n", e.what());
    return kExitPipeline;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPipeline;
  }
  return kExitUsage;
}
