#include "lusline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lusline/raster_io.hpp"

namespace lusline::pipeline {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& section, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

template <class T>
void read_optional(const json& obj, const char* key, std::optional<T>& out, const std::string& section) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
    return;
  }
  T value{};
  read(obj, key, value, section);
  out = value;
}

const char* gradient_name(solver::GradientConvention g) {
  return g == solver::GradientConvention::ExactAdjoint ? "exact_adjoint" : "radon_transpose";
}

json point_json(const Point& p) { return json::array({p.row, p.col}); }

json line_json(const detector::DetectedLine& line) {
  json j;
  j["class"] = detector::to_string(line.cls);
  j["r"] = line.r;
  j["theta_deg"] = line.theta;
  j["radon_value"] = line.radon_value;
  j["endpoints"] = json::array({point_json(line.endpoints.a), point_json(line.endpoints.b)});
  j["f_index"] = line.f_index ? json(*line.f_index) : json(nullptr);
  j["pleural_crossing"] = line.pleural_crossing ? point_json(*line.pleural_crossing) : json(nullptr);
  return j;
}

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

void draw_segment(Grid2D<io::Rgb>& img, Point a, Point b, io::Rgb colour) {
  const double len = std::hypot(b.row - a.row, b.col - a.col);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int r = static_cast<int>(std::lround(a.row + t * (b.row - a.row)));
    const int c = static_cast<int>(std::lround(a.col + t * (b.col - a.col)));
    for (int dc = 0; dc <= 1; ++dc) {
      if (img.contains(r, c + dc)) img(r, c + dc) = colour;
    }
  }
}

// Clips segment a-b to [0, rows-1] x [0, cols-1]; false if nothing remains.
bool clip_to(Point& a, Point& b, int rows, int cols) {
  double t0 = 0.0, t1 = 1.0;
  const double dr = b.row - a.row, dc = b.col - a.col;
  auto edge = [&](double p, double d, double lo, double hi) {
    if (std::abs(d) < 1e-12) return p >= lo && p <= hi;
    double u = (lo - p) / d, v = (hi - p) / d;
    if (u > v) std::swap(u, v);
    t0 = std::max(t0, u);
    t1 = std::min(t1, v);
    return t0 <= t1;
  };
  if (!edge(a.row, dr, 0.0, rows - 1.0) || !edge(a.col, dc, 0.0, cols - 1.0)) return false;
  const Point start{a.row + t0 * dr, a.col + t0 * dc};
  const Point end{a.row + t1 * dr, a.col + t1 * dc};
  a = start;
  b = end;
  return true;
}

}  // namespace

void PipelineConfig::validate() const {
  const auto& s = solver;
  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) throw ConfigError("solver.sigma must be positive");
  if (!(s.epsilon > 0.0)) throw ConfigError("solver.epsilon must be positive");
  if (s.max_iter < 1) throw ConfigError("solver.max_iter must be at least 1");
  if (s.mu && !(*s.mu > 0.0)) throw ConfigError("solver.mu must be positive");
  if (s.gamma && !(*s.gamma > 0.0)) throw ConfigError("solver.gamma must be positive");
  if (s.lipschitz && !(*s.lipschitz > 0.0)) throw ConfigError("solver.lipschitz must be positive");
  if (s.mu && s.gamma && !(*s.gamma >= std::sqrt(*s.mu) / 2.0)) {
    throw ConfigError("convexity guard violated: gamma < sqrt(mu)/2");
  }
  detector.validate();
  try {
    radon::AngleGrid check(angle_spacing);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("angle_spacing: ") + e.what());
  }
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  if (!(evaluation.tol_px > 0.0) || !(evaluation.tol_deg > 0.0)) {
    throw ConfigError("evaluation tolerances must be positive");
  }
  if (imaging.apex && (imaging.apex->row < 0 || imaging.apex->col < 0)) {
    throw ConfigError("imaging.apex must be non-negative");
  }
}

PipelineConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  reject_unknown(doc, "", {"solver", "detector", "imaging", "io", "angle_spacing", "jobs", "evaluation"});

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    reject_unknown(s, "solver",
                   {"mu", "gamma", "sigma", "epsilon", "max_iter", "track_objective", "gradient", "lipschitz"});
    read_optional(s, "mu", cfg.solver.mu, "solver");
    read_optional(s, "gamma", cfg.solver.gamma, "solver");
    read(s, "sigma", cfg.solver.sigma, "solver");
    read(s, "epsilon", cfg.solver.epsilon, "solver");
    read(s, "max_iter", cfg.solver.max_iter, "solver");
    read(s, "track_objective", cfg.solver.track_objective, "solver");
    read_optional(s, "lipschitz", cfg.solver.lipschitz, "solver");
    if (s.contains("gradient")) {
      std::string g;
      read(s, "gradient", g, "solver");
      if (g == "radon_transpose") {
        cfg.solver.gradient = solver::GradientConvention::RadonTranspose;
      } else if (g == "exact_adjoint") {
        cfg.solver.gradient = solver::GradientConvention::ExactAdjoint;
      } else {
        throw ConfigError("solver.gradient must be 'radon_transpose' or 'exact_adjoint'");
      }
    }
  }
  if (doc.contains("detector")) {
    const json& d = doc["detector"];
    reject_unknown(d, "detector", {"m", "nms_r", "nms_theta", "merge_tol", "threshold_scale"});
    read(d, "m", cfg.detector.m, "detector");
    read(d, "nms_r", cfg.detector.nms_r, "detector");
    read(d, "nms_theta", cfg.detector.nms_theta, "detector");
    read(d, "merge_tol", cfg.detector.merge_tol, "detector");
    read(d, "threshold_scale", cfg.detector.threshold_scale, "detector");
  }
  if (doc.contains("imaging")) {
    const json& im = doc["imaging"];
    reject_unknown(im, "imaging", {"apex", "masks"});
    if (im.contains("apex") && !im["apex"].is_null()) {
      std::vector<int> apex;
      read(im, "apex", apex, "imaging");
      if (apex.size() != 2) throw ConfigError("imaging.apex must be [row, col]");
      cfg.imaging.apex = PixelPos{apex[0], apex[1]};
    }
    if (im.contains("masks")) {
      std::vector<std::string> masks;
      read(im, "masks", masks, "imaging");
      for (const auto& m : masks) {
        try {
          cfg.imaging.masks.push_back(imaging::MaskRect::parse(m));
        } catch (const ArgumentError& e) {
          throw ConfigError(std::string("imaging.masks: ") + e.what());
        }
      }
    }
  }
  if (doc.contains("io")) {
    const json& io = doc["io"];
    reject_unknown(io, "io", {"out_dir", "overlay", "trace"});
    std::string dir = cfg.io.out_dir.string();
    read(io, "out_dir", dir, "io");
    cfg.io.out_dir = dir;
    read(io, "overlay", cfg.io.overlay, "io");
    read(io, "trace", cfg.io.trace, "io");
  }
  read(doc, "angle_spacing", cfg.angle_spacing, "");
  read(doc, "jobs", cfg.jobs, "");
  if (doc.contains("evaluation")) {
    const json& e = doc["evaluation"];
    reject_unknown(e, "evaluation", {"tol_px", "tol_deg"});
    read(e, "tol_px", cfg.evaluation.tol_px, "evaluation");
    read(e, "tol_deg", cfg.evaluation.tol_deg, "evaluation");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const PipelineConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["solver"] = {{"mu", opt(c.solver.mu)},
                 {"gamma", opt(c.solver.gamma)},
                 {"sigma", c.solver.sigma},
                 {"epsilon", c.solver.epsilon},
                 {"max_iter", c.solver.max_iter},
                 {"track_objective", c.solver.track_objective},
                 {"gradient", gradient_name(c.solver.gradient)},
                 {"lipschitz", opt(c.solver.lipschitz)}};
  j["detector"] = {{"m", c.detector.m},
                   {"nms_r", c.detector.nms_r},
                   {"nms_theta", c.detector.nms_theta},
                   {"merge_tol", c.detector.merge_tol},
                   {"threshold_scale", c.detector.threshold_scale}};
  json masks = json::array();
  for (const auto& m : c.imaging.masks) masks.push_back(m.to_string());
  j["imaging"] = {{"apex", c.imaging.apex ? json::array({c.imaging.apex->row, c.imaging.apex->col}) : json(nullptr)},
                  {"masks", masks}};
  j["io"] = {{"out_dir", c.io.out_dir.string()}, {"overlay", c.io.overlay}, {"trace", c.io.trace}};
  j["angle_spacing"] = c.angle_spacing;
  j["jobs"] = c.jobs;
  j["evaluation"] = {{"tol_px", c.evaluation.tol_px}, {"tol_deg", c.evaluation.tol_deg}};
  return j.dump(2);
}

FrameResult process_frame(const imaging::Frame& frame, const std::string& frame_id, const PipelineConfig& config) {
  config.validate();
  FrameResult out;
  out.frame_id = frame_id;
  out.frame_height = frame.height();
  out.frame_width = frame.width();
  out.degenerate = frame.degenerate();
  out.gradient = config.solver.gradient;

  const imaging::ProbeCentredImage centred = in_stage("imaging", [&] {
    if (config.imaging.apex) {
      out.apex = *config.imaging.apex;
    } else if (frame.apex()) {
      out.apex = *frame.apex();
    } else {
      out.apex_estimated = true;
      try {
        out.apex = imaging::estimate_apex(frame);
      } catch (const NoContentError&) {
        // An empty frame has no apex; any position gives the same empty template.
        out.apex = {0, frame.width() / 2};
      }
    }
    return imaging::probe_centre(frame, out.apex);
  });
  out.frame_offset = centred.source_offset;
  out.template_size = centred.size();

  const radon::AngleGrid grid(config.angle_spacing);
  out.solve = in_stage("solver", [&] { return solver::cps_solve(centred, config.solver, grid); });
  out.detection = in_stage("detector", [&] { return detector::detect(out.solve.x_hat, centred, config.detector); });
  return out;
}

FrameResult process_file(const std::filesystem::path& path, const PipelineConfig& config) {
  const imaging::Frame frame =
      in_stage("imaging", [&] { return imaging::load_frame(path, config.imaging.masks); });
  return process_frame(frame, path.stem().string(), config);
}

std::string detection_json(const FrameResult& r) {
  const auto& d = r.detection;
  json j;
  j["frame_id"] = r.frame_id;
  j["frame_size"] = json::array({r.frame_height, r.frame_width});
  j["apex"] = json::array({r.apex.row, r.apex.col});
  j["apex_estimated"] = r.apex_estimated;
  j["degenerate_input"] = r.degenerate;
  j["template_size"] = r.template_size;
  j["frame_offset"] = json::array({r.frame_offset.row, r.frame_offset.col});
  j["solver"] = {{"iterations", r.solve.iterations},
                 {"converged", r.solve.converged},
                 {"final_relative_change", r.solve.relative_changes.empty() ? 0.0 : r.solve.relative_changes.back()},
                 {"mu", r.solve.mu},
                 {"gamma", r.solve.gamma},
                 {"lipschitz", r.solve.lipschitz},
                 {"gradient", gradient_name(r.gradient)}};
  j["h_lung"] = d.h_lung;
  j["mean_intensity"] = d.mean_intensity;
  j["f_val"] = d.f_val;
  j["pleural"] = line_json(d.pleural);
  j["horizontal_lines"] = json::array();
  for (const auto& l : d.horizontals) j["horizontal_lines"].push_back(line_json(l));
  j["b_lines"] = json::array();
  for (const auto& l : d.b_lines) j["b_lines"].push_back(line_json(l));
  j["b_candidates"] = json::array();
  for (const auto& l : d.b_candidates) j["b_candidates"].push_back(line_json(l));
  return j.dump(2);
}

DetectionRecord read_detection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DecodeError("cannot open detection file '" + path.string() + "'");
  DetectionRecord rec;
  try {
    const json j = json::parse(in);
    rec.frame_id = j.at("frame_id").get<std::string>();
    const double off_r = j.at("frame_offset").at(0).get<double>();
    const double off_c = j.at("frame_offset").at(1).get<double>();
    auto observation = [&](const json& line) -> std::optional<metrics::BLineObservation> {
      const json& x = line.at("pleural_crossing");
      if (x.is_null()) return std::nullopt;
      return metrics::BLineObservation{{x.at(0).get<double>() - off_r, x.at(1).get<double>() - off_c},
                                       line.at("theta_deg").get<double>()};
    };
    for (const json& line : j.at("b_lines")) {
      if (auto o = observation(line)) rec.b_lines.push_back(*o);
    }
    for (const json& line : j.at("b_candidates")) {
      const auto o = observation(line);
      if (o && !line.at("f_index").is_null()) rec.candidates.emplace_back(*o, line.at("f_index").get<double>());
    }
  } catch (const json::exception& e) {
    throw DecodeError("malformed detection file '" + path.string() + "': " + e.what());
  }
  return rec;
}

Grid2D<io::Rgb> render_overlay(const imaging::Frame& frame, const FrameResult& result) {
  const Image& px = frame.pixels();
  Grid2D<io::Rgb> img(px.rows(), px.cols());
  for (int r = 0; r < px.rows(); ++r) {
    for (int c = 0; c < px.cols(); ++c) {
      const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(px(r, c), 0.0, 1.0) * 255.0));
      img(r, c) = {g, g, g};
    }
  }
  const double dr = result.frame_offset.row, dc = result.frame_offset.col;
  auto draw = [&](Point a, Point b, io::Rgb colour) {
    a = {a.row - dr, a.col - dc};
    b = {b.row - dr, b.col - dc};
    if (clip_to(a, b, px.rows(), px.cols())) draw_segment(img, a, b, colour);
  };
  const io::Rgb red{255, 0, 0}, green{0, 255, 0};
  const auto& d = result.detection;
  draw(d.pleural.endpoints.a, d.pleural.endpoints.b, red);
  for (const auto& l : d.horizontals) draw(l.endpoints.a, l.endpoints.b, red);
  for (const auto& l : d.b_lines) {
    // From the pleural crossing down to the lower end of the line.
    const Point start = l.pleural_crossing ? *l.pleural_crossing : l.endpoints.a;
    draw(start, l.endpoints.b, green);
  }
  return img;
}

EvaluationResult evaluate(const std::vector<DetectionRecord>& detections,
                          const std::vector<metrics::Annotation>& annotations, const metrics::MatchOptions& options) {
  std::map<std::string, const DetectionRecord*> by_id;
  for (const auto& d : detections) {
    if (!by_id.emplace(d.frame_id, &d).second) throw ArgumentError("duplicate detection for frame '" + d.frame_id + "'");
  }
  std::set<std::string> annotated;
  std::vector<std::string> missing;
  for (const auto& a : annotations) {
    if (!annotated.insert(a.id).second) throw ArgumentError("duplicate annotation for frame '" + a.id + "'");
    if (!by_id.count(a.id)) missing.push_back(a.id);
  }
  std::vector<std::string> extra;
  for (const auto& [id, rec] : by_id)
    if (!annotated.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "frame ids do not align;";
    if (!missing.empty()) {
      msg += " no detections for:";
      for (const auto& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " no annotations for:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw ArgumentError(msg);
  }

  EvaluationResult out;
  metrics::ConfusionCounts total;
  std::vector<std::pair<double, bool>> scored;
  for (const auto& a : annotations) {
    const DetectionRecord& rec = *by_id.at(a.id);
    metrics::FrameLines truth{a.id, {}};
    for (const auto& line : a.lines) {
      if (line.cls == metrics::AnnotatedClass::BLine) truth.lines.push_back(metrics::observation_from_annotation(line));
    }
    total += metrics::match_detections({a.id, rec.b_lines}, truth, options);
    out.detected_counts.push_back(static_cast<double>(rec.b_lines.size()));
    out.truth_counts.push_back(static_cast<double>(truth.lines.size()));

    std::vector<metrics::BLineObservation> cands;
    for (const auto& [obs, f] : rec.candidates) cands.push_back(obs);
    const auto match = metrics::match_lines(cands, truth.lines, options);
    for (std::size_t i = 0; i < cands.size(); ++i) scored.emplace_back(rec.candidates[i].second, match[i].has_value());
  }
  if (total.total() == 0) throw ArgumentError("nothing to evaluate");
  out.report = metrics::compute_metrics(total);
  try {
    out.roc = metrics::roc_curve(scored);
    out.report.auc = out.roc->auc;
  } catch (const ArgumentError& e) {
    out.notes.push_back(std::string("ROC not computed: ") + e.what());
  }
  try {
    out.report.nmse_counts = metrics::nmse_counts(out.detected_counts, out.truth_counts);
  } catch (const ArgumentError& e) {
    out.notes.push_back(std::string("NMSE not computed: ") + e.what());
  }
  return out;
}

std::string evaluation_json(const EvaluationResult& e) {
  const auto& r = e.report;
  auto metric = [](const metrics::Metric& m) { return m.defined ? json(m.value) : json(nullptr); };
  json j;
  j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  j["accuracy_pct"] = metric(r.accuracy_pct);
  j["missed_pct"] = metric(r.missed_pct);
  j["false_pct"] = metric(r.false_pct);
  j["specificity"] = metric(r.specificity);
  j["recall"] = metric(r.recall);
  j["precision"] = metric(r.precision);
  j["tpr"] = metric(r.tpr);
  j["fpr"] = metric(r.fpr);
  j["f1"] = metric(r.f1);
  j["f2"] = metric(r.f2);
  j["f0_5"] = metric(r.f_half);
  j["lr_plus"] = metric(r.lr_plus);
  j["auc"] = r.auc ? json(*r.auc) : json(nullptr);
  j["nmse_counts"] = r.nmse_counts ? json(*r.nmse_counts) : json(nullptr);
  double mean_d = 0.0, mean_t = 0.0;
  for (double v : e.detected_counts) mean_d += v;
  for (double v : e.truth_counts) mean_t += v;
  if (!e.truth_counts.empty()) {
    mean_d /= static_cast<double>(e.detected_counts.size());
    mean_t /= static_cast<double>(e.truth_counts.size());
  }
  j["mean_detected_b_lines"] = mean_d;
  j["mean_annotated_b_lines"] = mean_t;
  j["frames"] = e.truth_counts.size();
  j["notes"] = e.notes;
  return j.dump(2);
}

}  // namespace lusline::pipeline
