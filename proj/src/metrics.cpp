#include "lusline/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "lusline/errors.hpp"

namespace lusline::metrics {
namespace {

using nlohmann::json;

AnnotatedClass parse_class(const std::string& text) {
  std::string key;
  for (char ch : text)
    if (ch != '_' && ch != '-' && ch != ' ') key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (key == "pleural") return AnnotatedClass::Pleural;
  if (key == "horizontal" || key == "aline") return AnnotatedClass::Horizontal;
  if (key == "bline") return AnnotatedClass::BLine;
  throw DecodeError("unknown annotation class '" + text + "'");
}

const char* class_name(AnnotatedClass c) {
  switch (c) {
    case AnnotatedClass::Pleural: return "pleural";
    case AnnotatedClass::Horizontal: return "horizontal";
    case AnnotatedClass::BLine: return "b_line";
  }
  return "b_line";
}

Metric ratio(double num, double den) {
  if (den == 0.0) return {};
  return {num / den, true};
}

}  // namespace

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DecodeError("cannot open annotation file '" + path.string() + "'");
  std::vector<Annotation> out;
  try {
    const json doc = json::parse(in);
    for (const json& f : doc.at("frames")) {
      Annotation a;
      a.id = f.at("id").is_string() ? f.at("id").get<std::string>() : f.at("id").dump();
      if (f.contains("height")) a.height = f.at("height").get<int>();
      if (f.contains("width")) a.width = f.at("width").get<int>();
      for (const json& l : f.value("lines", json::array())) {
        AnnotatedLine line;
        line.cls = parse_class(l.at("class").get<std::string>());
        const json& ep = l.at("endpoints");
        if (ep.size() != 2) throw DecodeError("annotation line needs exactly two endpoints");
        line.a = {ep[0].at(0).get<double>(), ep[0].at(1).get<double>()};
        line.b = {ep[1].at(0).get<double>(), ep[1].at(1).get<double>()};
        if (a.height && a.width) {
          for (const Point& p : {line.a, line.b}) {
            if (p.row < 0 || p.col < 0 || p.row > *a.height - 1 || p.col > *a.width - 1) {
              throw DecodeError("annotation endpoint outside frame '" + a.id + "'");
            }
          }
        }
        a.lines.push_back(line);
      }
      out.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw DecodeError("malformed annotation file '" + path.string() + "': " + e.what());
  }
  return out;
}

void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& frames) {
  json doc;
  doc["frames"] = json::array();
  for (const Annotation& a : frames) {
    json f;
    f["id"] = a.id;
    if (a.height) f["height"] = *a.height;
    if (a.width) f["width"] = *a.width;
    f["lines"] = json::array();
    for (const AnnotatedLine& l : a.lines) {
      f["lines"].push_back({{"class", class_name(l.cls)},
                            {"endpoints", {{l.a.row, l.a.col}, {l.b.row, l.b.col}}}});
    }
    doc["frames"].push_back(std::move(f));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

double segment_theta(Point a, Point b) {
  const double deg = std::atan2(-(b.col - a.col), -(b.row - a.row)) * 180.0 / std::numbers::pi;
  double t = std::fmod(deg + 90.0, 180.0);
  if (t < 0) t += 180.0;
  return t - 90.0;
}

BLineObservation observation_from_annotation(const AnnotatedLine& line) {
  const bool a_first = line.a.row < line.b.row || (line.a.row == line.b.row && line.a.col <= line.b.col);
  return {a_first ? line.a : line.b, segment_theta(line.a, line.b)};
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

std::vector<std::optional<std::size_t>> match_lines(const std::vector<BLineObservation>& detections,
                                                    const std::vector<BLineObservation>& annotations,
                                                    const MatchOptions& options) {
  if (!(options.tol_px > 0.0) || !(options.tol_deg > 0.0)) throw ArgumentError("matching tolerances must be positive");
  struct Pair {
    double cost, dist, dtheta;
    std::size_t d, a;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      const auto& d = detections[i];
      const auto& a = annotations[j];
      const double dist = std::hypot(d.origin.row - a.origin.row, d.origin.col - a.origin.col);
      double dt = std::fmod(std::abs(d.theta - a.theta), 180.0);
      dt = std::min(dt, 180.0 - dt);
      if (dist <= options.tol_px && dt <= options.tol_deg) {
        pairs.push_back({dist / options.tol_px + dt / options.tol_deg, dist, dt, i, j});
      }
    }
  }
  // Ties are broken by geometry, then by detection index, so the result does
  // not depend on the order of the annotation list.
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& x, const Pair& y) {
    const auto& ax = annotations[x.a].origin;
    const auto& ay = annotations[y.a].origin;
    return std::tie(x.cost, x.dist, x.dtheta, x.d, ax.row, ax.col, annotations[x.a].theta) <
           std::tie(y.cost, y.dist, y.dtheta, y.d, ay.row, ay.col, annotations[y.a].theta);
  });
  std::vector<std::optional<std::size_t>> match(detections.size());
  std::vector<bool> taken(annotations.size(), false);
  for (const Pair& p : pairs) {
    if (match[p.d] || taken[p.a]) continue;
    match[p.d] = p.a;
    taken[p.a] = true;
  }
  return match;
}

ConfusionCounts match_detections(const FrameLines& detections, const FrameLines& annotations,
                                 const MatchOptions& options) {
  if (detections.frame_id != annotations.frame_id) {
    throw ArgumentError("cannot match frame '" + detections.frame_id + "' against annotations of '" +
                        annotations.frame_id + "'");
  }
  ConfusionCounts c;
  if (detections.lines.empty() && annotations.lines.empty()) {
    c.tn = 1;
    return c;
  }
  for (const auto& m : match_lines(detections.lines, annotations.lines, options)) {
    if (m) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = static_cast<long>(annotations.lines.size()) - c.tp;
  return c;
}

Metric f_beta(const Metric& precision, const Metric& recall, double beta) {
  if (!precision.defined || !recall.defined) return {};
  const double b2 = beta * beta;
  return ratio((1.0 + b2) * precision.value * recall.value, b2 * precision.value + recall.value);
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) throw ArgumentError("confusion counts must be non-negative");
  if (c.total() == 0) throw ArgumentError("confusion counts are all zero");
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double total = static_cast<double>(c.total());

  MetricsReport r;
  r.counts = c;
  r.accuracy_pct = {100.0 * (tp + tn) / total, true};
  r.missed_pct = {100.0 * fn / total, true};
  r.false_pct = {100.0 * fp / total, true};
  r.recall = ratio(tp, tp + fn);
  r.precision = ratio(tp, tp + fp);
  r.specificity = ratio(tn, tn + fp);
  r.tpr = r.recall;
  if (r.specificity.defined) r.fpr = {1.0 - r.specificity.value, true};
  r.f_half = f_beta(r.precision, r.recall, 0.5);
  r.f1 = f_beta(r.precision, r.recall, 1.0);
  r.f2 = f_beta(r.precision, r.recall, 2.0);
  if (r.recall.defined && r.fpr.defined) r.lr_plus = ratio(r.recall.value, r.fpr.value);
  return r;
}

RocCurve roc_curve(const std::vector<std::pair<double, bool>>& scored) {
  const auto positives = std::count_if(scored.begin(), scored.end(), [](const auto& s) { return s.second; });
  const auto negatives = static_cast<std::ptrdiff_t>(scored.size()) - positives;
  if (positives == 0 || negatives == 0) throw ArgumentError("ROC needs both positive and negative examples");

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (int k = 0; k <= 300; ++k) {
    const double t = -1.0 + 0.01 * k;
    long tp = 0, fp = 0;
    for (const auto& [score, truth] : scored) {
      if (score > t) {
        if (truth) {
          ++tp;
        } else {
          ++fp;
        }
      }
    }
    curve.points.push_back({t, static_cast<double>(fp) / negatives, static_cast<double>(tp) / positives});
  }
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  std::stable_sort(curve.points.begin(), curve.points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
  });
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i - 1];
    const auto& q = curve.points[i];
    curve.auc += (q.fpr - p.fpr) * (q.tpr + p.tpr) / 2.0;
  }
  return curve;
}

double nmse_counts(std::span<const double> detected, std::span<const double> truth) {
  if (detected.size() != truth.size()) throw ArgumentError("count sequences differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += (detected[i] - truth[i]) * (detected[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw ArgumentError("NMSE undefined: truth counts are all zero");
  return num / den;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  auto row = [&](const std::string& name, const Metric& m, bool pct) {
    out << std::left << std::setw(28) << name;
    if (!m.defined) {
      out << "undefined\n";
      return;
    }
    out << (pct ? 100.0 * m.value : m.value) << (pct ? "%" : "") << '\n';
  };
  auto row_pct = [&](const std::string& name, const Metric& m) {
    out << std::left << std::setw(28) << name << m.value << "%\n";
  };
  row_pct("% Detection Accuracy", r.accuracy_pct);
  row_pct("% Missed Detection", r.missed_pct);
  row_pct("% False Detection", r.false_pct);
  row("Specificity", r.specificity, true);
  row("Recall", r.recall, true);
  row("Precision", r.precision, true);
  row("F1 Index", r.f1, false);
  row("F2 Index", r.f2, false);
  row("F0.5 Index", r.f_half, false);
  row("LR+", r.lr_plus, false);
  out << std::left << std::setw(28) << "Area under curve (AUC)";
  if (r.auc) {
    out << *r.auc << '\n';
  } else {
    out << "n/a\n";
  }
  out << std::left << std::setw(28) << "NMSE of B-line counts";
  if (r.nmse_counts) {
    out << *r.nmse_counts << '\n';
  } else {
    out << "n/a\n";
  }
  out << "counts: tp=" << r.counts.tp << " tn=" << r.counts.tn << " fp=" << r.counts.fp << " fn=" << r.counts.fn
      << '\n';
  return out.str();
}

}  // namespace lusline::metrics
