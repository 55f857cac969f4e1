// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "binary_io.hpp"
#include "rsaprobe/csv.hpp"
#include "rsaprobe/errors.hpp"
#include "rsaprobe/pipeline.hpp"

namespace rsaprobe {
namespace {

using Json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// csv / json

std::string render_csv(const ScoreTable& t) {
  std::string out(kScoreCsvHeader);
  out.push_back('\n');
  for (const auto& r : t.records) {
    out += csv::join({std::string(to_string(r.language)), std::to_string(r.layer),
                      r.checkpoint.label(), std::string(to_string(r.modality)),
                      std::string(to_string(r.correctness)), opt_num(r.rs), opt_num(r.p_analytic),
                      opt_num(r.p_permutation), std::to_string(r.n_conditions),
                      std::string(to_string(r.status)), t.config_fingerprint});
    out.push_back('\n');
  }
  return out;
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string render_json(const ScoreTable& t) {
  Json j;
  j["config_fingerprint"] = t.config_fingerprint;
  j["metric"] = to_string(t.metric);
  j["max_conditions"] = t.max_conditions ? Json(*t.max_conditions) : Json(nullptr);
  j["seed"] = t.seed;
  Json records = Json::array();
  for (const auto& r : t.records) {
    Json o;
    o["language"] = to_string(r.language);
    o["layer"] = r.layer;
    o["checkpoint"] = r.checkpoint.label();
    o["modality"] = to_string(r.modality);
    o["correctness"] = to_string(r.correctness);
    o["rs"] = opt_json(r.rs);
    o["p_analytic"] = opt_json(r.p_analytic);
    o["p_permutation"] = opt_json(r.p_permutation);
    o["n_conditions"] = r.n_conditions;
    o["status"] = to_string(r.status);
    records.push_back(std::move(o));
  }
  j["records"] = std::move(records);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// relative gains

std::string render_gain_csv(const ScoreTable& t, GainAxis axis) {
  // Key excludes the compared axis; value holds (a, b) scores.
  using Key = std::tuple<Language, int, Checkpoint, int>;
  std::map<Key, std::pair<std::optional<double>, std::optional<double>>> pairs;
  for (const auto& r : t.records) {
    std::optional<double> score = r.status == CellStatus::kOk ? r.rs : std::nullopt;
    if (axis == GainAxis::kModality) {
      if (r.modality == Modality::kNlOnly) continue;
      auto& slot = pairs[{r.language, r.layer, r.checkpoint, static_cast<int>(r.correctness)}];
      (r.modality == Modality::kBimodalNlPl ? slot.first : slot.second) = score;
    } else {
      if (r.correctness == Correctness::kNotApplicable) continue;
      auto& slot = pairs[{r.language, r.layer, r.checkpoint, static_cast<int>(r.modality)}];
      (r.correctness == Correctness::kCorrect ? slot.first : slot.second) = score;
    }
  }
  std::string out = axis == GainAxis::kModality
                        ? "language,layer,checkpoint,correctness,bimodal_rs,unimodal_rs,gain_percent\n"
                        : "language,layer,checkpoint,modality,correct_rs,incorrect_rs,gain_percent\n";
  for (const auto& [key, ab] : pairs) {
    const auto& [lang, layer, cp, other] = key;
    const std::string other_name =
        axis == GainAxis::kModality ? std::string(to_string(static_cast<Correctness>(other)))
                                    : std::string(to_string(static_cast<Modality>(other)));
    std::optional<double> gain;
    if (ab.first && ab.second) gain = relative_gain(*ab.first, *ab.second);
    out += csv::join({std::string(to_string(lang)), std::to_string(layer), cp.label(), other_name,
                      opt_num(ab.first), opt_num(ab.second), gain ? num(*gain) : "undefined"});
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// svg

struct Panel {
  Language language;
  Modality modality;
  Correctness correctness;
  auto key() const { return std::make_tuple(language, modality, correctness); }
  std::string title() const {
    return std::string(to_string(language)) + " / " + std::string(to_string(modality)) + " / " +
           std::string(to_string(correctness));
  }
};

std::vector<Panel> panels_of(const ScoreTable& t) {
  std::map<std::tuple<Language, Modality, Correctness>, Panel> m;
  for (const auto& r : t.records) {
    Panel p{r.language, r.modality, r.correctness};
    m.emplace(p.key(), p);
  }
  std::vector<Panel> out;
  for (const auto& [k, p] : m) out.push_back(p);
  return out;
}

// Five-stop perceptual ramp (viridis endpoints and midpoints).
std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> kStops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
  const double f = t - static_cast<double>(i);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::pair<double, double> rs_bounds(const ScoreTable& t) {
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& r : t.records) {
    if (r.status != CellStatus::kOk || !r.rs) continue;
    lo = any ? std::min(lo, *r.rs) : *r.rs;
    hi = any ? std::max(hi, *r.rs) : *r.rs;
    any = true;
  }
  return {lo, hi};
}

const char* kSvgDefs =
    "<defs>\n"
    "  <pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
    "patternTransform=\"rotate(45)\">\n"
    "    <rect width=\"6\" height=\"6\" fill=\"#ffffff\"/>\n"
    "    <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#d62728\" stroke-width=\"2\"/>\n"
    "  </pattern>\n"
    "</defs>\n";

std::string render_heatmap(const ScoreTable& t) {
  std::set<int> layer_set;
  std::set<Checkpoint> cp_set;
  for (const auto& r : t.records) {
    layer_set.insert(r.layer);
    cp_set.insert(r.checkpoint);
  }
  const std::vector<int> layers(layer_set.begin(), layer_set.end());
  const std::vector<Checkpoint> cps(cp_set.begin(), cp_set.end());
  const auto panels = panels_of(t);
  const auto [lo, hi] = rs_bounds(t);
  const double span = hi > lo ? hi - lo : 1.0;

  constexpr int kCell = 28, kLeft = 44, kTop = 34, kGap = 36, kCols = 3;
  const int pw = kLeft + kCell * static_cast<int>(layers.size()) + kGap;
  const int ph = kTop + kCell * static_cast<int>(cps.size()) + 40;
  const int ncols = std::min<int>(kCols, static_cast<int>(panels.size()));
  const int nrows = (static_cast<int>(panels.size()) + kCols - 1) / kCols;
  const int width = std::max(ncols * pw, 360);
  const int legend_y = nrows * ph + 10;
  const int height = legend_y + 70;

  std::map<std::tuple<Language, Modality, Correctness, int, Checkpoint>, const ScoreRecord*> at;
  for (const auto& r : t.records) at[{r.language, r.modality, r.correctness, r.layer, r.checkpoint}] = &r;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n"
    << kSvgDefs;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const int ox = static_cast<int>(p % kCols) * pw;
    const int oy = static_cast<int>(p / kCols) * ph;
    s << "<g class=\"panel\" transform=\"translate(" << ox << "," << oy << ")\">\n"
      << "  <text x=\"" << kLeft << "\" y=\"14\" font-size=\"12\">" << xml_escape(panel.title())
      << "</text>\n";
    for (std::size_t ci = 0; ci < cps.size(); ++ci) {
      const int y = kTop + kCell * static_cast<int>(ci);
      s << "  <text x=\"" << kLeft - 4 << "\" y=\"" << y + kCell / 2 + 4
        << "\" text-anchor=\"end\">" << cps[ci].label() << "</text>\n";
      for (std::size_t li = 0; li < layers.size(); ++li) {
        const int x = kLeft + kCell * static_cast<int>(li);
        auto it = at.find({panel.language, panel.modality, panel.correctness, layers[li], cps[ci]});
        std::string cls, fill, tip;
        if (it == at.end() || it->second->status == CellStatus::kMissingInput) {
          cls = "cell missing-input";
          fill = "url(#hatch)";
          tip = "missing input";
        } else if (it->second->status == CellStatus::kDegenerate || !it->second->rs) {
          cls = "cell degenerate";
          fill = "#9e9e9e";
          tip = "degenerate";
        } else {
          cls = "cell ok";
          fill = ramp((*it->second->rs - lo) / span);
          tip = "rs " + fixed(*it->second->rs, 4);
        }
        s << "  <rect class=\"" << cls << "\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"" << fill << "\" stroke=\"#ffffff\">"
          << "<title>layer " << layers[li] << ", " << cps[ci].label() << ": " << tip
          << "</title></rect>\n";
      }
    }
    const int axis_y = kTop + kCell * static_cast<int>(cps.size()) + 12;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      s << "  <text x=\"" << kLeft + kCell * static_cast<int>(li) + kCell / 2 << "\" y=\"" << axis_y
        << "\" text-anchor=\"middle\">" << layers[li] << "</text>\n";
    }
    s << "  <text x=\"" << kLeft + kCell * static_cast<int>(layers.size()) / 2 << "\" y=\""
      << axis_y + 14 << "\" text-anchor=\"middle\">layer</text>\n"
      << "</g>\n";
  }

  // Legend: shared color scale with its bounds, then the status markers.
  s << "<g class=\"legend\" transform=\"translate(10," << legend_y << ")\">\n";
  for (int k = 0; k < 50; ++k) {
    s << "  <rect x=\"" << k * 3 << "\" y=\"0\" width=\"3\" height=\"12\" fill=\"" << ramp(k / 49.0)
      << "\"/>\n";
  }
  s << "  <text x=\"0\" y=\"26\">rs min " << fixed(lo, 4) << "</text>\n"
    << "  <text x=\"150\" y=\"26\" text-anchor=\"end\">rs max " << fixed(hi, 4) << "</text>\n"
    << "  <rect class=\"legend-missing-input\" x=\"180\" y=\"0\" width=\"12\" height=\"12\" "
       "fill=\"url(#hatch)\"/>\n"
    << "  <text x=\"196\" y=\"10\">missing input</text>\n"
    << "  <rect class=\"legend-degenerate\" x=\"280\" y=\"0\" width=\"12\" height=\"12\" "
       "fill=\"#9e9e9e\"/>\n"
    << "  <text x=\"296\" y=\"10\">degenerate</text>\n"
    << "</g>\n</svg>\n";
  return s.str();
}

std::string render_linechart(const ScoreTable& t, const std::vector<int>& wanted_layers) {
  static constexpr std::array<const char*, 8> kColors{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                      "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::set<Checkpoint> cp_set;
  std::set<int> present_layers;
  for (const auto& r : t.records) {
    cp_set.insert(r.checkpoint);
    present_layers.insert(r.layer);
  }
  std::vector<int> layers;
  for (int l : wanted_layers) {
    if (present_layers.count(l)) layers.push_back(l);
  }
  const std::vector<Checkpoint> cps(cp_set.begin(), cp_set.end());
  const auto panels = panels_of(t);

  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& r : t.records) {
    if (r.status != CellStatus::kOk || !r.rs) continue;
    if (std::find(layers.begin(), layers.end(), r.layer) == layers.end()) continue;
    lo = any ? std::min(lo, *r.rs) : *r.rs;
    hi = any ? std::max(hi, *r.rs) : *r.rs;
    any = true;
  }
  const double span = hi > lo ? hi - lo : 1.0;

  constexpr int kW = 220, kH = 150, kLeft = 46, kTop = 30, kCols = 3;
  const int pw = kLeft + kW + 24;
  const int ph = kTop + kH + 40;
  const int ncols = std::min<int>(kCols, static_cast<int>(panels.size()));
  const int nrows = (static_cast<int>(panels.size()) + kCols - 1) / kCols;
  const int width = std::max(ncols * pw, 360);
  const int legend_y = nrows * ph + 10;

  auto px = [&](std::size_t ci) {
    return cps.size() < 2 ? kLeft + kW / 2
                          : kLeft + static_cast<int>(ci) * kW / static_cast<int>(cps.size() - 1);
  };
  auto py = [&](double rs) { return kTop + kH - (rs - lo) / span * kH; };

  std::map<std::tuple<Language, Modality, Correctness, int, Checkpoint>, const ScoreRecord*> at;
  for (const auto& r : t.records) at[{r.language, r.modality, r.correctness, r.layer, r.checkpoint}] = &r;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << legend_y + 40 << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const int ox = static_cast<int>(p % kCols) * pw;
    const int oy = static_cast<int>(p / kCols) * ph;
    s << "<g class=\"panel\" transform=\"translate(" << ox << "," << oy << ")\">\n"
      << "  <text x=\"" << kLeft << "\" y=\"14\" font-size=\"12\">" << xml_escape(panel.title())
      << "</text>\n"
      << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"none\" stroke=\"#444444\"/>\n"
      << "  <text x=\"" << kLeft - 4 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">"
      << fixed(hi, 3) << "</text>\n"
      << "  <text x=\"" << kLeft - 4 << "\" y=\"" << kTop + kH << "\" text-anchor=\"end\">"
      << fixed(lo, 3) << "</text>\n";
    for (std::size_t ci = 0; ci < cps.size(); ++ci) {
      s << "  <text x=\"" << px(ci) << "\" y=\"" << kTop + kH + 14 << "\" text-anchor=\"middle\">"
        << cps[ci].label() << "</text>\n";
    }
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const char* color = kColors[li % kColors.size()];
      // Missing points split the trajectory into separate segments.
      std::vector<std::vector<std::pair<int, double>>> segments(1);
      for (std::size_t ci = 0; ci < cps.size(); ++ci) {
        auto it = at.find({panel.language, panel.modality, panel.correctness, layers[li], cps[ci]});
        if (it != at.end() && it->second->status == CellStatus::kOk && it->second->rs) {
          segments.back().emplace_back(px(ci), py(*it->second->rs));
        } else if (!segments.back().empty()) {
          segments.emplace_back();
        }
      }
      for (const auto& seg : segments) {
        if (seg.empty()) continue;
        s << "  <polyline class=\"series layer-" << layers[li] << "\" fill=\"none\" stroke=\""
          << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < seg.size(); ++k) {
          s << (k ? " " : "") << seg[k].first << "," << fixed(seg[k].second, 2);
        }
        s << "\"/>\n";
        for (const auto& [x, y] : seg) {
          s << "  <circle cx=\"" << x << "\" cy=\"" << fixed(y, 2) << "\" r=\"2.5\" fill=\"" << color
            << "\"/>\n";
        }
      }
    }
    s << "</g>\n";
  }
  s << "<g class=\"legend\" transform=\"translate(10," << legend_y << ")\">\n";
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const int x = static_cast<int>(li) * 80;
    s << "  <line x1=\"" << x << "\" y1=\"6\" x2=\"" << x + 18 << "\" y2=\"6\" stroke=\""
      << kColors[li % kColors.size()] << "\" stroke-width=\"2\"/>\n"
      << "  <text x=\"" << x + 22 << "\" y=\"10\">layer " << layers[li] << "</text>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "' in score table", 0);
  }
}

}  // namespace

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  if (s == "heatmap-svg") return ReportFormat::kHeatmapSvg;
  if (s == "linechart-svg") return ReportFormat::kLinechartSvg;
  if (s == "gain-csv") return ReportFormat::kGainCsv;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

std::string render_report(const ScoreTable& table, ReportFormat format,
                          const ReportOptions& options) {
  if (table.records.empty()) throw ValidationError("cannot render a report for an empty table");
  switch (format) {
    case ReportFormat::kCsv: return render_csv(table);
    case ReportFormat::kJson: return render_json(table);
    case ReportFormat::kHeatmapSvg: return render_heatmap(table);
    case ReportFormat::kLinechartSvg: return render_linechart(table, options.line_layers);
    case ReportFormat::kGainCsv: return render_gain_csv(table, options.gain_axis);
  }
  return {};
}

void emit_report(const ScoreTable& table, ReportFormat format, const std::filesystem::path& out,
                 const ReportOptions& options) {
  detail::spit(out.string(), render_report(table, format, options));
}

ScoreTable parse_score_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || csv::join(rows.front()) != kScoreCsvHeader) {
    throw FormatError("score table header must be '" + std::string(kScoreCsvHeader) + "'", 0);
  }
  ScoreTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 11) {
      throw FormatError("score table row " + std::to_string(i + 1) + " has " +
                            std::to_string(f.size()) + " fields, expected 11",
                        0);
    }
    ScoreRecord r;
    r.language = parse_language(f[0]);
    r.layer = std::stoi(f[1]);
    r.checkpoint = Checkpoint::parse(f[2]);
    r.modality = parse_modality(f[3]);
    r.correctness = parse_correctness(f[4]);
    r.rs = parse_opt(f[5]);
    r.p_analytic = parse_opt(f[6]);
    r.p_permutation = parse_opt(f[7]);
    r.n_conditions = std::stoull(f[8]);
    r.status = parse_cell_status(f[9]);
    if (t.config_fingerprint.empty()) {
      t.config_fingerprint = f[10];
    } else if (t.config_fingerprint != f[10]) {
      throw FormatError("score table mixes config fingerprints", 0);
    }
    t.records.push_back(r);
  }
  return t;
}

ScoreTable parse_score_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("score table is not valid JSON: ") + e.what(), e.byte);
  }
  auto opt = [](const nlohmann::json& v) -> std::optional<double> {
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  ScoreTable t;
  try {
    t.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    if (j.contains("metric")) t.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("max_conditions") && !j["max_conditions"].is_null()) {
      t.max_conditions = j["max_conditions"].get<std::size_t>();
    }
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
    for (const auto& o : j.at("records")) {
      ScoreRecord r;
      r.language = parse_language(o.at("language").get<std::string>());
      r.layer = o.at("layer").get<int>();
      r.checkpoint = Checkpoint::parse(o.at("checkpoint").get<std::string>());
      r.modality = parse_modality(o.at("modality").get<std::string>());
      r.correctness = parse_correctness(o.at("correctness").get<std::string>());
      r.rs = opt(o.at("rs"));
      r.p_analytic = opt(o.at("p_analytic"));
      r.p_permutation = opt(o.at("p_permutation"));
      r.n_conditions = o.at("n_conditions").get<std::uint64_t>();
      r.status = parse_cell_status(o.at("status").get<std::string>());
      t.records.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("score table: ") + e.what());
  }
  return t;
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  const auto text = detail::slurp(path.string());
  if (path.extension() == ".json") return parse_score_json(text);
  return parse_score_csv(text);
}

}  // namespace rsaprobe
