#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoval/pipeline.hpp"

namespace geoval {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

// Fixed-size canvas with a rectangular plotting area and linear axes.
class Chart {
 public:
  static constexpr double W = 640, H = 480, L = 70, R = 20, T = 40, B = 80;

  Chart(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void set_range(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    x0_ = x0;
    x1_ = x1;
    y0_ = y0;
    y1_ = y1;
  }

  double sx(double x) const { return L + (x - x0_) / (x1_ - x0_) * (W - L - R); }
  double sy(double y) const { return H - B - (y - y0_) / (y1_ - y0_) * (H - T - B); }

  void add(const std::string& element) { body_ << element << '\n'; }

  void circle(double x, double y, const char* color) {
    add("<circle cx=\"" + px(sx(x)) + "\" cy=\"" + px(sy(y)) + "\" r=\"2.5\" fill=\"" + color +
        "\" fill-opacity=\"0.6\"/>");
  }

  void line(double xa, double ya, double xb, double yb, const std::string& style) {
    add("<line x1=\"" + px(sx(xa)) + "\" y1=\"" + px(sy(ya)) + "\" x2=\"" + px(sx(xb)) + "\" y2=\"" + px(sy(yb)) +
        "\" " + style + "/>");
  }

  void text(double x_px, double y_px, const std::string& s, const char* anchor = "middle", double rotate = 0.0) {
    std::string el = "<text x=\"" + px(x_px) + "\" y=\"" + px(y_px) + "\" font-size=\"12\" text-anchor=\"" + anchor +
                     "\"";
    if (rotate != 0.0) el += " transform=\"rotate(" + px(rotate) + " " + px(x_px) + " " + px(y_px) + ")\"";
    add(el + ">" + xml_escape(s) + "</text>");
  }

  void legend(const std::vector<std::pair<std::string, const char*>>& items) {
    double y = T + 10;
    for (const auto& [label, color] : items) {
      add("<rect x=\"" + px(W - R - 120) + "\" y=\"" + px(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" + color +
          "\"/>");
      text(W - R - 105, y, label, "start");
      y += 16;
    }
  }

  std::string render(bool numeric_x) const {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << px(W / 2) << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" << xml_escape(title_)
       << "</text>\n";
    // Axes and ticks.
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double yv = y0_ + (y1_ - y0_) * i / 5.0;
      os << "<text x=\"" << L - 6 << "\" y=\"" << px(sy(yv) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
         << fmt(yv) << "</text>\n";
      if (numeric_x) {
        const double xv = x0_ + (x1_ - x0_) * i / 5.0;
        os << "<text x=\"" << px(sx(xv)) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << fmt(xv) << "</text>\n";
      }
    }
    os << "<text x=\"" << px((L + W - R) / 2) << "\" y=\"" << H - 12 << "\" font-size=\"13\" text-anchor=\"middle\">"
       << xml_escape(xlabel_) << "</text>\n";
    os << "<text x=\"16\" y=\"" << px((T + H - B) / 2) << "\" font-size=\"13\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 16 " << px((T + H - B) / 2) << ")\">" << xml_escape(ylabel_) << "</text>\n";
    os << body_.str();
    os << "</svg>\n";
    return os.str();
  }

 private:
  std::string title_, xlabel_, ylabel_;
  double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
  std::ostringstream body_;
};

void write_text(const std::filesystem::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  out << s;
}

bool obs_pred_plot(const Json& t, const std::string& target, const std::filesystem::path& file) {
  if (!t.contains("predictions") || !t["predictions"].is_array() || t["predictions"].empty()) return false;
  struct P {
    double o, p;
    bool test;
  };
  std::vector<P> pts;
  double lo = kInf;
  double hi = -kInf;
  for (const auto& r : t["predictions"]) {
    if (!r["observed"].is_number() || !r["predicted"].is_number()) continue;
    const double o = std::log1p(std::max(0.0, r["observed"].get<double>()));
    const double p = std::log1p(std::max(0.0, r["predicted"].get<double>()));
    pts.push_back({o, p, r.value("set", "") == "test"});
    lo = std::min({lo, o, p});
    hi = std::max({hi, o, p});
  }
  if (pts.empty()) return false;
  Chart c(target + ": observed vs predicted (log1p scale)", "observed, log1p", "predicted, log1p");
  const double pad = 0.05 * (hi - lo + 1e-12);
  c.set_range(lo - pad, hi + pad, lo - pad, hi + pad);
  for (const auto& q : pts) c.circle(q.o, q.p, q.test ? kPalette[1] : kPalette[0]);
  c.line(lo - pad, lo - pad, hi + pad, hi + pad, "stroke=\"black\" stroke-dasharray=\"6,4\"");
  c.legend({{"out-of-fold", kPalette[0]}, {"test", kPalette[1]}, {"1:1 line", "black"}});
  write_text(file, c.render(true));
  return true;
}

bool stability_plot(const Json& t, const std::string& target, const std::filesystem::path& file) {
  if (!t.contains("stability") || !t["stability"].contains("ranked") || t["stability"]["ranked"].empty()) return false;
  const auto& ranked = t["stability"]["ranked"];
  const double thr = t["stability"].value("threshold", 0.6);
  Chart c(target + ": stability selection frequency", "feature rank", "selection frequency (pi)");
  c.set_range(1.0, std::max<double>(2.0, static_cast<double>(ranked.size())), 0.0, 1.0);
  std::string path = "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[0]) + "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const double pi = ranked[i]["pi"].get<double>();
    path += px(c.sx(static_cast<double>(i + 1))) + "," + px(c.sy(pi)) + " ";
  }
  c.add(path + "\"/>");
  c.line(1.0, thr, std::max<double>(2.0, static_cast<double>(ranked.size())), thr,
         "stroke=\"" + std::string(kPalette[1]) + "\" stroke-dasharray=\"5,3\"");
  c.legend({{"pi by rank", kPalette[0]}, {"threshold " + fmt(thr), kPalette[1]}});
  write_text(file, c.render(true));
  return true;
}

// Grouped bars: one group per label, one bar per scope.
bool bar_plot(const Json& t, const std::string& target, const char* section, const char* metric,
              const std::string& title, const std::string& ylabel, const std::filesystem::path& file) {
  if (!t.contains("metrics")) return false;
  std::vector<std::string> scopes;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, std::string>, double> values;
  for (const char* scope : {"oof", "test"}) {
    if (!t["metrics"].contains(scope) || !t["metrics"][scope].contains(section)) continue;
    const auto& rows = t["metrics"][scope][section];
    if (rows.empty()) continue;
    scopes.emplace_back(scope);
    for (const auto& r : rows) {
      const auto label = r.value("label", "");
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
      if (r[metric].is_number()) values[{scope, label}] = r[metric].get<double>();
    }
  }
  if (labels.empty()) return false;
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& [k, v] : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Chart c(target + ": " + title, section == std::string("by_depth") ? "depth class (cm)" : "stratum", ylabel);
  c.set_range(0.0, static_cast<double>(labels.size()), lo, hi > lo ? hi * 1.1 : lo + 1.0);
  const double group_w = 1.0 / 1.25;
  const double bar_w = group_w / static_cast<double>(scopes.size());
  for (std::size_t g = 0; g < labels.size(); ++g) {
    for (std::size_t s = 0; s < scopes.size(); ++s) {
      auto it = values.find({scopes[s], labels[g]});
      if (it == values.end()) continue;
      const double x0 = static_cast<double>(g) + 0.1 + bar_w * static_cast<double>(s);
      const double top = c.sy(std::max(0.0, it->second));
      const double bottom = c.sy(std::min(0.0, it->second));
      c.add("<rect x=\"" + px(c.sx(x0)) + "\" y=\"" + px(top) + "\" width=\"" + px(c.sx(x0 + bar_w) - c.sx(x0)) +
            "\" height=\"" + px(bottom - top) + "\" fill=\"" + kPalette[s % 4] + "\"/>");
    }
    c.text(c.sx(static_cast<double>(g) + 0.5), Chart::H - Chart::B + 16, labels[g]);
  }
  std::vector<std::pair<std::string, const char*>> legend;
  for (std::size_t s = 0; s < scopes.size(); ++s)
    legend.emplace_back(scopes[s] == "oof" ? "out-of-fold" : "test", kPalette[s % 4]);
  c.legend(legend);
  write_text(file, c.render(false));
  return true;
}

}  // namespace

PlotResult emit_plots(const Json& report, const std::filesystem::path& dir) {
  PlotResult res;
  if (!report.contains("targets") || !report["targets"].is_array()) {
    res.warnings.push_back("report has no targets section; no plots written");
    return res;
  }
  std::filesystem::create_directories(dir);
  for (const auto& t : report["targets"]) {
    const std::string target = t.value("target", "target");
    const std::string stem = file_token(target);
    auto attempt = [&](bool ok, const std::string& name, const std::string& what) {
      if (ok) {
        res.written.push_back(dir / name);
      } else {
        res.warnings.push_back(target + ": " + what + " section missing or empty; plot skipped");
      }
    };
    auto p = dir / (stem + "_obs_pred.svg");
    attempt(obs_pred_plot(t, target, p), p.filename().string(), "predictions");
    p = dir / (stem + "_stability.svg");
    attempt(stability_plot(t, target, p), p.filename().string(), "stability");
    p = dir / (stem + "_stratum_nrmse.svg");
    attempt(bar_plot(t, target, "by_stratum", "nrmse_minmax", "NRMSE (min-max) by stratum", "NRMSE", p),
            p.filename().string(), "per-stratum metrics");
    p = dir / (stem + "_depth_ccc.svg");
    attempt(bar_plot(t, target, "by_depth", "ccc_log1p", "CCC (log1p) by depth class", "CCC", p),
            p.filename().string(), "per-depth metrics");
  }
  return res;
}

}  // namespace geoval
