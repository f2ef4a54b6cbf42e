#include "vicreg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vicreg {

namespace {

std::string num(double v, const char* f = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Panel {
  double x0, y0, w, h;
  double lo, hi;
  bool log_scale;

  double y_of(double v) const {
    double t;
    if (log_scale) {
      const double lv = std::log10(std::max(v, std::pow(10.0, lo)));
      t = (lv - lo) / (hi - lo);
    } else {
      t = (v - lo) / (hi - lo);
    }
    t = std::clamp(t, 0.0, 1.0);
    return y0 + h * (1.0 - t);
  }
};

std::string polyline(const std::vector<MetricsRow>& rows, const Panel& p, double (*get)(const MetricsRow&),
                     const char* color) {
  const double last_epoch = std::max(1, rows.back().epoch);
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (const auto& r : rows) {
    const double x = p.x0 + p.w * static_cast<double>(r.epoch) / last_epoch;
    os << num(x, "%.2f") << ',' << num(p.y_of(get(r)), "%.2f") << ' ';
  }
  os << "\"/>\n";
  return os.str();
}

}  // namespace

MetricsSummary summarize_metrics(const std::vector<MetricsRow>& rows, double gamma, int tail_epochs) {
  if (rows.empty()) throw std::invalid_argument("summarize_metrics: no rows");
  if (tail_epochs < 1) throw std::invalid_argument("summarize_metrics: tail_epochs must be >= 1");
  MetricsSummary s;
  s.epochs = static_cast<int>(rows.size());
  s.first = rows.front();
  s.last = rows.back();
  s.min_embed_std = s.max_embed_std = rows.front().mean_embed_std;
  int run = 0;
  for (const auto& r : rows) {
    s.min_embed_std = std::min(s.min_embed_std, r.mean_embed_std);
    s.max_embed_std = std::max(s.max_embed_std, r.mean_embed_std);
    run = r.mean_embed_std < 0.01 * gamma ? run + 1 : 0;
    if (run == 5 && !s.collapse_epoch) s.collapse_epoch = r.epoch;
  }
  s.verdict = s.collapse_epoch ? CollapseVerdict::kCollapsed : CollapseVerdict::kStable;
  s.tail_epochs = std::min(tail_epochs, s.epochs);
  s.tail_min_embed_std = rows.back().mean_embed_std;
  for (std::size_t i = rows.size() - static_cast<std::size_t>(s.tail_epochs); i < rows.size(); ++i) {
    s.tail_min_embed_std = std::min(s.tail_min_embed_std, rows[i].mean_embed_std);
  }
  return s;
}

std::string format_summary(const MetricsSummary& s) {
  std::ostringstream os;
  os << "epochs                 " << s.epochs << '\n'
     << "verdict                " << to_string(s.verdict);
  if (s.collapse_epoch) os << " (window completed at epoch " << *s.collapse_epoch << ')';
  os << '\n'
     << "total loss             " << num(s.first.loss.total) << " -> " << num(s.last.loss.total) << '\n'
     << "  invariance           " << num(s.first.loss.inv) << " -> " << num(s.last.loss.inv) << '\n'
     << "  variance (a, b)      " << num(s.last.loss.var_a) << ", " << num(s.last.loss.var_b) << '\n'
     << "  covariance (a, b)    " << num(s.last.loss.cov_a) << ", " << num(s.last.loss.cov_b) << '\n'
     << "mean embedding std     " << num(s.first.mean_embed_std) << " -> " << num(s.last.mean_embed_std)
     << "  [min " << num(s.min_embed_std) << ", max " << num(s.max_embed_std) << "]\n"
     << "  min over last " << s.tail_epochs << (s.tail_epochs < 10 ? "      " : "     ")
     << num(s.tail_min_embed_std) << '\n'
     << "mean representation std " << num(s.first.mean_repr_std) << " -> " << num(s.last.mean_repr_std)
     << '\n'
     << "avg correlation (repr) " << num(s.first.avg_corr_repr) << " -> " << num(s.last.avg_corr_repr)
     << '\n'
     << "final lr               " << num(s.last.lr) << '\n';
  return os.str();
}

std::string render_svg(const std::vector<MetricsRow>& rows, const std::string& title) {
  if (rows.empty()) throw std::invalid_argument("render_svg: no rows");
  const double width = 640;
  const double height = 480;

  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& r : rows) {
    for (double v : {r.mean_repr_std, r.mean_embed_std}) {
      if (!(v > 0.0)) continue;
      const double l = std::log10(v);
      lo = first ? l : std::min(lo, l);
      hi = first ? l : std::max(hi, l);
      first = false;
    }
  }
  lo = std::max(std::floor(lo), -12.0);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1.0;

  const Panel std_panel{60, 40, width - 90, 170, lo, hi, true};
  const Panel corr_panel{60, 270, width - 90, 170, 0.0, 1.0, false};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
       << xml_escape(title) << "</text>\n";
  }
  for (const Panel* p : {&std_panel, &corr_panel}) {
    os << "<rect x=\"" << p->x0 << "\" y=\"" << p->y0 << "\" width=\"" << p->w << "\" height=\"" << p->h
       << "\" fill=\"none\" stroke=\"#888\"/>\n";
  }
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
    const double y = std_panel.y_of(std::pow(10.0, e));
    os << "<text x=\"" << std_panel.x0 - 6 << "\" y=\"" << num(y + 4, "%.2f")
       << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  for (double v : {0.0, 0.5, 1.0}) {
    os << "<text x=\"" << corr_panel.x0 - 6 << "\" y=\"" << num(corr_panel.y_of(v) + 4, "%.2f")
       << "\" text-anchor=\"end\">" << num(v, "%.1f") << "</text>\n";
  }
  os << "<text x=\"" << std_panel.x0 + 4 << "\" y=\"" << std_panel.y0 - 6
     << "\">mean std (log scale): representation (blue), embedding (red)</text>\n"
     << "<text x=\"" << corr_panel.x0 + 4 << "\" y=\"" << corr_panel.y0 - 6
     << "\">average correlation coefficient of representations</text>\n"
     << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">epoch (0 to "
     << rows.back().epoch << ")</text>\n";

  os << polyline(rows, std_panel, [](const MetricsRow& r) { return r.mean_repr_std; }, "#1f4fbf")
     << polyline(rows, std_panel, [](const MetricsRow& r) { return r.mean_embed_std; }, "#c0392b")
     << polyline(rows, corr_panel, [](const MetricsRow& r) { return r.avg_corr_repr; }, "#2e7d32")
     << "</svg>\n";
  return os.str();
}

}  // namespace vicreg
