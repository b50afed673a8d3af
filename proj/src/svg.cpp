#include "s2d/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace s2d {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Small viridis-like ramp.
std::string color_for(double t) {
  struct Stop {
    double t;
    int r, g, b;
  };
  static const Stop stops[] = {{0.0, 68, 1, 84},    {0.25, 59, 82, 139}, {0.5, 33, 145, 140},
                               {0.75, 94, 201, 98}, {1.0, 253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  for (size_t i = 1; i < std::size(stops); ++i) {
    if (t <= stops[i].t) {
      double f = (t - stops[i - 1].t) / (stops[i].t - stops[i - 1].t);
      int r = static_cast<int>(stops[i - 1].r + f * (stops[i].r - stops[i - 1].r));
      int g = static_cast<int>(stops[i - 1].g + f * (stops[i].g - stops[i - 1].g));
      int b = static_cast<int>(stops[i - 1].b + f * (stops[i].b - stops[i - 1].b));
      char buf[16];
      std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
      return buf;
    }
  }
  return "#fde725";
}

const char* kSeriesColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct SvgDoc {
  std::ostringstream body;
  int width, height;

  SvgDoc(int w, int h) : width(w), height(h) {
    body << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
         << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    body << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    body << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "start") {
    body << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
         << "</text>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.5) {
    body << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width)
         << "\" points=\"";
    for (auto [x, y] : pts) body << fmt(x) << "," << fmt(y) << " ";
    body << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               double opacity) {
    body << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << fmt(opacity) << "\" points=\"";
    for (auto [x, y] : pts) body << fmt(x) << "," << fmt(y) << " ";
    body << "\"/>\n";
  }
  std::string finish() {
    body << "</svg>\n";
    return body.str();
  }
};

struct Frame {
  double x0, y0, plot_w, plot_h;
};

void render_grid(const CsvTable& t, const std::filesystem::path& out, const SvgStyle& style) {
  int ca = t.column("alpha"), cb = t.column("beta"), cl = t.column("loss");
  int cf = t.column("overflow_flag");
  std::set<double> alpha_set, beta_set;
  for (const auto& row : t.rows) {
    alpha_set.insert(std::stod(row[ca]));
    beta_set.insert(std::stod(row[cb]));
  }
  std::vector<double> alphas(alpha_set.begin(), alpha_set.end());
  std::vector<double> betas(beta_set.begin(), beta_set.end());
  std::map<std::pair<double, double>, std::pair<double, bool>> cells;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& row : t.rows) {
    double loss = std::stod(row[cl]);
    bool over = cf >= 0 && row[cf] == "1";
    cells[{std::stod(row[ca]), std::stod(row[cb])}] = {loss, over};
    if (!over && std::isfinite(loss)) {
      if (first || loss < lo) lo = first ? loss : std::min(lo, loss);
      if (first || loss > hi) hi = first ? loss : std::max(hi, loss);
      first = false;
    }
  }
  SvgDoc doc(style.width, style.height);
  Frame f{60, 40, style.width - 100.0, style.height - 100.0};
  double cw = f.plot_w / alphas.size();
  double ch = f.plot_h / betas.size();
  for (size_t i = 0; i < alphas.size(); ++i)
    for (size_t j = 0; j < betas.size(); ++j) {
      auto it = cells.find({alphas[i], betas[j]});
      if (it == cells.end()) continue;
      auto [loss, over] = it->second;
      std::string fill = over || !std::isfinite(loss)
                             ? "#cccccc"
                             : color_for(hi > lo ? (loss - lo) / (hi - lo) : 0.5);
      doc.rect(f.x0 + i * cw, f.y0 + (betas.size() - 1 - j) * ch, cw, ch, fill);
    }
  doc.text(f.x0, 25, style.title.empty() ? "loss landscape" : style.title, 14);
  // every landscape carries its own scale; cross-figure z comparison is
  // meaningless by protocol
  doc.text(f.x0, f.y0 + f.plot_h + 35, "z range [" + fmt(lo) + ", " + fmt(hi) + "]", 12);
  doc.text(f.x0 + f.plot_w / 2, f.y0 + f.plot_h + 18, "alpha", 12, "middle");
  doc.text(18, f.y0 + f.plot_h / 2, "beta", 12, "middle");
  doc.text(f.x0, f.y0 + f.plot_h + 18, fmt(alphas.front()), 10);
  doc.text(f.x0 + f.plot_w, f.y0 + f.plot_h + 18, fmt(alphas.back()), 10, "end");
  atomic_write(out, doc.finish());
}

void render_heatmap(const CsvTable& t, const std::filesystem::path& out, const SvgStyle& style) {
  int cx = t.column("x"), cy = t.column("y"), cv = t.column("visits");
  int w = 0, h = 0;
  long hi = 0;
  std::map<std::pair<int, int>, long> cells;
  for (const auto& row : t.rows) {
    int x = std::stoi(row[cx]), y = std::stoi(row[cy]);
    long v = std::stol(row[cv]);
    cells[{x, y}] = v;
    w = std::max(w, x + 1);
    h = std::max(h, y + 1);
    hi = std::max(hi, v);
  }
  SvgDoc doc(style.width, style.height);
  Frame f{60, 40, style.width - 100.0, style.height - 100.0};
  double cw = f.plot_w / w, ch = f.plot_h / h;
  for (const auto& [pos, v] : cells) {
    double tnorm = hi > 0 ? static_cast<double>(v) / static_cast<double>(hi) : 0.0;
    doc.rect(f.x0 + pos.first * cw, f.y0 + pos.second * ch, cw - 1, ch - 1, color_for(tnorm));
  }
  // start marker (top-left cell) and peak-visit annotation
  doc.text(f.x0 + cw * 0.5, f.y0 + ch * 0.6, "S", 12, "middle");
  doc.text(f.x0, 25, style.title.empty() ? "visit heatmap" : style.title, 14);
  doc.text(f.x0, f.y0 + f.plot_h + 35, "max visits " + std::to_string(hi), 12);
  atomic_write(out, doc.finish());
}

void render_curves(const std::vector<std::string>& series_names,
                   const std::map<std::string, std::vector<std::pair<double, double>>>& series,
                   bool band, const std::filesystem::path& out, const SvgStyle& style) {
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  bool first = true;
  for (const auto& name : series_names)
    for (auto [x, y] : series.at(name)) {
      if (first) {
        xlo = xhi = x;
        ylo = yhi = y;
        first = false;
      }
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  if (xhi == xlo) xhi = xlo + 1;
  if (yhi == ylo) yhi = ylo + 1;

  SvgDoc doc(style.width, style.height);
  Frame f{60, 40, style.width - 100.0, style.height - 100.0};
  auto sx = [&](double x) { return f.x0 + (x - xlo) / (xhi - xlo) * f.plot_w; };
  auto sy = [&](double y) { return f.y0 + f.plot_h - (y - ylo) / (yhi - ylo) * f.plot_h; };

  if (band && series_names.size() > 1) {
    // mean +- one std across series at matching x positions
    std::map<double, std::vector<double>> by_x;
    for (const auto& name : series_names)
      for (auto [x, y] : series.at(name)) by_x[x].push_back(y);
    std::vector<std::pair<double, double>> mean_pts, upper, lower;
    for (const auto& [x, ys] : by_x) {
      double m = 0;
      for (double y : ys) m += y;
      m /= ys.size();
      double var = 0;
      for (double y : ys) var += (y - m) * (y - m);
      double sd = ys.size() > 1 ? std::sqrt(var / (ys.size() - 1)) : 0.0;
      mean_pts.push_back({sx(x), sy(m)});
      upper.push_back({sx(x), sy(m + sd)});
      lower.push_back({sx(x), sy(m - sd)});
    }
    std::vector<std::pair<double, double>> poly(upper);
    poly.insert(poly.end(), lower.rbegin(), lower.rend());
    doc.polygon(poly, kSeriesColors[0], 0.25);
    doc.polyline(mean_pts, kSeriesColors[0], 2.0);
  } else {
    int ci = 0;
    for (const auto& name : series_names) {
      std::vector<std::pair<double, double>> pts;
      for (auto [x, y] : series.at(name)) pts.push_back({sx(x), sy(y)});
      const char* color = kSeriesColors[ci % std::size(kSeriesColors)];
      doc.polyline(pts, color);
      doc.text(f.x0 + f.plot_w + 6, f.y0 + 14.0 * (ci + 1), name, 11);
      doc.body << "<rect x=\"" << fmt(f.x0 + f.plot_w - 10) << "\" y=\""
               << fmt(f.y0 + 14.0 * (ci + 1) - 8) << "\" width=\"12\" height=\"4\" fill=\""
               << color << "\"/>\n";
      ++ci;
    }
  }
  doc.text(f.x0, 25, style.title, 14);
  doc.text(f.x0, f.y0 + f.plot_h + 18, fmt(xlo), 10);
  doc.text(f.x0 + f.plot_w, f.y0 + f.plot_h + 18, fmt(xhi), 10, "end");
  doc.text(f.x0 - 5, f.y0 + f.plot_h, fmt(ylo), 10, "end");
  doc.text(f.x0 - 5, f.y0 + 10, fmt(yhi), 10, "end");
  atomic_write(out, doc.finish());
}

}  // namespace

void render_svg(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
                const SvgStyle& style) {
  CsvTable t = read_csv(csv_path);
  if (t.header.empty() || t.rows.empty())
    throw std::runtime_error("render_svg: empty csv: " + csv_path.string());

  SvgStyle st = style;
  if (st.title.empty()) st.title = csv_path.filename().string();

  if (t.column("alpha") >= 0 && t.column("beta") >= 0 && t.column("loss") >= 0) {
    render_grid(t, svg_path, st);
    return;
  }
  if (t.column("x") >= 0 && t.column("y") >= 0 && t.column("visits") >= 0) {
    render_heatmap(t, svg_path, st);
    return;
  }
  if (t.column("series") >= 0 && t.column("x") >= 0 && t.column("y") >= 0) {
    int cs = t.column("series"), cx = t.column("x"), cy = t.column("y");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::vector<std::string> names;
    for (const auto& row : t.rows) {
      if (!series.count(row[cs])) names.push_back(row[cs]);
      series[row[cs]].push_back({std::stod(row[cx]), std::stod(row[cy])});
    }
    SvgStyle st2 = st;
    st2.band = style.band || names.size() > 1;
    render_curves(names, series, st2.band, svg_path, st2);
    return;
  }
  if (t.column("checkpoint_step") >= 0 && t.column("action_id") >= 0 &&
      t.column("frequency") >= 0) {
    int cs = t.column("action_id"), cx = t.column("checkpoint_step"), cy = t.column("frequency");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::vector<std::string> names;
    for (const auto& row : t.rows) {
      std::string name = "action " + row[cs];
      if (!series.count(name)) names.push_back(name);
      series[name].push_back({std::stod(row[cx]), std::stod(row[cy])});
    }
    render_curves(names, series, false, svg_path, st);
    return;
  }
  if (t.column("checkpoint_step") >= 0 && t.column("mean_pairwise_distance") >= 0) {
    int cx = t.column("checkpoint_step"), cy = t.column("mean_pairwise_distance");
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& row : t.rows)
      series["mean distance"].push_back({std::stod(row[cx]), std::stod(row[cy])});
    render_curves({"mean distance"}, series, false, svg_path, st);
    return;
  }
  throw std::runtime_error("render_svg: unrecognized csv schema in " + csv_path.string());
}

}  // namespace s2d
