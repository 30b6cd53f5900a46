#include "flab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace flab {

namespace {

std::string fmt6(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.6f", v);
  return b;
}

std::string fmt_px(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.2f", v);
  return b;
}

std::string fmt_compact(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%g", v);
  return b;
}

struct Agg {
  double mean = 0.0;
  double sd = 0.0;
};

Agg aggregate(const std::vector<double>& values) {
  Agg a;
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return a;
}

struct TickLabel {
  double value;
  std::string text;
};

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> sd;  // empty = no band
};

struct PanelSpec {
  std::string title;
  std::string x_title;
  std::string y_title;
  std::vector<TickLabel> x_ticks;
  std::vector<TickLabel> y_ticks;
  std::vector<Series> series;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int width = 800;
  int height = 600;
};

constexpr const char* kColorM = "#e8821e";        // orange
constexpr const char* kColorF = "#8ec9e8";        // light blue
constexpr const char* kColorOverall = "#3a9e5f";  // green
constexpr const char* kColorNeutral = "#9a9a9a";

// Set the y range of a panel from its series (means +- bands), pad degenerate
// ranges, and put tick labels at the extreme mean values (numbers that also
// live in the companion CSV).
void autoscale_y(PanelSpec& panel) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double mean_lo = lo, mean_hi = -lo;
  for (const Series& s : panel.series)
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      const double sd = s.sd.empty() ? 0.0 : s.sd[i];
      lo = std::min(lo, s.mean[i] - sd);
      hi = std::max(hi, s.mean[i] + sd);
      mean_lo = std::min(mean_lo, s.mean[i]);
      mean_hi = std::max(mean_hi, s.mean[i]);
    }
  if (!(lo < hi)) {  // constant data: center it
    lo -= 1.0;
    hi += 1.0;
  } else {  // a little headroom so bands do not touch the frame
    const double pad = (hi - lo) * 0.06;
    lo -= pad;
    hi += pad;
  }
  panel.y_min = lo;
  panel.y_max = hi;
  panel.y_ticks.push_back({mean_lo, fmt6(mean_lo)});
  if (mean_hi != mean_lo) panel.y_ticks.push_back({mean_hi, fmt6(mean_hi)});
}

void render_panel(std::ostringstream& svg, const PanelSpec& panel, double y_offset) {
  const double left = 96, right = 24, top = 46, bottom = 58;
  const double w = panel.width - left - right;
  const double h = panel.height - top - bottom;
  const double x_span = panel.x_max > panel.x_min ? panel.x_max - panel.x_min : 1.0;
  const double y_span = panel.y_max > panel.y_min ? panel.y_max - panel.y_min : 1.0;
  const auto sx = [&](double v) { return left + (v - panel.x_min) / x_span * w; };
  const auto sy = [&](double v) { return y_offset + top + h - (v - panel.y_min) / y_span * h; };

  svg << "<g>\n";
  svg << "<text x=\"" << fmt_px(left + w / 2) << "\" y=\"" << fmt_px(y_offset + 24)
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"16\">"
      << panel.title << "</text>\n";

  // Bands under the lines.
  for (const Series& s : panel.series) {
    if (s.sd.empty()) continue;
    std::ostringstream d;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      d << (i == 0 ? "M" : "L") << fmt_px(sx(s.x[i])) << ' ' << fmt_px(sy(s.mean[i] + s.sd[i]));
    for (std::size_t i = s.x.size(); i-- > 0;)
      d << "L" << fmt_px(sx(s.x[i])) << ' ' << fmt_px(sy(s.mean[i] - s.sd[i]));
    d << "Z";
    svg << "<path d=\"" << d.str() << "\" fill=\"" << s.color
        << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
  }
  for (const Series& s : panel.series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) svg << ' ';
      svg << fmt_px(sx(s.x[i])) << ',' << fmt_px(sy(s.mean[i]));
    }
    svg << "\"/>\n";
  }

  // Axes and ticks.
  svg << "<line x1=\"" << fmt_px(left) << "\" y1=\"" << fmt_px(y_offset + top) << "\" x2=\""
      << fmt_px(left) << "\" y2=\"" << fmt_px(y_offset + top + h)
      << "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt_px(left) << "\" y1=\"" << fmt_px(y_offset + top + h) << "\" x2=\""
      << fmt_px(left + w) << "\" y2=\"" << fmt_px(y_offset + top + h)
      << "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
  for (const TickLabel& t : panel.x_ticks) {
    const double x = sx(t.value);
    svg << "<line x1=\"" << fmt_px(x) << "\" y1=\"" << fmt_px(y_offset + top + h) << "\" x2=\""
        << fmt_px(x) << "\" y2=\"" << fmt_px(y_offset + top + h + 5)
        << "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt_px(x) << "\" y=\"" << fmt_px(y_offset + top + h + 20)
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << t.text
        << "</text>\n";
  }
  for (const TickLabel& t : panel.y_ticks) {
    const double y = sy(t.value);
    svg << "<line x1=\"" << fmt_px(left - 5) << "\" y1=\"" << fmt_px(y) << "\" x2=\""
        << fmt_px(left) << "\" y2=\"" << fmt_px(y)
        << "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt_px(left - 8) << "\" y=\"" << fmt_px(y + 4)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << t.text
        << "</text>\n";
  }
  svg << "<text x=\"" << fmt_px(left + w / 2) << "\" y=\"" << fmt_px(y_offset + top + h + 40)
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\">"
      << panel.x_title << "</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt_px(y_offset + top + h / 2)
      << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\" transform=\"rotate(-90 18 "
      << fmt_px(y_offset + top + h / 2) << ")\">" << panel.y_title << "</text>\n";

  // Legend, top-left inside the plot area.
  double ly = y_offset + top + 10;
  for (const Series& s : panel.series) {
    svg << "<rect x=\"" << fmt_px(left + 10) << "\" y=\"" << fmt_px(ly) << "\" width=\"12\""
        << " height=\"12\" fill=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << fmt_px(left + 27) << "\" y=\"" << fmt_px(ly + 10)
        << "\" font-family=\"monospace\" font-size=\"12\">" << s.name << "</text>\n";
    ly += 17;
  }
  svg << "</g>\n";
}

std::string render_svg(const std::vector<PanelSpec>& panels) {
  int width = 0, height = 0;
  for (const PanelSpec& p : panels) {
    width = std::max(width, p.width);
    height += p.height;
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";
  double offset = 0;
  for (const PanelSpec& p : panels) {
    render_panel(svg, p, offset);
    offset += p.height;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<TickLabel> integer_ticks(const std::vector<int>& ks) {
  std::vector<TickLabel> ticks;
  if (ks.size() <= 12) {
    for (int k : ks) ticks.push_back({static_cast<double>(k), std::to_string(k)});
    return ticks;
  }
  for (int k : ks)
    if (k == ks.front() || k == ks.back() || k % 5 == 0)
      ticks.push_back({static_cast<double>(k), std::to_string(k)});
  return ticks;
}

// Fold-mean statistics of one cell, per ensemble size.
struct CellStats {
  std::vector<int> ks;
  std::vector<Agg> acc_m, acc_f, acc_overall, gap, relimp_m, relimp_f;
  std::vector<double> signed_gap_mean;  // mean(acc_m) - mean(acc_f), in points
  std::vector<int> folds;
};

CellStats cell_stats(const ResultsTable& table, const CellKey& cell) {
  std::map<int, std::vector<const MetricsRecord*>> by_k;
  for (const MetricsRecord& r : table.records)
    if (r.variant == cell.variant && r.difficulty == cell.difficulty &&
        r.ratio_m == cell.ratio_m)
      by_k[r.k].push_back(&r);
  if (by_k.empty())
    throw std::invalid_argument("cell not present in results: " + cell.variant + " d=" +
                                fmt_compact(cell.difficulty) + " r=" +
                                fmt_compact(cell.ratio_m));
  CellStats st;
  for (auto& [k, recs] : by_k) {
    std::sort(recs.begin(), recs.end(),
              [](const MetricsRecord* a, const MetricsRecord* b) { return a->fold < b->fold; });
    const auto field = [&](auto getter) {
      std::vector<double> v;
      v.reserve(recs.size());
      for (const MetricsRecord* r : recs) v.push_back(getter(*r));
      return aggregate(v);
    };
    st.ks.push_back(k);
    st.acc_m.push_back(field([](const MetricsRecord& r) { return r.acc_m; }));
    st.acc_f.push_back(field([](const MetricsRecord& r) { return r.acc_f; }));
    st.acc_overall.push_back(field([](const MetricsRecord& r) { return r.acc_overall; }));
    st.gap.push_back(field([](const MetricsRecord& r) { return r.gap_abs; }));
    st.relimp_m.push_back(field([](const MetricsRecord& r) { return r.rel_imp_m; }));
    st.relimp_f.push_back(field([](const MetricsRecord& r) { return r.rel_imp_f; }));
    st.signed_gap_mean.push_back((st.acc_m.back().mean - st.acc_f.back().mean) * 100.0);
    st.folds.push_back(static_cast<int>(recs.size()));
  }
  return st;
}

Series make_series(const std::string& name, const std::string& color,
                   const std::vector<int>& ks, const std::vector<Agg>& agg) {
  Series s;
  s.name = name;
  s.color = color;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    s.x.push_back(ks[i]);
    s.mean.push_back(agg[i].mean);
    s.sd.push_back(agg[i].sd);
  }
  return s;
}

PanelSpec curve_panel(const std::string& title, const std::string& y_title,
                      const std::vector<int>& ks, std::vector<Series> series) {
  PanelSpec panel;
  panel.title = title;
  panel.x_title = "ensemble size k";
  panel.y_title = y_title;
  panel.series = std::move(series);
  panel.x_min = ks.front();
  panel.x_max = ks.back();
  if (panel.x_min == panel.x_max) {
    panel.x_min -= 1.0;
    panel.x_max += 1.0;
  }
  panel.x_ticks = integer_ticks(ks);
  autoscale_y(panel);
  return panel;
}

// Linear blend between two RGB colors, for the per-difficulty intensity ramp.
std::string blend_color(int r0, int g0, int b0, int r1, int g1, int b1, double t) {
  const auto mix = [&](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", mix(r0, r1), mix(g0, g1), mix(b0, b1));
  return buf;
}

}  // namespace

CurveFigures emit_curves(const ResultsTable& table, const CellKey& cell) {
  const CellStats st = cell_stats(table, cell);
  CurveFigures out;

  // Companion CSVs first; the charts only display numbers present here.
  {
    std::ostringstream csv;
    csv << "variant,difficulty,ratio_m,k,acc_m_mean,acc_m_std,acc_f_mean,acc_f_std,"
           "acc_overall_mean,acc_overall_std,folds\n";
    for (std::size_t i = 0; i < st.ks.size(); ++i)
      csv << cell.variant << ',' << fmt6(cell.difficulty) << ',' << fmt6(cell.ratio_m) << ','
          << st.ks[i] << ',' << fmt6(st.acc_m[i].mean) << ',' << fmt6(st.acc_m[i].sd) << ','
          << fmt6(st.acc_f[i].mean) << ',' << fmt6(st.acc_f[i].sd) << ','
          << fmt6(st.acc_overall[i].mean) << ',' << fmt6(st.acc_overall[i].sd) << ','
          << st.folds[i] << '\n';
    out.acc_csv = csv.str();
  }
  {
    std::ostringstream csv;
    csv << "variant,difficulty,ratio_m,k,gap_mean,gap_std,benefited,folds\n";
    for (std::size_t i = 0; i < st.ks.size(); ++i) {
      const double sg = st.signed_gap_mean[i];
      const char* who = sg > 0.0 ? "M" : (sg < 0.0 ? "F" : "none");
      csv << cell.variant << ',' << fmt6(cell.difficulty) << ',' << fmt6(cell.ratio_m) << ','
          << st.ks[i] << ',' << fmt6(st.gap[i].mean) << ',' << fmt6(st.gap[i].sd) << ',' << who
          << ',' << st.folds[i] << '\n';
    }
    out.gap_csv = csv.str();
  }
  {
    std::ostringstream csv;
    csv << "variant,difficulty,ratio_m,k,rel_imp_m_mean,rel_imp_m_std,rel_imp_f_mean,"
           "rel_imp_f_std,folds\n";
    for (std::size_t i = 0; i < st.ks.size(); ++i)
      csv << cell.variant << ',' << fmt6(cell.difficulty) << ',' << fmt6(cell.ratio_m) << ','
          << st.ks[i] << ',' << fmt6(st.relimp_m[i].mean) << ',' << fmt6(st.relimp_m[i].sd)
          << ',' << fmt6(st.relimp_f[i].mean) << ',' << fmt6(st.relimp_f[i].sd) << ','
          << st.folds[i] << '\n';
    out.relimp_csv = csv.str();
  }

  out.acc_svg = render_svg({curve_panel(
      "accuracy vs ensemble size", "accuracy", st.ks,
      {make_series("group M", kColorM, st.ks, st.acc_m),
       make_series("group F", kColorF, st.ks, st.acc_f),
       make_series("overall", kColorOverall, st.ks, st.acc_overall)})});

  double signed_sum = 0.0;
  for (double sg : st.signed_gap_mean) signed_sum += sg;
  const char* gap_color =
      signed_sum > 0.0 ? kColorM : (signed_sum < 0.0 ? kColorF : kColorNeutral);
  const char* gap_name = signed_sum > 0.0 ? "gap (M ahead)"
                                          : (signed_sum < 0.0 ? "gap (F ahead)" : "gap (even)");
  out.gap_svg = render_svg({curve_panel("per-group accuracy gap vs ensemble size",
                                        "gap (accuracy points)", st.ks,
                                        {make_series(gap_name, gap_color, st.ks, st.gap)})});

  out.relimp_svg = render_svg({curve_panel(
      "relative improvement vs ensemble size", "relative improvement (%)", st.ks,
      {make_series("group M", kColorM, st.ks, st.relimp_m),
       make_series("group F", kColorF, st.ks, st.relimp_f)})});
  return out;
}

RatioAnalysis emit_ratio_analysis(const ResultsTable& table,
                                  std::span<const double> difficulty_grid, int k) {
  if (difficulty_grid.empty())
    throw std::invalid_argument("ratio analysis needs a difficulty grid");

  std::set<double> difficulty_set(difficulty_grid.begin(), difficulty_grid.end());
  std::set<std::string> variants;
  std::set<double> ratio_set;
  // (difficulty, ratio) -> records at the requested k
  std::map<std::pair<double, double>, std::vector<const MetricsRecord*>> cells;
  for (const MetricsRecord& r : table.records) {
    if (r.k != k || !difficulty_set.count(r.difficulty)) continue;
    variants.insert(r.variant);
    ratio_set.insert(r.ratio_m);
    cells[{r.difficulty, r.ratio_m}].push_back(&r);
  }
  if (variants.empty())
    throw std::invalid_argument("no records match the requested difficulties and k");
  if (variants.size() > 1)
    throw std::invalid_argument("ratio analysis needs a single-variant table");
  if (ratio_set.size() < 2)
    throw std::invalid_argument("cannot locate an optimal ratio with fewer than two ratios");

  std::string missing;
  for (double d : difficulty_set)
    for (double r : ratio_set)
      if (!cells.count({d, r}))
        missing += (missing.empty() ? "" : ", ") + ("d=" + fmt_compact(d) + " r=" + fmt_compact(r));
  if (!missing.empty())
    throw std::invalid_argument("incomplete ratio grid; missing cells: " + missing);

  RatioAnalysis out;
  const std::vector<double> ratios(ratio_set.begin(), ratio_set.end());
  const std::vector<double> difficulties(difficulty_set.begin(), difficulty_set.end());

  // Fold-mean table and CSV.
  std::map<std::pair<double, double>, Agg> acc_agg, gap_agg;
  std::ostringstream csv;
  csv << "difficulty,ratio_m,k,acc_overall_mean,acc_overall_std,gap_mean,gap_std,folds\n";
  for (double d : difficulties)
    for (double r : ratios) {
      auto recs = cells.at({d, r});
      std::sort(recs.begin(), recs.end(), [](const MetricsRecord* a, const MetricsRecord* b) {
        return a->fold < b->fold;
      });
      std::vector<double> acc, gp;
      for (const MetricsRecord* rec : recs) {
        acc.push_back(rec->acc_overall);
        gp.push_back(rec->gap_abs);
      }
      acc_agg[{d, r}] = aggregate(acc);
      gap_agg[{d, r}] = aggregate(gp);
      csv << fmt6(d) << ',' << fmt6(r) << ',' << k << ',' << fmt6(acc_agg[{d, r}].mean) << ','
          << fmt6(acc_agg[{d, r}].sd) << ',' << fmt6(gap_agg[{d, r}].mean) << ','
          << fmt6(gap_agg[{d, r}].sd) << ',' << recs.size() << '\n';
    }
  out.csv = csv.str();

  // Ideal-ratio table via the metrics module, one row per difficulty.
  std::ostringstream ideal;
  ideal << "difficulty,ratio_max_overall,ratio_min_gap,coincide\n";
  for (double d : difficulties) {
    std::vector<MetricsRecord> recs;
    for (double r : ratios)
      for (const MetricsRecord* rec : cells.at({d, r})) recs.push_back(*rec);
    const OptimalRatio opt = optimal_ratio(recs);
    ideal << fmt6(d) << ',' << fmt6(opt.ratio_max_overall) << ',' << fmt6(opt.ratio_min_gap)
          << ',' << (opt.coincide ? "true" : "false") << '\n';
  }
  out.ideal_csv = ideal.str();

  // Two stacked panels: overall accuracy on top, gap below, one line per
  // difficulty with darker shades for harder settings.
  const auto ramp_series = [&](bool use_gap) {
    std::vector<Series> list;
    const double n = std::max<std::size_t>(difficulties.size() - 1, 1);
    for (std::size_t i = 0; i < difficulties.size(); ++i) {
      const double d = difficulties[i];
      Series s;
      s.name = "d=" + fmt6(d);
      s.color = use_gap ? blend_color(0xf2, 0xc8, 0x9b, 0x8c, 0x3f, 0x00, i / n)
                        : blend_color(0xc0, 0xd8, 0xf0, 0x0b, 0x3d, 0x7a, i / n);
      for (double r : ratios) {
        const Agg& a = use_gap ? gap_agg[{d, r}] : acc_agg[{d, r}];
        s.x.push_back(r);
        s.mean.push_back(a.mean);
        s.sd.push_back(a.sd);
      }
      list.push_back(std::move(s));
    }
    return list;
  };

  const auto ratio_ticks = [&]() {
    std::vector<TickLabel> ticks;
    const std::size_t step = ratios.size() > 6 ? 2 : 1;
    for (std::size_t i = 0; i < ratios.size(); i += step)
      ticks.push_back({ratios[i], fmt6(ratios[i])});
    return ticks;
  };

  PanelSpec top;
  top.title = "overall accuracy vs training ratio";
  top.x_title = "ratio of group M in training data";
  top.y_title = "overall accuracy";
  top.series = ramp_series(false);
  top.x_min = ratios.front();
  top.x_max = ratios.back();
  top.x_ticks = ratio_ticks();
  top.height = 300;
  autoscale_y(top);

  PanelSpec bottom = top;
  bottom.title = "accuracy gap vs training ratio";
  bottom.y_title = "gap (accuracy points)";
  bottom.series = ramp_series(true);
  bottom.y_ticks.clear();
  autoscale_y(bottom);

  out.svg = render_svg({top, bottom});
  return out;
}

namespace {

std::string cell_file_base(const CellKey& cell) {
  return "curves_" + cell.variant + "_d" + fmt_compact(cell.difficulty) + "_r" +
         fmt_compact(cell.ratio_m);
}

}  // namespace

ReportBundle build_report(const ResultsTable& table) {
  if (table.records.empty()) throw std::invalid_argument("results table is empty");

  struct KeyLess {
    bool operator()(const CellKey& a, const CellKey& b) const {
      return std::tie(a.variant, a.difficulty, a.ratio_m) <
             std::tie(b.variant, b.difficulty, b.ratio_m);
    }
  };
  std::set<CellKey, KeyLess> cells;
  std::map<std::string, std::set<double>> variant_difficulties;
  std::map<std::string, std::set<double>> variant_ratios;
  std::map<std::string, int> variant_max_k;
  for (const MetricsRecord& r : table.records) {
    cells.insert({r.variant, r.difficulty, r.ratio_m});
    variant_difficulties[r.variant].insert(r.difficulty);
    variant_ratios[r.variant].insert(r.ratio_m);
    int& mk = variant_max_k[r.variant];
    mk = std::max(mk, r.k);
  }

  ReportBundle bundle;
  std::ostringstream md;
  md << "# Results report\n\n";
  if (!table.manifest.config_digest.empty())
    md << "- config digest: `" << table.manifest.config_digest << "`\n";
  if (!table.manifest.platform.empty())
    md << "- platform: " << table.manifest.platform << " (version " << table.manifest.version
       << ")\n";
  if (!table.manifest.started.empty())
    md << "- run: " << table.manifest.started << " to " << table.manifest.finished << "\n";
  md << "- records: " << table.records.size() << "\n";
  md << "- failed cells: " << table.failures.size() << "\n\n";

  md << "## Cells\n\n";
  md << "| variant | difficulty | ratio_m | folds | acc k=1 | acc k=max | gap k=1 | gap k=max "
        "| benefited | positive-sum folds |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|\n";

  for (const CellKey& cell : cells) {
    const CellStats st = cell_stats(table, cell);
    const std::size_t last = st.ks.size() - 1;

    // Per-fold positive-sum check at the largest k.
    std::map<int, std::vector<MetricsRecord>> fold_curves;
    for (const MetricsRecord& r : table.records)
      if (r.variant == cell.variant && r.difficulty == cell.difficulty &&
          r.ratio_m == cell.ratio_m)
        fold_curves[r.fold].push_back(r);
    int ps_true = 0, ps_total = 0;
    for (const auto& [fold, curve] : fold_curves) {
      try {
        ps_true += positive_sum(curve, st.ks[last]);
        ++ps_total;
      } catch (const std::invalid_argument&) {
        // incomplete curve; leave it out of the tally
      }
    }

    const double sg = st.signed_gap_mean[last];
    const char* who = sg > 0.0 ? "M" : (sg < 0.0 ? "F" : "none");
    md << "| " << cell.variant << " | " << fmt6(cell.difficulty) << " | " << fmt6(cell.ratio_m)
       << " | " << st.folds[last] << " | " << fmt6(st.acc_overall[0].mean) << " | "
       << fmt6(st.acc_overall[last].mean) << " | " << fmt6(st.gap[0].mean) << " | "
       << fmt6(st.gap[last].mean) << " | " << who << " | " << ps_true << "/" << ps_total
       << " |\n";

    const CurveFigures figs = emit_curves(table, cell);
    const std::string base = cell_file_base(cell);
    bundle.svgs.push_back({base + "_acc.svg", figs.acc_svg});
    bundle.svgs.push_back({base + "_gap.svg", figs.gap_svg});
    bundle.svgs.push_back({base + "_relimp.svg", figs.relimp_svg});
    bundle.csvs.push_back({base + "_acc.csv", figs.acc_csv});
    bundle.csvs.push_back({base + "_gap.csv", figs.gap_csv});
    bundle.csvs.push_back({base + "_relimp.csv", figs.relimp_csv});
  }
  md << "\n";

  for (const auto& [variant, ratios] : variant_ratios) {
    if (ratios.size() < 2) continue;
    ResultsTable sub;
    for (const MetricsRecord& r : table.records)
      if (r.variant == variant) sub.records.push_back(r);
    const std::vector<double> diffs(variant_difficulties[variant].begin(),
                                    variant_difficulties[variant].end());
    const int k = variant_max_k[variant];
    try {
      const RatioAnalysis ra = emit_ratio_analysis(sub, diffs, k);
      const std::string base = "ratio_analysis_" + variant + "_k" + std::to_string(k);
      bundle.svgs.push_back({base + ".svg", ra.svg});
      bundle.csvs.push_back({base + ".csv", ra.csv});
      bundle.csvs.push_back({"ideal_ratio_" + variant + "_k" + std::to_string(k) + ".csv",
                             ra.ideal_csv});
      md << "## Ideal ratios (" << variant << ", k=" << k << ")\n\n";
      md << "| difficulty | best ratio (overall accuracy) | best ratio (gap) | coincide |\n";
      md << "|---|---|---|---|\n";
      std::istringstream lines(ra.ideal_csv);
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) {
        std::string row;
        for (char c : line) row += (c == ',') ? std::string(" | ") : std::string(1, c);
        md << "| " << row << " |\n";
      }
      md << "\n";
    } catch (const std::invalid_argument& e) {
      md << "## Ideal ratios (" << variant << ")\n\nnot computed: " << e.what() << "\n\n";
    }
  }

  if (!table.failures.empty()) {
    md << "## Failures\n\n";
    for (const CellFailure& f : table.failures)
      md << "- d=" << fmt6(f.difficulty) << " r=" << fmt6(f.ratio_m) << " fold=" << f.fold
         << ": " << f.message << "\n";
    md << "\n";
  }

  md << "## Files\n\n";
  for (const ReportFile& f : bundle.svgs) md << "- " << f.name << "\n";
  for (const ReportFile& f : bundle.csvs) md << "- " << f.name << "\n";
  bundle.markdown = md.str();
  return bundle;
}

std::vector<std::string> write_report(const ReportBundle& bundle, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  const auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
    written.push_back(path.string());
  };
  emit("summary.md", bundle.markdown);
  for (const ReportFile& f : bundle.svgs) emit(f.name, f.content);
  for (const ReportFile& f : bundle.csvs) emit(f.name, f.content);
  return written;
}

}  // namespace flab
