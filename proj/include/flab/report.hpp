#pragma once

#include <span>
#include <string>
#include <vector>

#include "flab/harness.hpp"

// Report generation: turns a results table into fold-mean summary CSVs,
// hand-emitted SVG line charts (no plotting dependency, byte-stable output),
// and a markdown overview. Charts are views of the CSVs: every number
// labelled in an SVG also appears in the companion CSV.

namespace flab {

struct CellKey {
  std::string variant;
  double difficulty = 0.0;
  double ratio_m = 0.0;
};

// Per-cell curve family: accuracy / gap / relative improvement vs ensemble
// size, fold-mean lines with +-1 standard deviation bands, one 800x600 SVG
// panel each, plus the CSVs carrying the plotted series.
struct CurveFigures {
  std::string acc_svg;
  std::string gap_svg;
  std::string relimp_svg;
  std::string acc_csv;
  std::string gap_csv;
  std::string relimp_csv;
};

CurveFigures emit_curves(const ResultsTable& table, const CellKey& cell);

// Ratio sweep at a fixed ensemble size: overall accuracy (top half) and gap
// (bottom half) vs ratio, one line per difficulty level, plus the
// ideal-ratio-per-difficulty table. The table must cover every
// (difficulty, ratio) pair for the given difficulties.
struct RatioAnalysis {
  std::string svg;
  std::string csv;
  std::string ideal_csv;  // difficulty, best ratio by accuracy / by gap, coincide
};

RatioAnalysis emit_ratio_analysis(const ResultsTable& table,
                                  std::span<const double> difficulty_grid, int k);

struct ReportFile {
  std::string name;
  std::string content;
};

struct ReportBundle {
  std::string markdown;
  std::vector<ReportFile> svgs;
  std::vector<ReportFile> csvs;
};

// Full report for a results table: curve family per grid cell, the ratio
// analysis per variant whenever the table holds a complete ratio sweep, and
// a markdown summary tying them together.
ReportBundle build_report(const ResultsTable& table);

// Write markdown + figures + CSVs into out_dir (created if missing); returns
// the written paths in a deterministic order.
std::vector<std::string> write_report(const ReportBundle& bundle, const std::string& out_dir);

}  // namespace flab
