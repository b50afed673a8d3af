#pragma once

#include <filesystem>
#include <string>

#include "s2d/csv.hpp"

namespace s2d {

struct SvgStyle {
  int width = 720;
  int height = 560;
  bool band = false;  // aggregate series into a mean +- std band
  std::string title;
};

// Renders a CSV produced by this project into a standalone SVG. The schema is
// detected from the header: landscape grids become shaded cell surfaces with
// a per-figure z-range annotation, heatmaps become cell shadings with start
// and goal markers, curves become polylines (optionally a seed band).
void render_svg(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
                const SvgStyle& style = {});

}  // namespace s2d
