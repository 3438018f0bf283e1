#include "vlmprep/geometry.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace vlmprep::geometry {

namespace {

void require_positive(ImageDim dim, const char* what) {
  if (dim.width < 1 || dim.height < 1) {
    throw std::invalid_argument(std::string(what) + " dimensions must be positive");
  }
}

}  // namespace

CandidateSet default_candidates() {
  constexpr std::array<GridShape, 8> listed = {{
      {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6}, {2, 2}, {2, 3},
  }};

  CandidateSet set;
  set.tile_side = 224;
  auto add_unique = [&set](GridShape shape) {
    if (std::find(set.shapes.begin(), set.shapes.end(), shape) == set.shapes.end()) {
      set.shapes.push_back(shape);
    }
  };
  // Listed shapes first, then their transposes: a shape that ties with its
  // transpose on every score resolves to the listed orientation.
  for (GridShape shape : listed) {
    add_unique(shape);
  }
  for (GridShape shape : listed) {
    add_unique(shape.transposed());
  }
  return set;
}

FitResult fit_to_canvas(ImageDim image, ImageDim canvas) {
  require_positive(image, "fit_to_canvas: image");
  require_positive(canvas, "fit_to_canvas: canvas");

  const std::int64_t w = image.width;
  const std::int64_t h = image.height;
  const std::int64_t cw = canvas.width;
  const std::int64_t ch = canvas.height;

  FitResult fit;
  // The limiting axis fills its canvas side exactly; the other side is
  // floor(dim * scale). Both are computed in integer arithmetic so boundary
  // cases cannot drift with the floating-point scale reported alongside.
  // Width limits iff cw/w <= ch/h, i.e. cw*h <= ch*w.
  if (cw * h <= ch * w) {
    fit.scale = static_cast<double>(cw) / static_cast<double>(w);
    fit.scaled_width = static_cast<int>(cw);
    fit.scaled_height = static_cast<int>(std::max<std::int64_t>(1, h * cw / w));
  } else {
    fit.scale = static_cast<double>(ch) / static_cast<double>(h);
    fit.scaled_height = static_cast<int>(ch);
    fit.scaled_width = static_cast<int>(std::max<std::int64_t>(1, w * ch / h));
  }

  const std::int64_t scaled_area =
      static_cast<std::int64_t>(fit.scaled_width) * fit.scaled_height;
  fit.effective_pixels = std::min(scaled_area, image.area());
  fit.wasted_pixels = canvas.area() - fit.effective_pixels;
  return fit;
}

GridShape select_resolution(ImageDim image, const CandidateSet& candidates) {
  require_positive(image, "select_resolution: image");
  if (candidates.shapes.empty() || candidates.tile_side < 1) {
    throw std::invalid_argument("select_resolution: candidate set is empty");
  }

  const GridShape* best = nullptr;
  FitResult best_fit;
  for (const GridShape& shape : candidates.shapes) {
    const FitResult fit = fit_to_canvas(image, candidates.canvas_for(shape));
    bool better = false;
    if (best == nullptr) {
      better = true;
    } else if (fit.effective_pixels != best_fit.effective_pixels) {
      better = fit.effective_pixels > best_fit.effective_pixels;
    } else if (fit.wasted_pixels != best_fit.wasted_pixels) {
      better = fit.wasted_pixels < best_fit.wasted_pixels;
    } else if (shape.tile_count() != best->tile_count()) {
      better = shape.tile_count() < best->tile_count();
    }
    // Ties on all three keys keep the earlier candidate.
    if (better) {
      best = &shape;
      best_fit = fit;
    }
  }
  return *best;
}

TilingPlan plan_tiling(ImageDim image, GridShape grid, int tile_side) {
  require_positive(image, "plan_tiling: image");
  if (grid.rows < 1 || grid.cols < 1 || tile_side < 1) {
    throw std::invalid_argument("plan_tiling: grid and tile side must be positive");
  }

  TilingPlan plan;
  plan.input = image;
  plan.grid = grid;
  plan.canvas = {grid.cols * tile_side, grid.rows * tile_side};

  const FitResult fit = fit_to_canvas(image, plan.canvas);
  plan.scaled_content = {fit.scaled_width, fit.scaled_height};

  // Content is centered; an odd pixel of padding goes to the trailing side.
  const int pad_w = plan.canvas.width - fit.scaled_width;
  const int pad_h = plan.canvas.height - fit.scaled_height;
  plan.pad_left = pad_w / 2;
  plan.pad_right = pad_w - plan.pad_left;
  plan.pad_top = pad_h / 2;
  plan.pad_bottom = pad_h - plan.pad_top;

  plan.tiles.reserve(static_cast<std::size_t>(grid.tile_count()));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      plan.tiles.push_back({c * tile_side, r * tile_side, tile_side, tile_side});
    }
  }
  return plan;
}

TilingPlan global_context_plan(ImageDim image, int side) {
  return plan_tiling(image, GridShape{1, 1}, side);
}

}  // namespace vlmprep::geometry
