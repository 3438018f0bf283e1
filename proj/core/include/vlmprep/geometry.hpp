#pragma once

#include <cstdint>
#include <vector>

namespace vlmprep::geometry {

struct ImageDim {
  int width = 0;
  int height = 0;

  std::int64_t area() const {
    return static_cast<std::int64_t>(width) * height;
  }
  bool operator==(const ImageDim&) const = default;
};

struct GridShape {
  int rows = 1;
  int cols = 1;

  int tile_count() const { return rows * cols; }
  GridShape transposed() const { return {cols, rows}; }
  bool operator==(const GridShape&) const = default;
};

// Candidate grid shapes sharing one square tile side. The list order is the
// final tie-break in select_resolution, so it is part of the contract.
struct CandidateSet {
  int tile_side = 224;
  std::vector<GridShape> shapes;

  ImageDim canvas_for(const GridShape& shape) const {
    return {shape.cols * tile_side, shape.rows * tile_side};
  }
};

// The stock candidate set: single-row strips up to six tiles, the 2x2 and
// 2x3 blocks, and every transpose of those, deduplicated in that order.
// Largest canvas is 672x448 pixels.
CandidateSet default_candidates();

// Aspect-preserving fit of an image onto a canvas, scoring how much of the
// original the canvas can represent.
//
// effective_pixels counts original pixels representable after the resize:
// upscaling adds nothing, so the scaled area is capped at the original area.
// wasted_pixels is the canvas area left over after the effective content.
struct FitResult {
  double scale = 0.0;
  int scaled_width = 0;
  int scaled_height = 0;
  std::int64_t effective_pixels = 0;
  std::int64_t wasted_pixels = 0;
};

FitResult fit_to_canvas(ImageDim image, ImageDim canvas);

// Picks the grid whose canvas preserves the most detail: maximize effective
// pixels, then minimize wasted pixels, then prefer fewer tiles, then keep
// the earliest candidate.
GridShape select_resolution(ImageDim image, const CandidateSet& candidates);

struct TileRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const TileRect&) const = default;
};

// Pixel-space layout for one image on one grid: the resized content, the
// centered padding around it, and the row-major tile partition of the canvas.
struct TilingPlan {
  ImageDim input;
  GridShape grid;
  ImageDim canvas;
  ImageDim scaled_content;
  int pad_left = 0;
  int pad_right = 0;
  int pad_top = 0;
  int pad_bottom = 0;
  std::vector<TileRect> tiles;

  int tile_side() const { return grid.cols > 0 ? canvas.width / grid.cols : 0; }
};

TilingPlan plan_tiling(ImageDim image, GridShape grid, int tile_side);

// Layout for the low-resolution overview pass: the whole image padded to a
// square and resized to side x side, i.e. a 1x1 tiling on that side.
TilingPlan global_context_plan(ImageDim image, int side);

}  // namespace vlmprep::geometry
