#pragma once

#include <functional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "vlmprep/geometry.hpp"

namespace vlmprep::featuremap {

// Vision-encoder geometry: a square tile is encoded as a square grid of
// patch features. tile_side must be a multiple of patch_side.
struct EncoderProfile {
  int tile_side = 224;
  int patch_side = 14;
  int feature_dim = 8;

  int patches_per_side() const { return tile_side / patch_side; }
  int tokens_per_tile() const { return patches_per_side() * patches_per_side(); }
};

// Row-major grid of fixed-width feature vectors, stored flat.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(int rows, int cols, int feature_dim);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int feature_dim() const { return feature_dim_; }

  std::span<float> at(int row, int col);
  std::span<const float> at(int row, int col) const;

  bool operator==(const FeatureGrid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int feature_dim_ = 0;
  std::vector<float> values_;
};

struct KeptRange {
  int start = 0;
  int count = 0;

  int end() const { return start + count; }
  bool operator==(const KeptRange&) const = default;
};

// Token-level layout for one tiled image: the merged high-resolution grid,
// the sub-rectangle of it that survives padding removal, and the resulting
// budget. Rows and columns here are feature cells, not pixels.
struct LayoutPlan {
  geometry::GridShape grid;
  int merged_rows = 0;
  int merged_cols = 0;
  KeptRange kept_rows;
  KeptRange kept_cols;
  int row_end_count = 0;
  int global_tokens = 0;
  int highres_tokens = 0;
  int total_tokens = 0;
};

// Marker appended after each kept feature row so a flat sequence still
// carries where rows break. This is its serialized spelling; numeric ids
// belong to whatever tokenizer consumes the sequence.
inline constexpr const char* kRowEndName = "ROW_END";

struct GlobalFeature {
  int index = 0;
  bool operator==(const GlobalFeature&) const = default;
};
struct GridFeature {
  int row = 0;
  int col = 0;
  bool operator==(const GridFeature&) const = default;
};
struct RowEnd {
  int row = 0;
  bool operator==(const RowEnd&) const = default;
};

using TokenItem = std::variant<GlobalFeature, GridFeature, RowEnd>;

struct TokenSequence {
  std::vector<TokenItem> items;
  bool operator==(const TokenSequence&) const = default;
};

// Stand-in for a learned encoder with the same shape contract: one feature
// vector per patch_side x patch_side block. Each vector holds the block's
// [mean, min, max, variance], zero-padded to feature_dim. tile_pixels is
// row-major, tile_side x tile_side, one intensity per pixel.
FeatureGrid encode_tile_stub(std::span<const float> tile_pixels,
                             const EncoderProfile& profile);

// Stitches per-tile grids (given in row-major tile order) into one grid
// whose cell (r, c) comes from tile (r / tile_rows, c / tile_cols).
FeatureGrid merge_tiles(geometry::GridShape grid,
                        const std::vector<FeatureGrid>& tiles);

// Feature rows/columns that survive padding removal. A strip is dropped
// exactly when its pixel span lies entirely inside the padding, so any strip
// touching at least one content pixel is kept. Returns {rows, cols}.
std::pair<KeptRange, KeptRange> unpad_ranges(const geometry::TilingPlan& plan,
                                             const EncoderProfile& profile);

LayoutPlan build_layout(const geometry::TilingPlan& plan,
                        const EncoderProfile& profile);

// Serializes the layout: all global tokens first, then each kept row of the
// merged grid followed by its ROW_END marker. merged/global_grid must match
// the layout's dimensions.
TokenSequence flatten(const FeatureGrid& merged, const FeatureGrid& global_grid,
                      const LayoutPlan& layout);

// End-to-end budget for an image: grid selection, tiling, padding removal.
// total_tokens = global + kept_rows * kept_cols + kept_rows.
LayoutPlan token_budget(geometry::ImageDim image,
                        const geometry::CandidateSet& candidates,
                        const EncoderProfile& profile);

// Pixel source for one tile of a plan: tile_side^2 intensities in [0, 1],
// row-major. Real image resampling lives behind this hook.
using TileResampler =
    std::function<std::vector<float>(const geometry::TilingPlan& plan, int tile_index)>;

// Encodes every tile of the plan and merges the results. Tiles may be
// encoded on up to thread_count threads; results are assembled in tile-index
// order, so the output is independent of scheduling.
FeatureGrid encode_plan(const geometry::TilingPlan& plan,
                        const EncoderProfile& profile,
                        const TileResampler& resampler, int thread_count = 1);

}  // namespace vlmprep::featuremap
