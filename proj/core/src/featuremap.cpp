#include "vlmprep/featuremap.hpp"

#include <algorithm>
#include <future>
#include <stdexcept>

namespace vlmprep::featuremap {

namespace {

void require_profile(const EncoderProfile& profile) {
  if (profile.tile_side < 1 || profile.patch_side < 1 ||
      profile.tile_side % profile.patch_side != 0) {
    throw std::invalid_argument(
        "encoder profile: tile_side must be a positive multiple of patch_side");
  }
  if (profile.feature_dim < 4) {
    throw std::invalid_argument(
        "encoder profile: feature_dim must hold at least the four block stats");
  }
}

void require_plan_matches(const geometry::TilingPlan& plan,
                          const EncoderProfile& profile) {
  if (plan.canvas.width != plan.grid.cols * profile.tile_side ||
      plan.canvas.height != plan.grid.rows * profile.tile_side) {
    throw std::invalid_argument("tiling plan tile side does not match encoder profile");
  }
}

}  // namespace

FeatureGrid::FeatureGrid(int rows, int cols, int feature_dim)
    : rows_(rows), cols_(cols), feature_dim_(feature_dim) {
  if (rows < 0 || cols < 0 || feature_dim < 1) {
    throw std::invalid_argument("FeatureGrid: invalid dimensions");
  }
  values_.resize(static_cast<std::size_t>(rows) * cols * feature_dim, 0.0f);
}

std::span<float> FeatureGrid::at(int row, int col) {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_) {
    throw std::out_of_range("FeatureGrid::at: cell out of range");
  }
  const std::size_t offset =
      (static_cast<std::size_t>(row) * cols_ + col) * feature_dim_;
  return {values_.data() + offset, static_cast<std::size_t>(feature_dim_)};
}

std::span<const float> FeatureGrid::at(int row, int col) const {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_) {
    throw std::out_of_range("FeatureGrid::at: cell out of range");
  }
  const std::size_t offset =
      (static_cast<std::size_t>(row) * cols_ + col) * feature_dim_;
  return {values_.data() + offset, static_cast<std::size_t>(feature_dim_)};
}

FeatureGrid encode_tile_stub(std::span<const float> tile_pixels,
                             const EncoderProfile& profile) {
  require_profile(profile);
  const int side = profile.tile_side;
  if (std::ssize(tile_pixels) != static_cast<std::ptrdiff_t>(side) * side) {
    throw std::invalid_argument("encode_tile_stub: pixel buffer size mismatch");
  }

  const int pps = profile.patches_per_side();
  const int ps = profile.patch_side;
  FeatureGrid grid(pps, pps, profile.feature_dim);

  for (int pr = 0; pr < pps; ++pr) {
    for (int pc = 0; pc < pps; ++pc) {
      double sum = 0.0;
      float lo = tile_pixels[static_cast<std::size_t>(pr * ps) * side + pc * ps];
      float hi = lo;
      for (int y = pr * ps; y < (pr + 1) * ps; ++y) {
        for (int x = pc * ps; x < (pc + 1) * ps; ++x) {
          const float v = tile_pixels[static_cast<std::size_t>(y) * side + x];
          sum += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      const double n = static_cast<double>(ps) * ps;
      const double mean = sum / n;
      double var = 0.0;
      for (int y = pr * ps; y < (pr + 1) * ps; ++y) {
        for (int x = pc * ps; x < (pc + 1) * ps; ++x) {
          const double d = tile_pixels[static_cast<std::size_t>(y) * side + x] - mean;
          var += d * d;
        }
      }
      auto cell = grid.at(pr, pc);
      cell[0] = static_cast<float>(mean);
      cell[1] = lo;
      cell[2] = hi;
      cell[3] = static_cast<float>(var / n);
    }
  }
  return grid;
}

FeatureGrid merge_tiles(geometry::GridShape grid,
                        const std::vector<FeatureGrid>& tiles) {
  if (grid.rows < 1 || grid.cols < 1) {
    throw std::invalid_argument("merge_tiles: grid must be positive");
  }
  if (std::ssize(tiles) != grid.tile_count()) {
    throw std::invalid_argument("merge_tiles: tile count does not match grid");
  }
  const int t_rows = tiles.front().rows();
  const int t_cols = tiles.front().cols();
  const int dim = tiles.front().feature_dim();
  if (t_rows < 1 || t_cols < 1) {
    throw std::invalid_argument("merge_tiles: tiles must be non-empty");
  }
  for (const FeatureGrid& tile : tiles) {
    if (tile.rows() != t_rows || tile.cols() != t_cols || tile.feature_dim() != dim) {
      throw std::invalid_argument("merge_tiles: tiles must share one shape");
    }
  }

  FeatureGrid merged(grid.rows * t_rows, grid.cols * t_cols, dim);
  for (int r = 0; r < merged.rows(); ++r) {
    for (int c = 0; c < merged.cols(); ++c) {
      const FeatureGrid& tile =
          tiles[static_cast<std::size_t>(r / t_rows) * grid.cols + c / t_cols];
      auto src = tile.at(r % t_rows, c % t_cols);
      std::copy(src.begin(), src.end(), merged.at(r, c).begin());
    }
  }
  return merged;
}

std::pair<KeptRange, KeptRange> unpad_ranges(const geometry::TilingPlan& plan,
                                             const EncoderProfile& profile) {
  const int ps = profile.patch_side;
  if (ps < 1 || plan.canvas.width % ps != 0 || plan.canvas.height % ps != 0) {
    throw std::invalid_argument("unpad_ranges: canvas is not divisible by patch side");
  }

  // Strip i covers pixels [i*ps, (i+1)*ps). Leading strips are dropped while
  // they end at or before the content start; trailing strips are dropped
  // once they begin at or after the content end.
  const auto kept = [ps](int pad_lead, int content) {
    const int first_kept = pad_lead / ps;
    const int last_kept_end = (pad_lead + content + ps - 1) / ps;  // ceil
    return KeptRange{first_kept, last_kept_end - first_kept};
  };
  return {kept(plan.pad_top, plan.scaled_content.height),
          kept(plan.pad_left, plan.scaled_content.width)};
}

LayoutPlan build_layout(const geometry::TilingPlan& plan,
                        const EncoderProfile& profile) {
  require_profile(profile);
  require_plan_matches(plan, profile);

  const int pps = profile.patches_per_side();
  LayoutPlan layout;
  layout.grid = plan.grid;
  layout.merged_rows = plan.grid.rows * pps;
  layout.merged_cols = plan.grid.cols * pps;

  auto [rows, cols] = unpad_ranges(plan, profile);
  layout.kept_rows = rows;
  layout.kept_cols = cols;

  layout.row_end_count = rows.count;
  layout.global_tokens = profile.tokens_per_tile();
  layout.highres_tokens = rows.count * cols.count + rows.count;
  layout.total_tokens = layout.global_tokens + layout.highres_tokens;
  return layout;
}

TokenSequence flatten(const FeatureGrid& merged, const FeatureGrid& global_grid,
                      const LayoutPlan& layout) {
  if (merged.rows() != layout.merged_rows || merged.cols() != layout.merged_cols) {
    throw std::invalid_argument("flatten: merged grid does not match layout");
  }
  if (global_grid.rows() * global_grid.cols() != layout.global_tokens) {
    throw std::invalid_argument("flatten: global grid does not match layout");
  }

  TokenSequence seq;
  seq.items.reserve(static_cast<std::size_t>(layout.total_tokens));
  for (int i = 0; i < layout.global_tokens; ++i) {
    seq.items.emplace_back(GlobalFeature{i});
  }
  for (int r = layout.kept_rows.start; r < layout.kept_rows.end(); ++r) {
    for (int c = layout.kept_cols.start; c < layout.kept_cols.end(); ++c) {
      seq.items.emplace_back(GridFeature{r, c});
    }
    seq.items.emplace_back(RowEnd{r});
  }
  return seq;
}

LayoutPlan token_budget(geometry::ImageDim image,
                        const geometry::CandidateSet& candidates,
                        const EncoderProfile& profile) {
  if (candidates.tile_side != profile.tile_side) {
    throw std::invalid_argument(
        "token_budget: candidate tile side differs from encoder profile");
  }
  const geometry::GridShape grid = select_resolution(image, candidates);
  return build_layout(plan_tiling(image, grid, candidates.tile_side), profile);
}

FeatureGrid encode_plan(const geometry::TilingPlan& plan,
                        const EncoderProfile& profile,
                        const TileResampler& resampler, int thread_count) {
  require_profile(profile);
  require_plan_matches(plan, profile);
  if (!resampler) {
    throw std::invalid_argument("encode_plan: resampler is empty");
  }

  const int tile_count = plan.grid.tile_count();
  std::vector<FeatureGrid> tiles(static_cast<std::size_t>(tile_count));
  const auto encode_range = [&](int begin, int step) {
    for (int i = begin; i < tile_count; i += step) {
      tiles[static_cast<std::size_t>(i)] =
          encode_tile_stub(resampler(plan, i), profile);
    }
  };

  const int workers = std::clamp(thread_count, 1, tile_count);
  if (workers == 1) {
    encode_range(0, 1);
  } else {
    // Disjoint strided index sets per worker; assembly is by tile index, so
    // the merged grid cannot depend on which worker finished first.
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, encode_range, w, workers));
    }
    for (auto& f : futures) {
      f.get();
    }
  }
  return merge_tiles(plan.grid, tiles);
}

}  // namespace vlmprep::featuremap
