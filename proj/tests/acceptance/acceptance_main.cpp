// Acceptance gate: ten checks over geometry constants, selection and tiling
// invariants, full-scale mixture count algebra, determinism, truncation,
// batching, subsampling, and the evaluation prompt table. Prints one
// [PASS]/[FAIL] line per check and exits non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "vlmprep/batching.hpp"
#include "vlmprep/datastore.hpp"
#include "vlmprep/evalprompts.hpp"
#include "vlmprep/featuremap.hpp"
#include "vlmprep/geometry.hpp"
#include "vlmprep/mixture.hpp"
#include "vlmprep/rng.hpp"

namespace {

namespace fs = std::filesystem;
namespace geometry = vlmprep::geometry;
namespace featuremap = vlmprep::featuremap;
namespace mixture = vlmprep::mixture;
namespace batching = vlmprep::batching;
namespace datastore = vlmprep::datastore;
namespace evalprompts = vlmprep::evalprompts;
using vlmprep::Rng;

class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& detail) {
  if (!condition) {
    throw CheckFailure(detail);
  }
}

template <typename T, typename U>
void require_eq(const T& actual, const U& expected, const std::string& what) {
  if (!(actual == static_cast<T>(expected))) {
    std::ostringstream message;
    message << what << ": got " << actual << ", expected " << expected;
    throw CheckFailure(message.str());
  }
}

std::string words(int n) {
  std::string out;
  out.reserve(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += 'w';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-scale synthetic fixture shaped like the instruction-tuning mixture:
// per-dataset raw sizes are chosen so the compiled output hits the published
// per-dataset sizes exactly (OCRVQA enters oversized and is capped to 80,000;
// the multiple-choice set expands by its choice counts; the chat corpus
// carries records destined for the filter and the truncation rules).

struct DatasetExpectation {
  std::string name;
  std::int64_t exact_count;
  std::int64_t size_in_k;  // published per-dataset size, thousands
};

const std::vector<DatasetExpectation> kExpected = {
    {"llava", 158000, 158},    {"sharegpt", 40000, 40}, {"vqav2", 83000, 83},
    {"gqa", 72000, 72},        {"okvqa", 9000, 9},      {"ocrvqa", 80000, 80},
    {"aokvqa", 66000, 66},     {"textcaps", 22200, 22}, {"refcoco", 48400, 48},
    {"vg", 86400, 86},
};
constexpr std::int64_t kExpectedTotal = 665000;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write fixture file " + path.string());
  }
  return out;
}

void append_image(std::string& line, const std::string& ref, int w, int h) {
  line += "{\"ref\":\"";
  line += ref;
  line += "\",\"width\":";
  line += std::to_string(w);
  line += ",\"height\":";
  line += std::to_string(h);
  line += "}";
}

void write_chat_fixtures(const fs::path& dir) {
  // Visual chat: every record passes through unchanged.
  {
    std::ofstream out = open_out(dir / "llava.jsonl");
    std::string line;
    for (int i = 0; i < 158000; ++i) {
      line.clear();
      line += "{\"id\":\"im" + std::to_string(i) +
              "\",\"source\":\"raw\",\"modality\":\"visual\",\"image\":";
      append_image(line, "im" + std::to_string(i) + ".jpg", 224 + (i % 7) * 37,
                   224 + (i % 5) * 41);
      line += ",\"turns\":[";
      const int rounds = i % 3 + 1;
      for (int r = 0; r < rounds; ++r) {
        if (r > 0) line += ',';
        line += "{\"role\":\"human\",\"text\":\"what is in region " +
                std::to_string(r) + "\"},{\"role\":\"gpt\",\"text\":\"a synthetic "
                "object near position " + std::to_string(i % 13) + "\"}";
      }
      line += "]}\n";
      out << line;
    }
  }

  // Text chat: 41,000 raw records of which exactly 40,000 survive. 39,000 are
  // clean and short; 1,000 are long enough to lose trailing rounds to the
  // 2048-token budget; 400 have an oversized first round and drop entirely;
  // 600 violate structure (odd turns, bad role order, blank text, stray
  // image) and fall to the filter.
  {
    std::ofstream out = open_out(dir / "sharegpt.jsonl");
    std::string line;
    const std::string pair_text = words(150);   // 300 tokens per round
    const std::string huge_text = words(2100);  // over budget on its own
    for (int i = 0; i < 39000; ++i) {
      line.clear();
      line += "{\"id\":\"sg" + std::to_string(i) +
              "\",\"turns\":[{\"role\":\"human\",\"text\":\"hello friend " +
              std::to_string(i) +
              "\"},{\"role\":\"assistant\",\"text\":\"greetings and good day\"}]}\n";
      out << line;
    }
    for (int i = 0; i < 1000; ++i) {
      line.clear();
      line += "{\"id\":\"sgl" + std::to_string(i) + "\",\"turns\":[";
      for (int r = 0; r < 10; ++r) {
        if (r > 0) line += ',';
        line += "{\"role\":\"human\",\"text\":\"" + pair_text +
                "\"},{\"role\":\"assistant\",\"text\":\"" + pair_text + "\"}";
      }
      line += "]}\n";
      out << line;
    }
    for (int i = 0; i < 400; ++i) {
      line.clear();
      line += "{\"id\":\"sgx" + std::to_string(i) +
              "\",\"turns\":[{\"role\":\"human\",\"text\":\"" + huge_text +
              "\"},{\"role\":\"assistant\",\"text\":\"short\"}]}\n";
      out << line;
    }
    for (int i = 0; i < 200; ++i) {
      out << "{\"id\":\"odd" << i
          << "\",\"turns\":[{\"role\":\"human\",\"text\":\"a\"},"
             "{\"role\":\"assistant\",\"text\":\"b\"},"
             "{\"role\":\"human\",\"text\":\"c\"}]}\n";
    }
    for (int i = 0; i < 200; ++i) {
      out << "{\"id\":\"swap" << i
          << "\",\"turns\":[{\"role\":\"assistant\",\"text\":\"a\"},"
             "{\"role\":\"human\",\"text\":\"b\"}]}\n";
    }
    for (int i = 0; i < 100; ++i) {
      out << "{\"id\":\"blank" << i
          << "\",\"turns\":[{\"role\":\"human\",\"text\":\"a\"},"
             "{\"role\":\"assistant\",\"text\":\"   \"}]}\n";
    }
    for (int i = 0; i < 100; ++i) {
      line.clear();
      line += "{\"id\":\"img" + std::to_string(i) + "\",\"image\":";
      append_image(line, "stray" + std::to_string(i) + ".jpg", 64, 64);
      line += ",\"turns\":[{\"role\":\"human\",\"text\":\"a\"},"
              "{\"role\":\"assistant\",\"text\":\"b\"}]}\n";
      out << line;
    }
  }
}

void write_qa_fixture(const fs::path& path, const std::string& prefix, int images,
                      int questions_per_image) {
  std::ofstream out = open_out(path);
  std::string line;
  for (int i = 0; i < images; ++i) {
    for (int q = 0; q < questions_per_image; ++q) {
      line.clear();
      line += "{\"image\":";
      append_image(line, prefix + std::to_string(i) + ".jpg", 640, 480);
      line += ",\"question\":\"question " + std::to_string(q) + " about item " +
              std::to_string(i) + "\",\"answer\":\"answer " + std::to_string(q) +
              "\"}\n";
      out << line;
    }
  }
}

void write_mc_fixture(const fs::path& path) {
  // 500 three-way + 500 five-way + 15,500 four-way questions: the rotation
  // augmentation expands the 16,500 questions into exactly 66,000 replicas.
  std::ofstream out = open_out(path);
  std::string line;
  for (int i = 0; i < 16500; ++i) {
    const int k = i < 500 ? 3 : (i < 1000 ? 5 : 4);
    line.clear();
    line += "{\"image\":";
    append_image(line, "aok" + std::to_string(i) + ".jpg", 640, 480);
    line += ",\"question\":\"which option fits item " + std::to_string(i) +
            "\",\"choices\":[";
    for (int j = 0; j < k; ++j) {
      if (j > 0) line += ',';
      line += "\"choice " + std::to_string(j) + "\"";
    }
    line += "],\"answer_index\":" + std::to_string(i % k) + "}\n";
    out << line;
  }
}

void write_caption_fixture(const fs::path& path) {
  std::ofstream out = open_out(path);
  std::string line;
  for (int i = 0; i < 22200; ++i) {
    line.clear();
    line += "{\"image\":";
    append_image(line, "tc" + std::to_string(i) + ".jpg", 640, 480);
    line += ",\"caption\":\"a synthetic caption for image " + std::to_string(i) +
            "\"}\n";
    out << line;
  }
}

void append_region_line(std::string& line, const std::string& ref, int index) {
  const int x1 = 5 + index % 100;
  const int y1 = 5 + index % 80;
  line += "{\"image\":";
  append_image(line, ref, 640, 480);
  line += ",\"phrase\":\"object " + std::to_string(index) + "\",\"x1\":" +
          std::to_string(x1) + ",\"y1\":" + std::to_string(y1) +
          ",\"x2\":" + std::to_string(x1 + 200) + ",\"y2\":" +
          std::to_string(y1 + 150) + "}\n";
}

void write_region_fixtures(const fs::path& dir) {
  // refcoco: 46,400 single-annotation images plus 1,000 ten-annotation images;
  // with the nine-round chunk bound the latter split in two, so the dataset
  // compiles to 46,400 + 2,000 = 48,400 conversations.
  {
    std::ofstream out = open_out(dir / "refcoco.jsonl");
    std::string line;
    for (int i = 0; i < 46400; ++i) {
      line.clear();
      append_region_line(line, "rc" + std::to_string(i) + ".jpg", i);
      out << line;
    }
    for (int j = 0; j < 1000; ++j) {
      for (int a = 0; a < 10; ++a) {
        line.clear();
        append_region_line(line, "rcm" + std::to_string(j) + ".jpg", j * 10 + a);
        out << line;
      }
    }
  }
  // vg: 86,000 single-annotation images plus 400 twelve-annotation images;
  // the per-image cap of ten keeps each as one conversation, so the dataset
  // compiles to 86,400.
  {
    std::ofstream out = open_out(dir / "vg.jsonl");
    std::string line;
    for (int i = 0; i < 86000; ++i) {
      line.clear();
      append_region_line(line, "vg" + std::to_string(i) + ".jpg", i);
      out << line;
    }
    for (int j = 0; j < 400; ++j) {
      for (int a = 0; a < 12; ++a) {
        line.clear();
        append_region_line(line, "vgm" + std::to_string(j) + ".jpg", j * 12 + a);
        out << line;
      }
    }
  }
}

mixture::MixtureManifest fixture_manifest(const fs::path& dir) {
  const auto path = [&dir](const char* name) { return (dir / name).string(); };
  mixture::MixtureManifest manifest;
  manifest.seed = 20240501;
  manifest.token_limit = 2048;
  manifest.datasets = {
      {"llava", mixture::DatasetKind::visual_chat, path("llava.jsonl"),
       {}, {}, {}, {}, {}, {}},
      {"sharegpt", mixture::DatasetKind::text_chat, path("sharegpt.jsonl"),
       {}, {}, {}, {}, {}, {}},
      {"vqav2", mixture::DatasetKind::vqa_short, path("vqav2.jsonl"),
       std::string(mixture::kShortAnswerPrompt), {}, {}, {}, {}, {}},
      {"gqa", mixture::DatasetKind::vqa_short, path("gqa.jsonl"),
       std::string(mixture::kShortAnswerPrompt), {}, {}, {}, {}, {}},
      {"okvqa", mixture::DatasetKind::vqa_short, path("okvqa.jsonl"),
       std::string(mixture::kShortAnswerPrompt), {}, {}, {}, {}, {}},
      {"ocrvqa", mixture::DatasetKind::vqa_short, path("ocrvqa.jsonl"),
       std::string(mixture::kShortAnswerPrompt), 80000, {}, {}, {}, {}},
      {"aokvqa", mixture::DatasetKind::mc, path("aokvqa.jsonl"),
       {}, {}, {}, {}, {}, {}},
      {"textcaps", mixture::DatasetKind::caption, path("textcaps.jsonl"),
       {}, {}, {}, {}, {}, {}},
      {"refcoco", mixture::DatasetKind::region, path("refcoco.jsonl"),
       {}, {}, {}, 9, {}, {}},
      {"vg", mixture::DatasetKind::region, path("vg.jsonl"),
       {}, {}, 10, {}, {}, mixture::RegionTask::locate_phrase},
  };
  return manifest;
}

void generate_fixture(const fs::path& dir) {
  write_chat_fixtures(dir);
  write_qa_fixture(dir / "vqav2.jsonl", "v", 83000, 2);
  write_qa_fixture(dir / "gqa.jsonl", "g", 72000, 2);
  write_qa_fixture(dir / "okvqa.jsonl", "ok", 9000, 2);
  write_qa_fixture(dir / "ocrvqa.jsonl", "ocr", 90000, 1);  // capped to 80,000
  write_mc_fixture(dir / "aokvqa.jsonl");
  write_caption_fixture(dir / "textcaps.jsonl");
  write_region_fixtures(dir);
}

// ---------------------------------------------------------------------------
// Checks

// Brute-force reference: score every candidate as the full tuple
// (effective, wasted, tiles, position) and take the lexicographic best.
geometry::GridShape reference_select(geometry::ImageDim image,
                                     const geometry::CandidateSet& set) {
  using Key = std::tuple<std::int64_t, std::int64_t, int, std::size_t>;
  Key best_key;
  geometry::GridShape best_shape;
  for (std::size_t i = 0; i < set.shapes.size(); ++i) {
    const geometry::GridShape shape = set.shapes[i];
    const std::int64_t cw = std::int64_t{shape.cols} * set.tile_side;
    const std::int64_t ch = std::int64_t{shape.rows} * set.tile_side;
    std::int64_t sw;
    std::int64_t sh;
    if (cw * image.height <= ch * image.width) {
      sw = cw;
      sh = std::max<std::int64_t>(1, std::int64_t{image.height} * cw / image.width);
    } else {
      sh = ch;
      sw = std::max<std::int64_t>(1, std::int64_t{image.width} * ch / image.height);
    }
    const std::int64_t effective = std::min(sw * sh, image.area());
    const Key key{-effective, cw * ch - effective, shape.tile_count(), i};
    if (i == 0 || key < best_key) {
      best_key = key;
      best_shape = shape;
    }
  }
  return best_shape;
}

void check_candidate_constants() {
  const geometry::CandidateSet set = geometry::default_candidates();
  require_eq(set.tile_side, 224, "tile side");

  const std::vector<geometry::GridShape> expected = {
      {1, 1}, {1, 2}, {1, 3}, {1, 4}, {1, 5}, {1, 6}, {2, 2}, {2, 3},
      {2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {3, 2},
  };
  require(set.shapes == expected, "candidate shape list mismatch");

  std::int64_t max_area = 0;
  bool wide = false;
  bool tall = false;
  for (const geometry::GridShape& shape : set.shapes) {
    const geometry::ImageDim canvas = set.canvas_for(shape);
    max_area = std::max(max_area, canvas.area());
    wide = wide || canvas == geometry::ImageDim{672, 448};
    tall = tall || canvas == geometry::ImageDim{448, 672};
  }
  require_eq(max_area, std::int64_t{672} * 448, "max canvas area");
  require(wide && tall, "672x448 and 448x672 canvases must both exist");
}

void check_selection_oracle() {
  const geometry::CandidateSet set = geometry::default_candidates();
  std::mt19937_64 gen(20240502);
  std::uniform_int_distribution<int> dim(1, 4096);
  for (int trial = 0; trial < 10000; ++trial) {
    const geometry::ImageDim image{dim(gen), dim(gen)};
    const geometry::GridShape chosen = geometry::select_resolution(image, set);
    const geometry::GridShape reference = reference_select(image, set);
    if (!(chosen == reference)) {
      throw CheckFailure("selection mismatch at " + std::to_string(image.width) + "x" +
                         std::to_string(image.height));
    }
    const geometry::GridShape flipped =
        geometry::select_resolution({image.height, image.width}, set);
    if (!(flipped == chosen.transposed())) {
      throw CheckFailure("transpose asymmetry at " + std::to_string(image.width) +
                         "x" + std::to_string(image.height));
    }
  }
}

void check_geometry_invariants() {
  const geometry::CandidateSet set = geometry::default_candidates();
  const featuremap::EncoderProfile profile;
  std::mt19937_64 gen(20240503);
  std::uniform_int_distribution<int> dim(1, 4096);

  for (int trial = 0; trial < 10000; ++trial) {
    const geometry::ImageDim image{dim(gen), dim(gen)};
    const geometry::GridShape grid = geometry::select_resolution(image, set);
    const geometry::TilingPlan plan =
        geometry::plan_tiling(image, grid, set.tile_side);

    require_eq(plan.pad_left + plan.scaled_content.width + plan.pad_right,
               plan.canvas.width, "horizontal closure");
    require_eq(plan.pad_top + plan.scaled_content.height + plan.pad_bottom,
               plan.canvas.height, "vertical closure");
    require(plan.pad_left + plan.pad_right == 0 || plan.pad_top + plan.pad_bottom == 0,
            "padding must be single-axis");
    require(std::abs(plan.pad_left - plan.pad_right) <= 1 &&
                std::abs(plan.pad_top - plan.pad_bottom) <= 1,
            "padding must be centered within one pixel");

    require_eq(std::ssize(plan.tiles), grid.tile_count(), "tile count");
    std::int64_t covered = 0;
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        const auto& tile =
            plan.tiles[static_cast<std::size_t>(r) * grid.cols + c];
        require(tile.x == c * set.tile_side && tile.y == r * set.tile_side &&
                    tile.width == set.tile_side && tile.height == set.tile_side,
                "tiles must partition the canvas on the tile lattice");
        covered += std::int64_t{tile.width} * tile.height;
      }
    }
    require_eq(covered, plan.canvas.area(), "tile area coverage");

    const auto [rows, cols] = featuremap::unpad_ranges(plan, profile);
    const auto strip_check = [&](const featuremap::KeptRange& kept, int pad_lead,
                                 int content, int strips) {
      for (int i = 0; i < strips; ++i) {
        const bool touches_content =
            i * profile.patch_side < pad_lead + content &&
            (i + 1) * profile.patch_side > pad_lead;
        const bool is_kept = i >= kept.start && i < kept.end();
        require(is_kept == touches_content,
                "strip " + std::to_string(i) + " kept/content disagreement");
      }
    };
    strip_check(rows, plan.pad_top, plan.scaled_content.height,
                plan.canvas.height / profile.patch_side);
    strip_check(cols, plan.pad_left, plan.scaled_content.width,
                plan.canvas.width / profile.patch_side);

    const featuremap::LayoutPlan layout = featuremap::build_layout(plan, profile);
    const featuremap::FeatureGrid merged(layout.merged_rows, layout.merged_cols, 4);
    const featuremap::FeatureGrid global(profile.patches_per_side(),
                                         profile.patches_per_side(), 4);
    const featuremap::TokenSequence seq = featuremap::flatten(merged, global, layout);
    require_eq(std::ssize(seq.items),
               256 + rows.count * cols.count + rows.count, "flattened length");
  }
}

void check_worked_example() {
  const geometry::CandidateSet set = geometry::default_candidates();
  const featuremap::EncoderProfile profile;
  const geometry::ImageDim image{1000, 600};

  const geometry::GridShape grid = geometry::select_resolution(image, set);
  require(grid == geometry::GridShape{2, 3}, "grid must be 2x3");

  const geometry::TilingPlan plan = geometry::plan_tiling(image, grid, set.tile_side);
  require_eq(plan.pad_top, 22, "top padding");
  require_eq(plan.pad_bottom, 23, "bottom padding");
  require_eq(plan.pad_left, 0, "left padding");

  // Pixel-level oracle: mark every canvas pixel content or padding, then
  // discard a 14-pixel strip only when all of its pixels are padding.
  const int width = plan.canvas.width;
  const int height = plan.canvas.height;
  std::vector<bool> is_content(static_cast<std::size_t>(width) * height, false);
  for (int y = plan.pad_top; y < plan.pad_top + plan.scaled_content.height; ++y) {
    for (int x = plan.pad_left; x < plan.pad_left + plan.scaled_content.width; ++x) {
      is_content[static_cast<std::size_t>(y) * width + x] = true;
    }
  }
  std::vector<int> kept_rows;
  for (int strip = 0; strip < height / profile.patch_side; ++strip) {
    bool any_content = false;
    for (int y = strip * profile.patch_side; y < (strip + 1) * profile.patch_side; ++y) {
      for (int x = 0; x < width; ++x) {
        any_content = any_content || is_content[static_cast<std::size_t>(y) * width + x];
      }
    }
    if (any_content) {
      kept_rows.push_back(strip);
    }
  }
  std::vector<int> kept_cols;
  for (int strip = 0; strip < width / profile.patch_side; ++strip) {
    bool any_content = false;
    for (int x = strip * profile.patch_side; x < (strip + 1) * profile.patch_side; ++x) {
      for (int y = 0; y < height; ++y) {
        any_content = any_content || is_content[static_cast<std::size_t>(y) * width + x];
      }
    }
    if (any_content) {
      kept_cols.push_back(strip);
    }
  }

  const featuremap::LayoutPlan layout = featuremap::build_layout(plan, profile);
  require_eq(std::ssize(kept_rows), layout.kept_rows.count, "kept row count");
  require_eq(kept_rows.front(), layout.kept_rows.start, "first kept row");
  require_eq(kept_rows.back(), layout.kept_rows.end() - 1, "last kept row");
  require_eq(std::ssize(kept_cols), layout.kept_cols.count, "kept column count");
  require_eq(layout.kept_rows.count, 30, "kept rows");
  require_eq(layout.total_tokens, 1726, "total tokens");
}

struct MixtureContext {
  fs::path dir;
  mixture::MixtureManifest manifest;
  std::optional<datastore::ContentHash> first_hash;
};

void check_count_algebra(MixtureContext& ctx) {
  const std::vector<mixture::Conversation> mix = mixture::compile(ctx.manifest);

  std::map<std::string, std::int64_t> per_source;
  for (const mixture::Conversation& conv : mix) {
    ++per_source[conv.source];
  }
  for (const DatasetExpectation& expected : kExpected) {
    const std::int64_t count = per_source[expected.name];
    require_eq(count, expected.exact_count, expected.name + " count");
    require_eq(std::llround(static_cast<double>(count) / 1000.0), expected.size_in_k,
               expected.name + " count in thousands");
  }
  require_eq(std::ssize(mix), kExpectedTotal, "total mixture size");

  ctx.first_hash = datastore::hash_records(mix);
}

void check_determinism(MixtureContext& ctx) {
  require(ctx.first_hash.has_value(), "count-algebra compile must run first");

  mixture::CompileOptions serial;
  serial.thread_count = 1;
  const auto rerun = mixture::compile(ctx.manifest, serial);
  const datastore::ContentHash second = datastore::hash_records(rerun);
  require(second == *ctx.first_hash, "rerun hash differs from first compile");

  mixture::CompileOptions parallel;
  parallel.thread_count = 4;
  const auto threaded = mixture::compile(ctx.manifest, parallel);
  const datastore::ContentHash third = datastore::hash_records(threaded);
  require(third == *ctx.first_hash, "threaded compile hash differs");
}

void check_truncation() {
  const auto& counter = mixture::default_token_counter();
  Rng rng(20240507);
  for (int trial = 0; trial < 1000; ++trial) {
    mixture::Conversation conv;
    conv.id = "t" + std::to_string(trial);
    const int rounds = 1 + static_cast<int>(rng.next_below(12));
    for (int r = 0; r < rounds; ++r) {
      conv.turns.push_back({mixture::Role::human,
                            words(1 + static_cast<int>(rng.next_below(500)))});
      conv.turns.push_back({mixture::Role::assistant,
                            words(1 + static_cast<int>(rng.next_below(300)))});
    }

    const std::optional<mixture::Conversation> out =
        mixture::truncate(conv, counter, 2048);
    if (!out) {
      const std::int64_t first_pair =
          counter.count(conv.turns[0].text) + counter.count(conv.turns[1].text);
      require(first_pair > 2048, "conversation dropped although first round fits");
      continue;
    }
    require(mixture::conversation_tokens(*out, counter) <= 2048,
            "truncated conversation exceeds the budget");
    require(out->turns.size() % 2 == 0 && !out->turns.empty(),
            "truncation must keep whole rounds");
    require(out->turns.size() <= conv.turns.size(), "truncation added turns");
    for (std::size_t i = 0; i < out->turns.size(); ++i) {
      require(out->turns[i] == conv.turns[i],
              "kept turns must be an unmodified prefix");
    }
  }
}

void check_batching() {
  Rng rng(20240508);
  for (int trial = 0; trial < 1000; ++trial) {
    const int visual = static_cast<int>(rng.next_below(60));
    const int text = static_cast<int>(rng.next_below(60));
    if (visual + text == 0) {
      continue;
    }
    const int batch_size = 1 + static_cast<int>(rng.next_below(9));

    std::vector<mixture::Conversation> mix;
    for (int i = 0; i < visual; ++i) {
      mixture::Conversation conv;
      conv.id = "v" + std::to_string(i);
      conv.image = mixture::ImageRef{"x.jpg", {8, 8}};
      conv.modality = mixture::Modality::visual;
      mix.push_back(std::move(conv));
    }
    for (int i = 0; i < text; ++i) {
      mixture::Conversation conv;
      conv.id = "t" + std::to_string(i);
      mix.push_back(std::move(conv));
    }

    const batching::BatchPlan plan = batching::plan_batches(mix, batch_size, rng.next_u64());
    const std::size_t expected =
        (static_cast<std::size_t>(visual) + batch_size - 1) / batch_size +
        (static_cast<std::size_t>(text) + batch_size - 1) / batch_size;
    require_eq(plan.batches.size(), expected, "batch count formula");

    std::set<std::string> seen;
    for (const batching::Batch& batch : plan.batches) {
      require(!batch.ids.empty() && std::ssize(batch.ids) <= batch_size,
              "batch size bounds");
      const char prefix = batch.modality == mixture::Modality::visual ? 'v' : 't';
      for (const std::string& id : batch.ids) {
        require(id[0] == prefix, "batch mixes modalities");
        require(seen.insert(id).second, "duplicate id across batches");
      }
    }
    require_eq(std::ssize(seen), visual + text, "batches must partition the mixture");
  }
}

void check_subsample() {
  const int n = 12345;
  std::vector<mixture::Conversation> mix;
  mix.reserve(n);
  for (int i = 0; i < n; ++i) {
    mixture::Conversation conv;
    conv.id = "m" + std::to_string(i);
    conv.turns = {{mixture::Role::human, "q"}, {mixture::Role::assistant, "a"}};
    mix.push_back(std::move(conv));
  }

  for (const double ratio : {0.1, 0.3, 0.5}) {
    const auto kept = mixture::subsample(mix, ratio, 99);
    require_eq(std::ssize(kept),
               std::llround(ratio * static_cast<double>(n)),
               "subsample size at ratio " + std::to_string(ratio));

    std::size_t cursor = 0;
    for (const mixture::Conversation& conv : kept) {
      while (cursor < mix.size() && mix[cursor].id != conv.id) {
        ++cursor;
      }
      require(cursor < mix.size(),
              "subsample output must be an order-preserving subset");
      ++cursor;
    }

    const auto again = mixture::subsample(mix, ratio, 99);
    require(kept == again, "subsample must be deterministic per seed");
  }
}

void check_eval_prompts() {
  const evalprompts::PromptRegistry registry = evalprompts::PromptRegistry::builtin();
  const std::string single = "Answer the question using a single word or phrase.";
  const std::string letter =
      "Answer with the option's letter from the given choices directly.";

  const std::vector<std::pair<std::string, std::optional<std::string>>> table = {
      {"VQAv2", single},
      {"GQA", single},
      {"VizWiz",
       "When the provided information is insufficient, respond with "
       "`Unanswerable'. Answer the question using a single word or phrase."},
      {"ScienceQA", letter},
      {"TextVQA", single},
      {"POPE", single},
      {"MME", single},
      {"MMBench", letter},
      {"SEED-Bench", letter},
      {"LLaVA-Bench", std::nullopt},
      {"MM-Vet", std::nullopt},
  };
  require_eq(registry.rules().size(), table.size(), "registry size");
  for (const auto& [benchmark, prompt] : table) {
    const std::optional<std::string>& actual = registry.eval_prompt(benchmark);
    require(actual == prompt, "prompt mismatch for " + benchmark);
  }
}

// ---------------------------------------------------------------------------

struct Check {
  int number;
  std::string name;
  double budget_seconds;  // 0: no stated budget
  std::function<void()> run;
};

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() /
                       ("vlmprep_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  std::cerr << "generating full-scale mixture fixture under " << dir << "...\n";
  const auto fixture_start = std::chrono::steady_clock::now();
  generate_fixture(dir);
  const double fixture_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - fixture_start)
          .count();
  std::cerr << "fixture ready in " << fixture_seconds << " s\n";

  MixtureContext ctx;
  ctx.dir = dir;
  ctx.manifest = fixture_manifest(dir);

  const std::vector<Check> checks = {
      {1, "candidate grid constants (max canvas 672x448)", 0.001,
       check_candidate_constants},
      {2, "resolution selection matches brute-force oracle on 10k dims", 5.0,
       check_selection_oracle},
      {3, "tiling/unpad/flatten invariants on 10k dims", 10.0,
       check_geometry_invariants},
      {4, "1000x600 worked example vs pixel-level padding oracle", 1.0,
       check_worked_example},
      {5, "mixture count algebra: 665,000 conversations at published sizes", 180.0,
       [&ctx] { check_count_algebra(ctx); }},
      {6, "compile determinism across reruns and thread counts", 360.0,
       [&ctx] { check_determinism(ctx); }},
      {7, "truncation budget and whole-round prefixes", 0.0, check_truncation},
      {8, "modality-homogeneous batch partition", 0.0, check_batching},
      {9, "subsample size/subset/determinism at 0.1, 0.3, 0.5", 0.0,
       check_subsample},
      {10, "evaluation prompt registry bytes", 0.0, check_eval_prompts},
  };

  int failures = 0;
  for (const Check& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      check.run();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (detail.empty() && check.budget_seconds > 0.0 &&
        seconds >= check.budget_seconds) {
      std::ostringstream over;
      over << "exceeded time budget of " << check.budget_seconds << " s";
      detail = over.str();
    }

    std::ostringstream line;
    line << (detail.empty() ? "[PASS] " : "[FAIL] ") << check.number << ". "
         << check.name << " (" << seconds << " s";
    if (check.budget_seconds > 0.0) {
      line << ", budget " << check.budget_seconds << " s";
    }
    line << ")";
    if (!detail.empty()) {
      line << " — " << detail;
      ++failures;
    }
    std::cout << line.str() << std::endl;
  }

  std::error_code ec;
  fs::remove_all(dir, ec);

  if (failures > 0) {
    std::cerr << failures << " acceptance check(s) failed\n";
    return 1;
  }
  return 0;
}
