#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vlmprep/batching.hpp"
#include "vlmprep/datastore.hpp"
#include "vlmprep/evalprompts.hpp"
#include "vlmprep/featuremap.hpp"
#include "vlmprep/geometry.hpp"
#include "vlmprep/mixture.hpp"

namespace {

namespace geometry = vlmprep::geometry;
namespace featuremap = vlmprep::featuremap;
namespace mixture = vlmprep::mixture;
namespace batching = vlmprep::batching;
namespace datastore = vlmprep::datastore;
namespace evalprompts = vlmprep::evalprompts;

void print_stats_lines(const mixture::MixtureStats& report, bool with_histogram,
                       std::ostream& out) {
  out << "total: " << report.total << '\n';
  out << "visual: " << report.visual << '\n';
  out << "text: " << report.text << '\n';
  if (with_histogram) {
    out << "max_tokens: " << report.max_tokens << '\n';
  }
  for (const auto& [source, count] : report.per_source) {
    out << "source " << source << ": " << count << '\n';
  }
  if (with_histogram) {
    for (std::size_t bucket = 0; bucket < report.length_histogram.size(); ++bucket) {
      if (report.length_histogram[bucket] == 0) {
        continue;
      }
      const auto lo = static_cast<std::int64_t>(bucket) * mixture::kHistogramBucketTokens;
      out << "tokens [" << lo << "," << lo + mixture::kHistogramBucketTokens
          << "): " << report.length_histogram[bucket] << '\n';
    }
  }
}

int run_plan(int width, int height, int tile_side) {
  geometry::CandidateSet candidates = geometry::default_candidates();
  candidates.tile_side = tile_side;
  featuremap::EncoderProfile profile;
  profile.tile_side = tile_side;

  const geometry::ImageDim image{width, height};
  const geometry::GridShape grid = geometry::select_resolution(image, candidates);
  const geometry::TilingPlan tiling = geometry::plan_tiling(image, grid, tile_side);
  const featuremap::LayoutPlan layout = featuremap::build_layout(tiling, profile);

  std::cout << "input:   " << width << "x" << height << '\n';
  std::cout << "grid:    " << grid.rows << "x" << grid.cols
            << " (rows x cols), tile side " << tile_side << '\n';
  std::cout << "canvas:  " << tiling.canvas.width << "x" << tiling.canvas.height << '\n';
  std::cout << "scaled:  " << tiling.scaled_content.width << "x"
            << tiling.scaled_content.height << '\n';
  std::cout << "padding: left " << tiling.pad_left << ", right " << tiling.pad_right
            << ", top " << tiling.pad_top << ", bottom " << tiling.pad_bottom << '\n';
  std::cout << "kept:    rows " << layout.kept_rows.start << ".."
            << layout.kept_rows.end() - 1 << " of " << layout.merged_rows << ", cols "
            << layout.kept_cols.start << ".." << layout.kept_cols.end() - 1 << " of "
            << layout.merged_cols << '\n';
  std::cout << "tokens:  " << layout.global_tokens << " global + "
            << layout.highres_tokens << " high-res = " << layout.total_tokens << '\n';

  nlohmann::json machine;
  machine["tiling"] = nlohmann::json::parse(datastore::to_json_text(tiling));
  machine["layout"] = nlohmann::json::parse(datastore::to_json_text(layout));
  std::cout << machine.dump() << '\n';
  return 0;
}

int run_budget(const std::string& in_path) {
  const auto records = datastore::read_records(in_path);
  const geometry::CandidateSet candidates = geometry::default_candidates();
  const featuremap::EncoderProfile profile;

  std::int64_t with_image = 0;
  std::int64_t total = 0;
  std::int64_t min_tokens = 0;
  std::int64_t max_tokens = 0;
  for (const mixture::Conversation& conv : records) {
    if (!conv.image) {
      continue;
    }
    const featuremap::LayoutPlan layout =
        featuremap::token_budget(conv.image->dim, candidates, profile);
    nlohmann::json line;
    line["id"] = conv.id;
    line["grid"] =
        nlohmann::json{{"rows", layout.grid.rows}, {"cols", layout.grid.cols}};
    line["total_tokens"] = layout.total_tokens;
    std::cout << line.dump() << '\n';

    if (with_image == 0 || layout.total_tokens < min_tokens) {
      min_tokens = layout.total_tokens;
    }
    max_tokens = std::max<std::int64_t>(max_tokens, layout.total_tokens);
    total += layout.total_tokens;
    ++with_image;
  }
  std::cerr << "records: " << records.size() << " (with image: " << with_image
            << ")\n";
  std::cerr << "tokens: min " << min_tokens << ", max " << max_tokens << ", total "
            << total << '\n';
  return 0;
}

int run_compile(const std::string& manifest_path, const std::string& out_path,
                std::optional<std::uint64_t> seed, int threads) {
  mixture::MixtureManifest manifest = datastore::read_manifest(manifest_path);
  if (seed) {
    manifest.seed = *seed;
  }
  mixture::CompileOptions options;
  options.thread_count = threads;
  const std::vector<mixture::Conversation> mix = mixture::compile(manifest, options);
  const datastore::ContentHash digest = datastore::write_records(mix, out_path);

  std::cout << "digest: " << digest.hex() << '\n';
  print_stats_lines(mixture::stats(mix, mixture::default_token_counter()),
                    /*with_histogram=*/false, std::cout);
  std::cerr << "wrote " << mix.size() << " records to " << out_path << '\n';
  return 0;
}

int run_stats(const std::string& in_path) {
  const auto records = datastore::read_records(in_path);
  print_stats_lines(mixture::stats(records, mixture::default_token_counter()),
                    /*with_histogram=*/true, std::cout);
  return 0;
}

int run_batches(const std::string& in_path, int batch_size, std::uint64_t seed,
                const std::string& out_path) {
  const auto records = datastore::read_records(in_path);
  const batching::BatchPlan plan = batching::plan_batches(records, batch_size, seed);
  if (out_path.empty()) {
    std::cout << datastore::batch_header_line(plan) << '\n';
    for (std::size_t i = 0; i < plan.batches.size(); ++i) {
      std::cout << datastore::batch_record_line(i, plan.batches[i]) << '\n';
    }
  } else {
    datastore::write_plan(plan, out_path);
  }
  std::cerr << "planned " << plan.batches.size() << " batches over "
            << records.size() << " records\n";
  return 0;
}

int run_subsample(const std::string& in_path, double ratio, std::uint64_t seed,
                  const std::string& out_path) {
  const auto records = datastore::read_records(in_path);
  const auto sampled = mixture::subsample(records, ratio, seed);
  if (out_path.empty()) {
    for (const mixture::Conversation& conv : sampled) {
      std::cout << datastore::record_line(conv) << '\n';
    }
  } else {
    const datastore::ContentHash digest = datastore::write_records(sampled, out_path);
    std::cout << "digest: " << digest.hex() << '\n';
    std::cout << "written: " << sampled.size() << '\n';
  }
  std::cerr << "kept " << sampled.size() << " of " << records.size() << " records\n";
  return 0;
}

int run_eval_prompt(const std::string& benchmark, const std::string& registry_path,
                    const std::string& export_path) {
  const evalprompts::PromptRegistry registry =
      registry_path.empty() ? evalprompts::PromptRegistry::builtin()
                            : evalprompts::PromptRegistry::load(registry_path);
  if (!export_path.empty()) {
    registry.save(export_path);
    std::cerr << "wrote registry with " << registry.rules().size()
              << " benchmarks to " << export_path << '\n';
  }
  if (!benchmark.empty()) {
    const std::optional<std::string>& prompt = registry.eval_prompt(benchmark);
    if (prompt) {
      std::cout << *prompt << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic image-tiling plans and instruction-data mixtures "
               "for high-resolution VLM training"};
  app.require_subcommand(1);

  // plan
  int width = 0;
  int height = 0;
  int tile_side = 224;
  CLI::App* plan_cmd =
      app.add_subcommand("plan", "Tiling plan and token budget for one image size");
  plan_cmd->add_option("--width", width, "image width in pixels")
      ->required()
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--height", height, "image height in pixels")
      ->required()
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--tile-side", tile_side, "tile side in pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // budget
  std::string budget_in;
  CLI::App* budget_cmd = app.add_subcommand(
      "budget", "Per-record visual-token budgets over a record stream");
  budget_cmd->add_option("--in", budget_in, "record stream path")->required();

  // compile
  std::string compile_manifest;
  std::string compile_out;
  std::uint64_t compile_seed = 0;
  int compile_threads = 1;
  CLI::App* compile_cmd =
      app.add_subcommand("compile", "Compile a training mixture from a manifest");
  compile_cmd->add_option("--manifest", compile_manifest, "manifest path")->required();
  compile_cmd->add_option("--out", compile_out, "output record stream path")
      ->required();
  CLI::Option* compile_seed_opt = compile_cmd->add_option(
      "--seed", compile_seed, "override the manifest seed");
  compile_cmd->add_option("--threads", compile_threads, "dataset-level parallelism")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // stats
  std::string stats_in;
  CLI::App* stats_cmd =
      app.add_subcommand("stats", "Summary statistics of a record stream");
  stats_cmd->add_option("--in", stats_in, "record stream path")->required();

  // batches
  std::string batches_in;
  std::string batches_out;
  int batch_size = 0;
  std::uint64_t batches_seed = 0;
  CLI::App* batches_cmd = app.add_subcommand(
      "batches", "Plan modality-homogeneous batches over a record stream");
  batches_cmd->add_option("--in", batches_in, "record stream path")->required();
  batches_cmd->add_option("--batch-size", batch_size, "conversations per batch")
      ->required()
      ->check(CLI::PositiveNumber);
  batches_cmd->add_option("--seed", batches_seed, "batch shuffling seed")->required();
  batches_cmd->add_option("--out", batches_out, "write the plan here instead of stdout");

  // subsample
  std::string subsample_in;
  std::string subsample_out;
  double ratio = 0.0;
  std::uint64_t subsample_seed = 0;
  CLI::App* subsample_cmd = app.add_subcommand(
      "subsample", "Uniformly subsample a record stream, keeping order");
  subsample_cmd->add_option("--in", subsample_in, "record stream path")->required();
  subsample_cmd->add_option("--ratio", ratio, "fraction to keep, in (0,1]")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  subsample_cmd->add_option("--seed", subsample_seed, "sampling seed")->required();
  subsample_cmd->add_option("--out", subsample_out,
                            "write records here instead of stdout");

  // eval-prompt
  std::string benchmark;
  std::string registry_path;
  std::string export_path;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval-prompt", "Response-format prompt for an evaluation benchmark");
  eval_cmd->add_option("--benchmark", benchmark, "benchmark name");
  eval_cmd->add_option("--registry", registry_path,
                       "load benchmark rules from this file instead of the built-ins");
  eval_cmd->add_option("--export", export_path, "write the active registry to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (plan_cmd->parsed()) {
      return run_plan(width, height, tile_side);
    }
    if (budget_cmd->parsed()) {
      return run_budget(budget_in);
    }
    if (compile_cmd->parsed()) {
      std::optional<std::uint64_t> seed;
      if (compile_seed_opt->count() > 0) {
        seed = compile_seed;
      }
      return run_compile(compile_manifest, compile_out, seed, compile_threads);
    }
    if (stats_cmd->parsed()) {
      return run_stats(stats_in);
    }
    if (batches_cmd->parsed()) {
      return run_batches(batches_in, batch_size, batches_seed, batches_out);
    }
    if (subsample_cmd->parsed()) {
      return run_subsample(subsample_in, ratio, subsample_seed, subsample_out);
    }
    if (eval_cmd->parsed()) {
      if (benchmark.empty() && export_path.empty()) {
        std::cerr << "eval-prompt: pass --benchmark and/or --export\n";
        return 1;
      }
      return run_eval_prompt(benchmark, registry_path, export_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
