#include <future>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "vlmprep/datastore.hpp"
#include "vlmprep/mixture.hpp"

namespace vlmprep::mixture {

namespace {

[[noreturn]] void fail(const DatasetSpec& spec, const std::string& message) {
  throw CompileError("dataset \"" + spec.name + "\": " + message);
}

std::string prompt_or(const DatasetSpec& spec, std::string_view fallback) {
  return spec.format_prompt ? *spec.format_prompt : std::string(fallback);
}

std::vector<Conversation> compile_vqa_short(const DatasetSpec& spec, Rng& rng) {
  std::vector<Conversation> convs =
      merge_qa_per_image(datastore::read_qa_records(spec.path));
  if (spec.cap) {
    convs = cap_sample(std::move(convs), *spec.cap, rng);
  }
  if (spec.format_prompt) {
    for (Conversation& conv : convs) {
      conv = inject_format_prompt(std::move(conv), *spec.format_prompt);
    }
  }
  return convs;
}

std::vector<Conversation> compile_mc(const DatasetSpec& spec, Rng& rng) {
  const std::vector<McRecord> records = datastore::read_mc_records(spec.path);
  const std::string prompt = prompt_or(spec, kOptionLetterPrompt);
  const bool augment = spec.augment.value_or(true);

  std::vector<Conversation> convs;
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    std::vector<Conversation> group = augment_mc(records[idx].question, prompt);
    if (!augment) {
      group.resize(1);
    }
    for (Conversation& conv : group) {
      conv.image = records[idx].image;
      conv.modality = Modality::visual;
      conv.id = augment ? "q" + std::to_string(idx) + "#" + conv.id
                        : "q" + std::to_string(idx);
      convs.push_back(std::move(conv));
    }
  }
  if (spec.cap) {
    convs = cap_sample(std::move(convs), *spec.cap, rng);
  }
  return convs;
}

std::vector<Conversation> compile_caption(const DatasetSpec& spec, Rng& rng) {
  const std::vector<CaptionRecord> records =
      datastore::read_caption_records(spec.path);
  const std::string prompt = prompt_or(spec, kCaptionPrompt);

  std::vector<Conversation> convs;
  convs.reserve(records.size());
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    Conversation conv;
    conv.id = std::to_string(idx);
    conv.image = records[idx].image;
    conv.modality = Modality::visual;
    conv.turns.push_back({Role::human, prompt});
    conv.turns.push_back({Role::assistant, records[idx].caption});
    convs.push_back(std::move(conv));
  }
  if (spec.cap) {
    convs = cap_sample(std::move(convs), *spec.cap, rng);
  }
  return convs;
}

std::vector<Conversation> compile_region(const DatasetSpec& spec, Rng& rng) {
  std::vector<RegionRecord> records = datastore::read_region_records(spec.path);

  // Group annotations per image, images in first-appearance order.
  std::vector<std::pair<ImageRef, std::vector<RegionAnnotation>>> groups;
  std::unordered_map<std::string, std::size_t> by_ref;
  for (RegionRecord& record : records) {
    auto [it, inserted] = by_ref.try_emplace(record.image.ref, groups.size());
    if (inserted) {
      groups.push_back({record.image, {}});
    } else if (groups[it->second].first.dim != record.image.dim) {
      fail(spec, "image \"" + record.image.ref + "\" appears with differing dimensions");
    }
    groups[it->second].second.push_back(std::move(record.annotation));
  }

  std::vector<Conversation> convs;
  for (auto& [image, annotations] : groups) {
    std::vector<RegionAnnotation> kept = std::move(annotations);
    if (spec.per_image_cap) {
      kept = cap_sample(std::move(kept), *spec.per_image_cap, rng);
    }

    Conversation conv;
    conv.id = image.ref;
    conv.image = image;
    conv.modality = Modality::visual;
    for (const RegionAnnotation& ann : kept) {
      Conversation round = format_region(ann, spec.region_task, rng);
      conv.turns.insert(conv.turns.end(),
                        std::make_move_iterator(round.turns.begin()),
                        std::make_move_iterator(round.turns.end()));
    }

    std::vector<Conversation> chunks =
        spec.chunk_max_rounds ? chunk_rounds(conv, *spec.chunk_max_rounds)
                              : std::vector<Conversation>{std::move(conv)};
    for (Conversation& chunk : chunks) {
      if (spec.format_prompt) {
        chunk = inject_format_prompt(std::move(chunk), *spec.format_prompt);
      }
      convs.push_back(std::move(chunk));
    }
  }
  if (spec.cap) {
    convs = cap_sample(std::move(convs), *spec.cap, rng);
  }
  return convs;
}

std::vector<Conversation> compile_visual_chat(const DatasetSpec& spec, Rng& rng) {
  std::vector<Conversation> convs =
      datastore::read_records(spec.path, datastore::RecordValidation::strict);
  for (const Conversation& conv : convs) {
    if (!conv.image) {
      fail(spec, "record \"" + conv.id + "\" has no image");
    }
  }
  if (spec.cap) {
    convs = cap_sample(std::move(convs), *spec.cap, rng);
  }
  if (spec.format_prompt) {
    for (Conversation& conv : convs) {
      conv = inject_format_prompt(std::move(conv), *spec.format_prompt);
    }
  }
  return convs;
}

std::vector<Conversation> compile_text_chat(const DatasetSpec& spec, Rng& rng,
                                            const TokenCounter& counter,
                                            std::int64_t token_limit) {
  std::vector<Conversation> raw =
      datastore::read_records(spec.path, datastore::RecordValidation::structural);
  if (spec.cap) {
    raw = cap_sample(std::move(raw), *spec.cap, rng);
  }
  std::vector<Conversation> convs;
  convs.reserve(raw.size());
  for (Conversation& conv : raw) {
    if (spec.format_prompt) {
      conv = inject_format_prompt(std::move(conv), *spec.format_prompt);
    }
    if (!filter_text_chat(conv)) {
      continue;
    }
    if (std::optional<Conversation> fit = truncate(std::move(conv), counter, token_limit)) {
      convs.push_back(std::move(*fit));
    }
  }
  return convs;
}

std::vector<Conversation> run_dataset(const DatasetSpec& spec, std::size_t index,
                                      const MixtureManifest& manifest,
                                      const TokenCounter& counter) {
  // One generator per dataset, derived from the manifest seed and the
  // dataset's position; adding datasets or threads cannot perturb siblings.
  Rng rng(derive_seed(manifest.seed, index + 1));

  std::vector<Conversation> convs;
  try {
    switch (spec.kind) {
      case DatasetKind::vqa_short:
        convs = compile_vqa_short(spec, rng);
        break;
      case DatasetKind::mc:
        convs = compile_mc(spec, rng);
        break;
      case DatasetKind::caption:
        convs = compile_caption(spec, rng);
        break;
      case DatasetKind::region:
        convs = compile_region(spec, rng);
        break;
      case DatasetKind::visual_chat:
        convs = compile_visual_chat(spec, rng);
        break;
      case DatasetKind::text_chat:
        convs = compile_text_chat(spec, rng, counter, manifest.token_limit);
        break;
    }
  } catch (const CompileError&) {
    throw;
  } catch (const std::exception& e) {
    fail(spec, e.what());
  }

  for (Conversation& conv : convs) {
    conv.source = spec.name;
    conv.id = spec.name + "/" + conv.id;
    conv.modality = conv.image ? Modality::visual : Modality::text;
    if (const std::string problem = validate(conv); !problem.empty()) {
      fail(spec, "conversation \"" + conv.id + "\": " + problem);
    }
  }
  return convs;
}

void require_manifest(const MixtureManifest& manifest) {
  std::unordered_set<std::string_view> names;
  for (const DatasetSpec& spec : manifest.datasets) {
    if (spec.name.empty()) {
      throw CompileError("dataset name must not be empty");
    }
    if (!names.insert(spec.name).second) {
      throw CompileError("duplicate dataset name \"" + spec.name + "\"");
    }
    if (spec.path.empty()) {
      fail(spec, "path must not be empty");
    }
    if ((spec.cap && *spec.cap < 1) || (spec.per_image_cap && *spec.per_image_cap < 1) ||
        (spec.chunk_max_rounds && *spec.chunk_max_rounds < 1)) {
      fail(spec, "caps must be positive");
    }
    if (spec.format_prompt && spec.format_prompt->empty()) {
      fail(spec, "format_prompt must not be empty");
    }
  }
  if (manifest.token_limit < 1) {
    throw CompileError("token_limit must be positive");
  }
}

}  // namespace

std::vector<Conversation> compile(const MixtureManifest& manifest,
                                  const CompileOptions& options) {
  require_manifest(manifest);
  const TokenCounter& counter =
      options.counter != nullptr ? *options.counter : default_token_counter();

  const std::size_t dataset_count = manifest.datasets.size();
  std::vector<std::vector<Conversation>> parts(dataset_count);
  const std::size_t threads =
      static_cast<std::size_t>(std::max(1, options.thread_count));

  if (threads == 1 || dataset_count <= 1) {
    for (std::size_t i = 0; i < dataset_count; ++i) {
      parts[i] = run_dataset(manifest.datasets[i], i, manifest, counter);
    }
  } else {
    // Waves of at most thread_count datasets; results land by index, so the
    // concatenation below follows manifest order regardless of timing.
    for (std::size_t begin = 0; begin < dataset_count; begin += threads) {
      const std::size_t end = std::min(dataset_count, begin + threads);
      std::vector<std::future<std::vector<Conversation>>> wave;
      wave.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        wave.push_back(std::async(std::launch::async, run_dataset,
                                  std::cref(manifest.datasets[i]), i,
                                  std::cref(manifest), std::cref(counter)));
      }
      for (std::size_t i = begin; i < end; ++i) {
        parts[i] = wave[i - begin].get();
      }
    }
  }

  std::size_t total = 0;
  for (const auto& part : parts) {
    total += part.size();
  }
  std::vector<Conversation> all;
  all.reserve(total);
  for (auto& part : parts) {
    for (Conversation& conv : part) {
      all.push_back(std::move(conv));
    }
  }

  std::unordered_set<std::string_view> ids;
  ids.reserve(all.size());
  for (const Conversation& conv : all) {
    if (!ids.insert(conv.id).second) {
      throw CompileError("duplicate conversation id \"" + conv.id + "\"");
    }
  }

  Rng shuffle_rng(derive_seed(manifest.seed, 0));
  shuffle(all, shuffle_rng);
  return all;
}

}  // namespace vlmprep::mixture
