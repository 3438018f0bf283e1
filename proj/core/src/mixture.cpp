#include "vlmprep/mixture.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace vlmprep::mixture {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool trims_empty(std::string_view text) {
  return std::all_of(text.begin(), text.end(), is_space);
}

}  // namespace

std::string_view to_string(Role role) {
  return role == Role::human ? "human" : "assistant";
}

std::string_view to_string(Modality modality) {
  return modality == Modality::visual ? "visual" : "text";
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::vqa_short: return "vqa_short";
    case DatasetKind::mc: return "mc";
    case DatasetKind::caption: return "caption";
    case DatasetKind::region: return "region";
    case DatasetKind::visual_chat: return "visual_chat";
    case DatasetKind::text_chat: return "text_chat";
  }
  return "unknown";
}

std::optional<DatasetKind> dataset_kind_from(std::string_view name) {
  if (name == "vqa_short") return DatasetKind::vqa_short;
  if (name == "mc") return DatasetKind::mc;
  if (name == "caption") return DatasetKind::caption;
  if (name == "region") return DatasetKind::region;
  if (name == "visual_chat") return DatasetKind::visual_chat;
  if (name == "text_chat") return DatasetKind::text_chat;
  return std::nullopt;
}

std::string_view to_string(RegionTask task) {
  return task == RegionTask::describe_region ? "describe_region" : "locate_phrase";
}

std::optional<RegionTask> region_task_from(std::string_view name) {
  if (name == "describe_region") return RegionTask::describe_region;
  if (name == "locate_phrase") return RegionTask::locate_phrase;
  return std::nullopt;
}

std::string validate(const Conversation& conv) {
  if (conv.id.empty()) {
    return "id: must not be empty";
  }
  const bool has_image = conv.image.has_value();
  if ((conv.modality == Modality::visual) != has_image) {
    return "modality: must be visual exactly when an image is attached";
  }
  if (has_image) {
    if (conv.image->ref.empty()) {
      return "image: ref must not be empty";
    }
    if (conv.image->dim.width < 1 || conv.image->dim.height < 1) {
      return "image: dimensions must be positive";
    }
  }
  if (conv.turns.size() < 2) {
    return "turns: fewer than two turns";
  }
  if (conv.turns.size() % 2 != 0) {
    return "turns: turn count must be even";
  }
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::human : Role::assistant;
    if (conv.turns[i].role != expected) {
      return "turns: must alternate human/assistant starting with human";
    }
    if (trims_empty(conv.turns[i].text)) {
      return "turns: turn text must not be empty";
    }
  }
  return {};
}

std::int64_t WhitespaceTokenCounter::count(std::string_view text) const {
  std::int64_t tokens = 0;
  bool in_token = false;
  for (const char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++tokens;
    }
  }
  return tokens;
}

const TokenCounter& default_token_counter() {
  static const WhitespaceTokenCounter counter;
  return counter;
}

std::int64_t conversation_tokens(const Conversation& conv,
                                 const TokenCounter& counter) {
  std::int64_t total = 0;
  for (const Turn& turn : conv.turns) {
    total += counter.count(turn.text);
  }
  return total;
}

Conversation inject_format_prompt(Conversation conv, std::string_view prompt) {
  if (prompt.empty()) {
    throw std::invalid_argument("inject_format_prompt: prompt must not be empty");
  }
  for (Turn& turn : conv.turns) {
    if (turn.role == Role::human) {
      turn.text.append(1, '\n').append(prompt);
    }
  }
  return conv;
}

std::vector<Conversation> merge_qa_per_image(const std::vector<QaRecord>& records) {
  std::vector<Conversation> out;
  std::unordered_map<std::string, std::size_t> by_ref;
  for (const QaRecord& record : records) {
    auto [it, inserted] = by_ref.try_emplace(record.image.ref, out.size());
    if (inserted) {
      Conversation conv;
      conv.id = record.image.ref;
      conv.image = record.image;
      conv.modality = Modality::visual;
      out.push_back(std::move(conv));
    } else if (out[it->second].image->dim != record.image.dim) {
      throw std::invalid_argument("merge_qa_per_image: image \"" + record.image.ref +
                                  "\" appears with differing dimensions");
    }
    Conversation& conv = out[it->second];
    conv.turns.push_back({Role::human, record.question});
    conv.turns.push_back({Role::assistant, record.answer});
  }
  return out;
}

bool filter_text_chat(const Conversation& conv) {
  if (conv.image.has_value()) {
    return false;
  }
  if (conv.turns.size() < 2 || conv.turns.size() % 2 != 0) {
    return false;
  }
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::human : Role::assistant;
    if (conv.turns[i].role != expected || trims_empty(conv.turns[i].text)) {
      return false;
    }
  }
  return true;
}

std::optional<Conversation> truncate(Conversation conv,
                                     const TokenCounter& counter,
                                     std::int64_t limit) {
  if (limit < 1) {
    throw std::invalid_argument("truncate: limit must be positive");
  }
  const std::size_t pairs = conv.turns.size() / 2;
  std::int64_t total = 0;
  std::size_t kept_pairs = 0;
  for (; kept_pairs < pairs; ++kept_pairs) {
    const std::int64_t pair_tokens =
        counter.count(conv.turns[kept_pairs * 2].text) +
        counter.count(conv.turns[kept_pairs * 2 + 1].text);
    if (total + pair_tokens > limit) {
      break;
    }
    total += pair_tokens;
  }
  if (kept_pairs == 0) {
    return std::nullopt;
  }
  conv.turns.resize(kept_pairs * 2);
  return conv;
}

std::vector<Conversation> augment_mc(const MCQuestion& question,
                                     std::string_view prompt) {
  const int k = static_cast<int>(question.choices.size());
  if (k < 2) {
    throw std::invalid_argument("augment_mc: at least two choices required");
  }
  if (k > 26) {
    throw std::invalid_argument("augment_mc: more choices than letters");
  }
  if (question.answer_index < 0 || question.answer_index >= k) {
    throw std::invalid_argument("augment_mc: answer_index out of range");
  }
  if (prompt.empty()) {
    throw std::invalid_argument("augment_mc: prompt must not be empty");
  }

  std::vector<Conversation> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    std::string human = question.question;
    for (int j = 0; j < k; ++j) {
      human.append(1, '\n');
      human.append(1, static_cast<char>('A' + j));
      human.append(". ");
      human.append(question.choices[static_cast<std::size_t>((j + i) % k)]);
    }
    human.append(1, '\n').append(prompt);

    // The correct choice sits at letter (answer_index - i) mod k in this
    // rotation, so the group answers A, B, ... each exactly once.
    const int letter = ((question.answer_index - i) % k + k) % k;

    Conversation conv;
    conv.id = std::to_string(i);
    conv.turns.push_back({Role::human, std::move(human)});
    conv.turns.push_back({Role::assistant, std::string(1, static_cast<char>('A' + letter))});
    out.push_back(std::move(conv));
  }
  return out;
}

std::vector<Conversation> chunk_rounds(const Conversation& conv, int max_rounds) {
  if (max_rounds < 1) {
    throw std::invalid_argument("chunk_rounds: max_rounds must be positive");
  }
  if (conv.turns.size() % 2 != 0) {
    throw std::invalid_argument("chunk_rounds: conversation has a dangling turn");
  }
  const std::size_t rounds = conv.turns.size() / 2;
  const std::size_t per_chunk = static_cast<std::size_t>(max_rounds);
  if (rounds <= per_chunk) {
    return {conv};
  }

  const std::size_t chunk_count = (rounds + per_chunk - 1) / per_chunk;
  std::vector<Conversation> out;
  out.reserve(chunk_count);
  for (std::size_t k = 0; k < chunk_count; ++k) {
    Conversation chunk;
    chunk.id = conv.id + "#" + std::to_string(k);
    chunk.source = conv.source;
    chunk.image = conv.image;
    chunk.modality = conv.modality;
    const std::size_t begin = k * per_chunk * 2;
    const std::size_t end = std::min(conv.turns.size(), (k + 1) * per_chunk * 2);
    chunk.turns.assign(conv.turns.begin() + static_cast<std::ptrdiff_t>(begin),
                       conv.turns.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(chunk));
  }
  return out;
}

std::string format_box(const RegionAnnotation& ann) {
  if (ann.dim.width < 1 || ann.dim.height < 1) {
    throw std::invalid_argument("format_box: image dimensions must be positive");
  }
  if (!(ann.x1 >= 0.0 && ann.x1 < ann.x2 && ann.x2 <= ann.dim.width) ||
      !(ann.y1 >= 0.0 && ann.y1 < ann.y2 && ann.y2 <= ann.dim.height)) {
    throw std::invalid_argument("format_box: degenerate or out-of-bounds box");
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "[%.3f, %.3f, %.3f, %.3f]",
                ann.x1 / ann.dim.width, ann.y1 / ann.dim.height,
                ann.x2 / ann.dim.width, ann.y2 / ann.dim.height);
  return buf;
}

Conversation format_region(const RegionAnnotation& ann,
                           std::optional<RegionTask> task, Rng& rng) {
  if (trims_empty(ann.phrase)) {
    throw std::invalid_argument("format_region: phrase must not be empty");
  }
  const std::string box = format_box(ann);
  const RegionTask chosen =
      task ? *task
           : (rng.next_bool() ? RegionTask::locate_phrase : RegionTask::describe_region);

  Conversation conv;
  if (chosen == RegionTask::describe_region) {
    conv.turns.push_back({Role::human, box + "\n" + std::string(kRegionDescriptionPrompt)});
    conv.turns.push_back({Role::assistant, ann.phrase});
  } else {
    conv.turns.push_back({Role::human, ann.phrase + "\n" + std::string(kRegionBoxPrompt)});
    conv.turns.push_back({Role::assistant, box});
  }
  return conv;
}

Conversation format_region(const RegionAnnotation& ann,
                           std::optional<RegionTask> task, std::uint64_t seed) {
  Rng rng(seed);
  return format_region(ann, task, rng);
}

std::vector<Conversation> subsample(const std::vector<Conversation>& mixture,
                                    double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("subsample: ratio must lie in (0, 1]");
  }
  const std::size_t n = mixture.size();
  const auto target = static_cast<std::size_t>(
      std::min<double>(std::llround(ratio * static_cast<double>(n)),
                       static_cast<double>(n)));
  Rng rng(seed);
  const auto keep = sample_indices(n, target, rng);
  std::vector<Conversation> out;
  out.reserve(keep.size());
  for (const std::size_t idx : keep) {
    out.push_back(mixture[idx]);
  }
  return out;
}

MixtureStats stats(const std::vector<Conversation>& mixture,
                   const TokenCounter& counter) {
  MixtureStats report;
  report.total = std::ssize(mixture);
  for (const Conversation& conv : mixture) {
    if (conv.modality == Modality::visual) {
      ++report.visual;
    } else {
      ++report.text;
    }
    ++report.per_source[conv.source];

    const std::int64_t tokens = conversation_tokens(conv, counter);
    report.max_tokens = std::max(report.max_tokens, tokens);
    const auto bucket = static_cast<std::size_t>(tokens / kHistogramBucketTokens);
    if (report.length_histogram.size() <= bucket) {
      report.length_histogram.resize(bucket + 1, 0);
    }
    ++report.length_histogram[bucket];
  }
  return report;
}

}  // namespace vlmprep::mixture
