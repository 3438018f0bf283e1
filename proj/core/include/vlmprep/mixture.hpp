#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vlmprep/geometry.hpp"
#include "vlmprep/rng.hpp"

namespace vlmprep::mixture {

enum class Role { human, assistant };
enum class Modality { visual, text };

std::string_view to_string(Role role);
std::string_view to_string(Modality modality);

struct Turn {
  Role role = Role::human;
  std::string text;
  bool operator==(const Turn&) const = default;
};

struct ImageRef {
  std::string ref;
  geometry::ImageDim dim;
  bool operator==(const ImageRef&) const = default;
};

// One training sample. Well-formed conversations alternate human/assistant
// starting with human (so the turn count is even and at least two), carry no
// turn whose text trims to nothing, and are visual exactly when an image is
// attached.
struct Conversation {
  std::string id;
  std::string source;
  std::optional<ImageRef> image;
  Modality modality = Modality::text;
  std::vector<Turn> turns;
  bool operator==(const Conversation&) const = default;
};

// Returns a description of the first violated structural rule, or an empty
// string for a well-formed conversation.
std::string validate(const Conversation& conv);

struct MCQuestion {
  std::string question;
  std::vector<std::string> choices;  // at least two
  int answer_index = 0;              // into choices
  bool operator==(const MCQuestion&) const = default;
};

// One region grounding annotation: a pixel-space box on an image of size
// dim, (x1, y1) top-left through (x2, y2) bottom-right, strictly ordered
// per axis and inside the image.
struct RegionAnnotation {
  geometry::ImageDim dim;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  std::string phrase;
  bool operator==(const RegionAnnotation&) const = default;
};

// ---- raw record shapes, one per dataset kind ----

struct QaRecord {
  ImageRef image;
  std::string question;
  std::string answer;
  bool operator==(const QaRecord&) const = default;
};

struct McRecord {
  ImageRef image;
  MCQuestion question;
  bool operator==(const McRecord&) const = default;
};

struct CaptionRecord {
  ImageRef image;
  std::string caption;
  bool operator==(const CaptionRecord&) const = default;
};

struct RegionRecord {
  ImageRef image;
  RegionAnnotation annotation;
  bool operator==(const RegionRecord&) const = default;
};

// ---- response format prompts used at training time ----

inline constexpr std::string_view kShortAnswerPrompt =
    "Answer the question using a single word or phrase.";
inline constexpr std::string_view kOptionLetterPrompt =
    "Answer with the option's letter from the given choices directly.";
inline constexpr std::string_view kCaptionPrompt =
    "Provide a one-sentence caption for the provided image.";
inline constexpr std::string_view kRegionDescriptionPrompt =
    "Provide a short description for this region.";
inline constexpr std::string_view kRegionBoxPrompt =
    "Provide the bounding box coordinate of the region this sentence describes.";

// ---- token accounting ----

// count("") must be 0 and count(a+b) >= max(count(a), count(b)).
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::int64_t count(std::string_view text) const = 0;
};

// Counts whitespace-delimited chunks; a stand-in with the same interface a
// real tokenizer would implement.
class WhitespaceTokenCounter final : public TokenCounter {
 public:
  std::int64_t count(std::string_view text) const override;
};

const TokenCounter& default_token_counter();

// Sum over all turn texts.
std::int64_t conversation_tokens(const Conversation& conv,
                                 const TokenCounter& counter);

// ---- per-dataset transformation rules ----

// Appends "\n" + prompt to the text of every human turn; assistant turns
// are untouched. prompt must be non-empty.
Conversation inject_format_prompt(Conversation conv, std::string_view prompt);

// Folds all QA pairs that share an image ref into one multi-turn
// conversation per image: pairs keep input order, images appear in order of
// first occurrence. Result ids are the bare image refs; callers namespace
// them.
std::vector<Conversation> merge_qa_per_image(const std::vector<QaRecord>& records);

// Structural screen for raw chat data. Rejects a conversation when any turn
// text is empty after trimming, roles do not alternate human/assistant from
// a human start, the turn count is odd or below two, or an image is
// attached.
bool filter_text_chat(const Conversation& conv);

// Drops whole trailing (human, assistant) pairs until the total token count
// fits the limit; never splits inside a pair. Returns nullopt when even the
// first pair exceeds the limit.
std::optional<Conversation> truncate(Conversation conv,
                                     const TokenCounter& counter,
                                     std::int64_t limit);

// Expands one multiple-choice question into |choices| conversations, one per
// rotation of the choice list, so every choice letter is the correct answer
// exactly once across the group. Replica i shows choice (j+i) mod k under
// letter j; the human turn is the question, the lettered choices, then the
// prompt, each on its own line; the assistant turn is the answer letter
// alone. Result ids are the replica indices. The rotation schedule is fixed,
// so no seed is involved.
std::vector<Conversation> augment_mc(const MCQuestion& question,
                                     std::string_view prompt);

// Uniform sample without replacement down to cap, keeping input order.
// Inputs at or under the cap pass through untouched (and draw nothing from
// the generator).
template <typename T>
std::vector<T> cap_sample(std::vector<T> items, std::int64_t cap, Rng& rng) {
  if (cap < 1) {
    throw std::invalid_argument("cap_sample: cap must be positive");
  }
  if (std::ssize(items) <= cap) {
    return items;
  }
  const auto keep =
      sample_indices(items.size(), static_cast<std::size_t>(cap), rng);
  std::vector<T> out;
  out.reserve(keep.size());
  for (const std::size_t idx : keep) {
    out.push_back(std::move(items[idx]));
  }
  return out;
}

template <typename T>
std::vector<T> cap_sample(std::vector<T> items, std::int64_t cap,
                          std::uint64_t seed) {
  Rng rng(seed);
  return cap_sample(std::move(items), cap, rng);
}

// Splits a conversation into consecutive chunks of at most max_rounds rounds
// (a round is one human/assistant pair). The default bound of 9 keeps every
// chunk under ten rounds. Chunk ids get a "#k" suffix, k counted from 0,
// only when the split actually produces more than one chunk.
inline constexpr int kDefaultChunkRounds = 9;
std::vector<Conversation> chunk_rounds(const Conversation& conv,
                                       int max_rounds = kDefaultChunkRounds);

// "[x1, y1, x2, y2]" with each coordinate normalized by the image size and
// printed with three decimals. Throws on a degenerate or out-of-bounds box.
std::string format_box(const RegionAnnotation& ann);

enum class RegionTask { describe_region, locate_phrase };

// Renders one annotation as a single round: describe_region shows the box
// and asks for a description; locate_phrase shows the phrase and asks for
// the box. When task is nullopt the direction comes from one even coin draw
// (false picks describe_region). The image itself is attached by the caller.
Conversation format_region(const RegionAnnotation& ann,
                           std::optional<RegionTask> task, Rng& rng);
Conversation format_region(const RegionAnnotation& ann,
                           std::optional<RegionTask> task, std::uint64_t seed);

// ---- compiled mixtures ----

enum class DatasetKind { vqa_short, mc, caption, region, visual_chat, text_chat };

std::string_view to_string(DatasetKind kind);
std::optional<DatasetKind> dataset_kind_from(std::string_view name);
std::string_view to_string(RegionTask task);
std::optional<RegionTask> region_task_from(std::string_view name);

struct DatasetSpec {
  std::string name;
  DatasetKind kind = DatasetKind::vqa_short;
  std::string path;
  std::optional<std::string> format_prompt;
  std::optional<std::int64_t> cap;        // conversations kept after expansion
  std::optional<int> per_image_cap;       // region: annotations kept per image
  std::optional<int> chunk_max_rounds;    // region: rounds per chunk
  std::optional<bool> augment;            // mc: rotate through all choices (default on)
  std::optional<RegionTask> region_task;  // region: fixed direction override
  bool operator==(const DatasetSpec&) const = default;
};

struct MixtureManifest {
  std::uint64_t seed = 0;
  std::int64_t token_limit = 2048;
  std::vector<DatasetSpec> datasets;
  bool operator==(const MixtureManifest&) const = default;
};

// Rule violation discovered while compiling; the message names the dataset
// and, where known, the record.
class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompileOptions {
  int thread_count = 1;
  const TokenCounter* counter = nullptr;  // null: whitespace counter
};

// Builds the full training mixture: loads each dataset, applies its kind's
// rule chain, namespaces ids as "<dataset>/<suffix>", concatenates in
// manifest order, and applies one global shuffle. Every random decision is a
// pure function of manifest.seed and the dataset's manifest position, so
// reruns and thread counts cannot change the output.
std::vector<Conversation> compile(const MixtureManifest& manifest,
                                  const CompileOptions& options = {});

// Uniform subsample keeping relative order; ratio in (0, 1]. Output size is
// round(ratio * n).
std::vector<Conversation> subsample(const std::vector<Conversation>& mixture,
                                    double ratio, std::uint64_t seed);

// ---- summary statistics ----

inline constexpr int kHistogramBucketTokens = 128;

struct MixtureStats {
  std::int64_t total = 0;
  std::int64_t visual = 0;
  std::int64_t text = 0;
  std::map<std::string, std::int64_t> per_source;
  // Bucket i counts conversations whose token total lies in
  // [i * kHistogramBucketTokens, (i+1) * kHistogramBucketTokens).
  std::vector<std::int64_t> length_histogram;
  std::int64_t max_tokens = 0;
};

MixtureStats stats(const std::vector<Conversation>& mixture,
                   const TokenCounter& counter);

}  // namespace vlmprep::mixture
