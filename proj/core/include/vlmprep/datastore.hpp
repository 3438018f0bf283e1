#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlmprep/batching.hpp"
#include "vlmprep/featuremap.hpp"
#include "vlmprep/geometry.hpp"
#include "vlmprep/mixture.hpp"

namespace vlmprep::datastore {

// Parse or validation failure tied to one line of a record stream. what()
// reads "<path>:<line>: <message>".
class RecordError : public std::runtime_error {
 public:
  RecordError(const std::filesystem::path& path, std::size_t line,
              const std::string& message);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Manifest schema violation; the message carries the offending field path,
// e.g. datasets[3].cap.
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SHA-256 over the canonical serialized byte stream.
struct ContentHash {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  bool operator==(const ContentHash&) const = default;
};

// strict validates every conversation invariant and rejects unknown fields;
// structural only needs each line to decode into the record shape, leaving
// judgments about turn order, counts, and texts to downstream filters (raw
// chat corpora are read this way).
enum class RecordValidation { strict, structural };

// Record streams hold one JSON object per line with fields
// {id, source, modality, image?: {ref, width, height}, turns: [{role, text}]}.
// Roles "human"/"gpt" are accepted on read and normalized; writes always use
// "human"/"assistant". Writes are canonical — fixed key order, no float
// fields — so equal values give equal bytes and equal digests.
std::vector<mixture::Conversation> read_records(
    const std::filesystem::path& path,
    RecordValidation validation = RecordValidation::strict);

ContentHash write_records(std::span<const mixture::Conversation> convs,
                          const std::filesystem::path& path);

// One canonical line, no trailing newline.
std::string record_line(const mixture::Conversation& conv);

// Digest of the canonical stream without touching the filesystem; equals
// the write_records result for the same list.
ContentHash hash_records(std::span<const mixture::Conversation> convs);

// ---- raw dataset inputs, one JSONL shape per dataset kind ----

// {image, question, answer}
std::vector<mixture::QaRecord> read_qa_records(const std::filesystem::path& path);
// {image, question, choices, answer_index}
std::vector<mixture::McRecord> read_mc_records(const std::filesystem::path& path);
// {image, caption}
std::vector<mixture::CaptionRecord> read_caption_records(
    const std::filesystem::path& path);
// {image, phrase, x1, y1, x2, y2}
std::vector<mixture::RegionRecord> read_region_records(
    const std::filesystem::path& path);

// ---- manifests ----

mixture::MixtureManifest read_manifest(const std::filesystem::path& path);
std::string manifest_text(const mixture::MixtureManifest& manifest);
void write_manifest(const mixture::MixtureManifest& manifest,
                    const std::filesystem::path& path);

// ---- plan serialization ----

std::string to_json_text(const geometry::TilingPlan& plan);
std::string to_json_text(const featuremap::LayoutPlan& layout);
std::string to_json_text(const featuremap::TokenSequence& sequence);

// A batch plan serializes as a record stream: a header line
// {batch_count, batch_size, seed} followed by one line per batch
// {batch_index, ids, modality}.
std::string batch_header_line(const batching::BatchPlan& plan);
std::string batch_record_line(std::size_t batch_index, const batching::Batch& batch);

void write_plan(const geometry::TilingPlan& plan, const std::filesystem::path& path);
void write_plan(const featuremap::LayoutPlan& layout, const std::filesystem::path& path);
void write_plan(const batching::BatchPlan& plan, const std::filesystem::path& path);

}  // namespace vlmprep::datastore
