#include "vlmprep/datastore.hpp"

#include <climits>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace vlmprep::datastore {

namespace {

using nlohmann::json;

// Incremental SHA-256 over canonical bytes.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr ||
        EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: init failed");
    }
  }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  ~Sha256() { EVP_MD_CTX_free(ctx_); }

  void update(std::string_view bytes) {
    if (EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()) != 1) {
      throw std::runtime_error("sha256: update failed");
    }
  }

  ContentHash finish() {
    ContentHash hash;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, hash.bytes.data(), &len) != 1 ||
        len != hash.bytes.size()) {
      throw std::runtime_error("sha256: final failed");
    }
    return hash;
  }

 private:
  EVP_MD_CTX* ctx_;
};

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& message) {
  throw RecordError(path, line, message);
}

std::string require_string(const json& obj, const char* key,
                           const std::filesystem::path& path, std::size_t line,
                           bool allow_empty = false) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    fail(path, line, std::string(key) + ": must be a string");
  }
  std::string value = obj[key].get<std::string>();
  if (value.empty() && !allow_empty) {
    fail(path, line, std::string(key) + ": must not be empty");
  }
  return value;
}

int require_positive_int(const json& obj, const char* key,
                         const std::filesystem::path& path, std::size_t line) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    fail(path, line, std::string(key) + ": must be an integer");
  }
  const std::int64_t value = obj[key].get<std::int64_t>();
  if (value < 1 || value > INT_MAX) {
    fail(path, line, std::string(key) + ": must be a positive integer");
  }
  return static_cast<int>(value);
}

double require_number(const json& obj, const char* key,
                      const std::filesystem::path& path, std::size_t line) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    fail(path, line, std::string(key) + ": must be a number");
  }
  return obj[key].get<double>();
}

mixture::ImageRef parse_image(const json& obj,
                              const std::filesystem::path& path,
                              std::size_t line, bool reject_unknown) {
  if (!obj.is_object()) {
    fail(path, line, "image: must be an object");
  }
  mixture::ImageRef image;
  image.ref = require_string(obj, "ref", path, line);
  image.dim.width = require_positive_int(obj, "width", path, line);
  image.dim.height = require_positive_int(obj, "height", path, line);
  if (reject_unknown) {
    for (const auto& [key, value] : obj.items()) {
      if (key != "ref" && key != "width" && key != "height") {
        fail(path, line, "image: unknown field \"" + key + "\"");
      }
    }
  }
  return image;
}

mixture::ImageRef require_image(const json& obj,
                                const std::filesystem::path& path,
                                std::size_t line) {
  if (!obj.contains("image")) {
    fail(path, line, "image: missing");
  }
  return parse_image(obj["image"], path, line, false);
}

mixture::Conversation parse_record(const json& obj, RecordValidation validation,
                                   const std::filesystem::path& path,
                                   std::size_t line) {
  if (!obj.is_object()) {
    fail(path, line, "record must be a JSON object");
  }
  const bool strict = validation == RecordValidation::strict;
  if (strict) {
    for (const auto& [key, value] : obj.items()) {
      if (key != "id" && key != "source" && key != "modality" && key != "image" &&
          key != "turns") {
        fail(path, line, "unknown field \"" + key + "\"");
      }
    }
  }

  mixture::Conversation conv;
  conv.id = require_string(obj, "id", path, line);

  if (strict || obj.contains("source")) {
    conv.source = require_string(obj, "source", path, line, /*allow_empty=*/true);
  }
  if (obj.contains("image")) {
    conv.image = parse_image(obj["image"], path, line, strict);
  }

  if (strict || obj.contains("modality")) {
    const std::string modality = require_string(obj, "modality", path, line);
    if (modality == "visual") {
      conv.modality = mixture::Modality::visual;
    } else if (modality == "text") {
      conv.modality = mixture::Modality::text;
    } else {
      fail(path, line, "modality: must be \"visual\" or \"text\"");
    }
  } else {
    conv.modality = conv.image ? mixture::Modality::visual : mixture::Modality::text;
  }

  if (!obj.contains("turns") || !obj["turns"].is_array()) {
    fail(path, line, "turns: must be an array");
  }
  for (const json& entry : obj["turns"]) {
    if (!entry.is_object()) {
      fail(path, line, "turns: every turn must be an object");
    }
    if (strict) {
      for (const auto& [key, value] : entry.items()) {
        if (key != "role" && key != "text") {
          fail(path, line, "turns: unknown field \"" + key + "\"");
        }
      }
    }
    const std::string role = require_string(entry, "role", path, line);
    mixture::Turn turn;
    if (role == "human") {
      turn.role = mixture::Role::human;
    } else if (role == "gpt" || role == "assistant") {
      turn.role = mixture::Role::assistant;
    } else {
      fail(path, line, "turns: unknown role \"" + role + "\"");
    }
    turn.text = require_string(entry, "text", path, line, /*allow_empty=*/true);
    conv.turns.push_back(std::move(turn));
  }

  if (strict) {
    if (const std::string problem = mixture::validate(conv); !problem.empty()) {
      fail(path, line, problem);
    }
  }
  return conv;
}

// Opens a JSONL file and hands each parsed line to sink(json, line_number).
template <typename Sink>
void for_each_line(const std::filesystem::path& path, Sink&& sink) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      fail(path, line_no, "empty line");
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    sink(obj, line_no);
  }
}

json dim_json(const geometry::ImageDim& dim) {
  return json{{"width", dim.width}, {"height", dim.height}};
}

json grid_json(const geometry::GridShape& grid) {
  return json{{"rows", grid.rows}, {"cols", grid.cols}};
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << text << '\n';
  if (!out.good()) {
    throw std::runtime_error("failed writing file: " + path.string());
  }
}

}  // namespace

RecordError::RecordError(const std::filesystem::path& path, std::size_t line,
                         const std::string& message)
    : std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + message),
      line_(line) {}

std::string ContentHash::hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<mixture::Conversation> read_records(const std::filesystem::path& path,
                                                RecordValidation validation) {
  std::vector<mixture::Conversation> out;
  for_each_line(path, [&](const json& obj, std::size_t line) {
    out.push_back(parse_record(obj, validation, path, line));
  });
  return out;
}

std::string record_line(const mixture::Conversation& conv) {
  json obj;
  obj["id"] = conv.id;
  obj["source"] = conv.source;
  obj["modality"] = mixture::to_string(conv.modality);
  if (conv.image) {
    obj["image"] = json{{"ref", conv.image->ref},
                        {"width", conv.image->dim.width},
                        {"height", conv.image->dim.height}};
  }
  json turns = json::array();
  for (const mixture::Turn& turn : conv.turns) {
    turns.push_back(json{{"role", mixture::to_string(turn.role)}, {"text", turn.text}});
  }
  obj["turns"] = std::move(turns);
  // json objects serialize with sorted keys and no whitespace: one canonical
  // byte sequence per logical record.
  return obj.dump();
}

ContentHash write_records(std::span<const mixture::Conversation> convs,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  Sha256 digest;
  for (const mixture::Conversation& conv : convs) {
    std::string line = record_line(conv);
    line.push_back('\n');
    digest.update(line);
    out << line;
  }
  out.flush();
  if (!out.good()) {
    throw std::runtime_error("failed writing file: " + path.string());
  }
  return digest.finish();
}

ContentHash hash_records(std::span<const mixture::Conversation> convs) {
  Sha256 digest;
  for (const mixture::Conversation& conv : convs) {
    std::string line = record_line(conv);
    line.push_back('\n');
    digest.update(line);
  }
  return digest.finish();
}

std::vector<mixture::QaRecord> read_qa_records(const std::filesystem::path& path) {
  std::vector<mixture::QaRecord> out;
  for_each_line(path, [&](const json& obj, std::size_t line) {
    if (!obj.is_object()) {
      fail(path, line, "record must be a JSON object");
    }
    mixture::QaRecord record;
    record.image = require_image(obj, path, line);
    record.question = require_string(obj, "question", path, line);
    record.answer = require_string(obj, "answer", path, line);
    out.push_back(std::move(record));
  });
  return out;
}

std::vector<mixture::McRecord> read_mc_records(const std::filesystem::path& path) {
  std::vector<mixture::McRecord> out;
  for_each_line(path, [&](const json& obj, std::size_t line) {
    if (!obj.is_object()) {
      fail(path, line, "record must be a JSON object");
    }
    mixture::McRecord record;
    record.image = require_image(obj, path, line);
    record.question.question = require_string(obj, "question", path, line);

    if (!obj.contains("choices") || !obj["choices"].is_array()) {
      fail(path, line, "choices: must be an array");
    }
    for (const json& choice : obj["choices"]) {
      if (!choice.is_string() || choice.get<std::string>().empty()) {
        fail(path, line, "choices: every choice must be a non-empty string");
      }
      record.question.choices.push_back(choice.get<std::string>());
    }
    if (record.question.choices.size() < 2) {
      fail(path, line, "choices: at least two choices required");
    }
    if (record.question.choices.size() > 26) {
      fail(path, line, "choices: more choices than letters");
    }

    if (!obj.contains("answer_index") || !obj["answer_index"].is_number_integer()) {
      fail(path, line, "answer_index: must be an integer");
    }
    const std::int64_t answer = obj["answer_index"].get<std::int64_t>();
    if (answer < 0 || answer >= std::ssize(record.question.choices)) {
      fail(path, line, "answer_index: out of range");
    }
    record.question.answer_index = static_cast<int>(answer);
    out.push_back(std::move(record));
  });
  return out;
}

std::vector<mixture::CaptionRecord> read_caption_records(
    const std::filesystem::path& path) {
  std::vector<mixture::CaptionRecord> out;
  for_each_line(path, [&](const json& obj, std::size_t line) {
    if (!obj.is_object()) {
      fail(path, line, "record must be a JSON object");
    }
    mixture::CaptionRecord record;
    record.image = require_image(obj, path, line);
    record.caption = require_string(obj, "caption", path, line);
    out.push_back(std::move(record));
  });
  return out;
}

std::vector<mixture::RegionRecord> read_region_records(
    const std::filesystem::path& path) {
  std::vector<mixture::RegionRecord> out;
  for_each_line(path, [&](const json& obj, std::size_t line) {
    if (!obj.is_object()) {
      fail(path, line, "record must be a JSON object");
    }
    mixture::RegionRecord record;
    record.image = require_image(obj, path, line);
    record.annotation.dim = record.image.dim;
    record.annotation.phrase = require_string(obj, "phrase", path, line);
    record.annotation.x1 = require_number(obj, "x1", path, line);
    record.annotation.y1 = require_number(obj, "y1", path, line);
    record.annotation.x2 = require_number(obj, "x2", path, line);
    record.annotation.y2 = require_number(obj, "y2", path, line);

    const mixture::RegionAnnotation& a = record.annotation;
    if (!(a.x1 >= 0.0 && a.x1 < a.x2 && a.x2 <= a.dim.width) ||
        !(a.y1 >= 0.0 && a.y1 < a.y2 && a.y2 <= a.dim.height)) {
      fail(path, line, "bbox: corners must be ordered and inside the image");
    }
    out.push_back(std::move(record));
  });
  return out;
}

mixture::MixtureManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ManifestError("manifest: cannot open " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ManifestError("manifest: invalid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) {
    throw ManifestError("manifest: root must be an object");
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "seed" && key != "token_limit" && key != "datasets") {
      throw ManifestError("manifest: unknown field \"" + key + "\"");
    }
  }

  mixture::MixtureManifest manifest;

  if (!doc.contains("seed") || !doc["seed"].is_number_integer() ||
      (doc["seed"].is_number_integer() && !doc["seed"].is_number_unsigned() &&
       doc["seed"].get<std::int64_t>() < 0)) {
    throw ManifestError("seed: must be a non-negative integer");
  }
  manifest.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("token_limit")) {
    if (!doc["token_limit"].is_number_integer() ||
        doc["token_limit"].get<std::int64_t>() < 1) {
      throw ManifestError("token_limit: must be a positive integer");
    }
    manifest.token_limit = doc["token_limit"].get<std::int64_t>();
  }

  if (!doc.contains("datasets") || !doc["datasets"].is_array()) {
    throw ManifestError("datasets: must be an array");
  }

  std::unordered_set<std::string> names;
  std::size_t index = 0;
  for (const json& entry : doc["datasets"]) {
    const std::string where = "datasets[" + std::to_string(index) + "]";
    ++index;
    if (!entry.is_object()) {
      throw ManifestError(where + ": must be an object");
    }

    mixture::DatasetSpec spec;
    const auto field_string = [&](const char* key) {
      if (!entry.contains(key) || !entry[key].is_string() ||
          entry[key].get<std::string>().empty()) {
        throw ManifestError(where + "." + key + ": must be a non-empty string");
      }
      return entry[key].get<std::string>();
    };

    spec.name = field_string("name");
    if (!names.insert(spec.name).second) {
      throw ManifestError(where + ".name: duplicate dataset name \"" + spec.name + "\"");
    }
    const std::string kind = field_string("kind");
    const auto parsed_kind = mixture::dataset_kind_from(kind);
    if (!parsed_kind) {
      throw ManifestError(where + ".kind: unknown kind \"" + kind + "\"");
    }
    spec.kind = *parsed_kind;
    spec.path = field_string("path");

    for (const auto& [key, value] : entry.items()) {
      if (key == "name" || key == "kind" || key == "path") {
        continue;
      }
      if (key == "format_prompt") {
        if (!value.is_string() || value.get<std::string>().empty()) {
          throw ManifestError(where + ".format_prompt: must be a non-empty string");
        }
        spec.format_prompt = value.get<std::string>();
      } else if (key == "cap") {
        if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
          throw ManifestError(where + ".cap: must be a positive integer");
        }
        spec.cap = value.get<std::int64_t>();
      } else if (key == "per_image_cap") {
        if (spec.kind != mixture::DatasetKind::region) {
          throw ManifestError(where + ".per_image_cap: only valid for region datasets");
        }
        if (!value.is_number_integer() || value.get<std::int64_t>() < 1 ||
            value.get<std::int64_t>() > INT_MAX) {
          throw ManifestError(where + ".per_image_cap: must be a positive integer");
        }
        spec.per_image_cap = static_cast<int>(value.get<std::int64_t>());
      } else if (key == "chunk_max_rounds") {
        if (spec.kind != mixture::DatasetKind::region) {
          throw ManifestError(where + ".chunk_max_rounds: only valid for region datasets");
        }
        if (!value.is_number_integer() || value.get<std::int64_t>() < 1 ||
            value.get<std::int64_t>() > INT_MAX) {
          throw ManifestError(where + ".chunk_max_rounds: must be a positive integer");
        }
        spec.chunk_max_rounds = static_cast<int>(value.get<std::int64_t>());
      } else if (key == "augment") {
        if (spec.kind != mixture::DatasetKind::mc) {
          throw ManifestError(where + ".augment: only valid for mc datasets");
        }
        if (!value.is_boolean()) {
          throw ManifestError(where + ".augment: must be a boolean");
        }
        spec.augment = value.get<bool>();
      } else if (key == "region_task") {
        if (spec.kind != mixture::DatasetKind::region) {
          throw ManifestError(where + ".region_task: only valid for region datasets");
        }
        if (!value.is_string() || !mixture::region_task_from(value.get<std::string>())) {
          throw ManifestError(where +
                              ".region_task: must be \"describe_region\" or "
                              "\"locate_phrase\"");
        }
        spec.region_task = mixture::region_task_from(value.get<std::string>());
      } else {
        throw ManifestError(where + ": unknown field \"" + key + "\"");
      }
    }
    manifest.datasets.push_back(std::move(spec));
  }
  return manifest;
}

std::string manifest_text(const mixture::MixtureManifest& manifest) {
  json doc;
  doc["seed"] = manifest.seed;
  doc["token_limit"] = manifest.token_limit;
  json datasets = json::array();
  for (const mixture::DatasetSpec& spec : manifest.datasets) {
    json entry;
    entry["name"] = spec.name;
    entry["kind"] = std::string(mixture::to_string(spec.kind));
    entry["path"] = spec.path;
    if (spec.format_prompt) entry["format_prompt"] = *spec.format_prompt;
    if (spec.cap) entry["cap"] = *spec.cap;
    if (spec.per_image_cap) entry["per_image_cap"] = *spec.per_image_cap;
    if (spec.chunk_max_rounds) entry["chunk_max_rounds"] = *spec.chunk_max_rounds;
    if (spec.augment) entry["augment"] = *spec.augment;
    if (spec.region_task) {
      entry["region_task"] = std::string(mixture::to_string(*spec.region_task));
    }
    datasets.push_back(std::move(entry));
  }
  doc["datasets"] = std::move(datasets);
  return doc.dump(2);
}

void write_manifest(const mixture::MixtureManifest& manifest,
                    const std::filesystem::path& path) {
  write_text(manifest_text(manifest), path);
}

std::string to_json_text(const geometry::TilingPlan& plan) {
  json obj;
  obj["input"] = dim_json(plan.input);
  obj["grid"] = grid_json(plan.grid);
  obj["canvas"] = dim_json(plan.canvas);
  obj["scaled_content"] = dim_json(plan.scaled_content);
  obj["padding"] = json{{"left", plan.pad_left},
                        {"right", plan.pad_right},
                        {"top", plan.pad_top},
                        {"bottom", plan.pad_bottom}};
  obj["tile_side"] = plan.tile_side();
  json tiles = json::array();
  for (const geometry::TileRect& tile : plan.tiles) {
    tiles.push_back(json{
        {"x", tile.x}, {"y", tile.y}, {"width", tile.width}, {"height", tile.height}});
  }
  obj["tiles"] = std::move(tiles);
  return obj.dump();
}

std::string to_json_text(const featuremap::LayoutPlan& layout) {
  json obj;
  obj["grid"] = grid_json(layout.grid);
  obj["merged_rows"] = layout.merged_rows;
  obj["merged_cols"] = layout.merged_cols;
  obj["kept_row_start"] = layout.kept_rows.start;
  obj["kept_row_count"] = layout.kept_rows.count;
  obj["kept_col_start"] = layout.kept_cols.start;
  obj["kept_col_count"] = layout.kept_cols.count;
  obj["row_end_count"] = layout.row_end_count;
  obj["global_tokens"] = layout.global_tokens;
  obj["highres_tokens"] = layout.highres_tokens;
  obj["total_tokens"] = layout.total_tokens;
  return obj.dump();
}

std::string to_json_text(const featuremap::TokenSequence& sequence) {
  json items = json::array();
  for (const featuremap::TokenItem& item : sequence.items) {
    if (const auto* global = std::get_if<featuremap::GlobalFeature>(&item)) {
      items.push_back(json{{"type", "global"}, {"index", global->index}});
    } else if (const auto* grid = std::get_if<featuremap::GridFeature>(&item)) {
      items.push_back(json{{"type", "grid"}, {"row", grid->row}, {"col", grid->col}});
    } else {
      const auto& row_end = std::get<featuremap::RowEnd>(item);
      items.push_back(json{{"type", featuremap::kRowEndName}, {"row", row_end.row}});
    }
  }
  json obj;
  obj["items"] = std::move(items);
  return obj.dump();
}

std::string batch_header_line(const batching::BatchPlan& plan) {
  json obj;
  obj["batch_count"] = plan.batches.size();
  obj["batch_size"] = plan.batch_size;
  obj["seed"] = plan.seed;
  return obj.dump();
}

std::string batch_record_line(std::size_t batch_index, const batching::Batch& batch) {
  json obj;
  obj["batch_index"] = batch_index;
  obj["modality"] = mixture::to_string(batch.modality);
  obj["ids"] = batch.ids;
  return obj.dump();
}

void write_plan(const geometry::TilingPlan& plan, const std::filesystem::path& path) {
  write_text(to_json_text(plan), path);
}

void write_plan(const featuremap::LayoutPlan& layout,
                const std::filesystem::path& path) {
  write_text(to_json_text(layout), path);
}

void write_plan(const batching::BatchPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << batch_header_line(plan) << '\n';
  for (std::size_t i = 0; i < plan.batches.size(); ++i) {
    out << batch_record_line(i, plan.batches[i]) << '\n';
  }
  if (!out.good()) {
    throw std::runtime_error("failed writing file: " + path.string());
  }
}

}  // namespace vlmprep::datastore
