#include "vlmprep/evalprompts.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace vlmprep::evalprompts {

namespace {

constexpr std::string_view kShortAnswer =
    "Answer the question using a single word or phrase.";
constexpr std::string_view kOptionLetter =
    "Answer with the option's letter from the given choices directly.";
// The leading clause uses the original's quoting verbatim: backtick before,
// apostrophe after.
constexpr std::string_view kUnanswerable =
    "When the provided information is insufficient, respond with `Unanswerable'. "
    "Answer the question using a single word or phrase.";

}  // namespace

PromptRegistry PromptRegistry::builtin() {
  std::vector<BenchmarkRule> rules;
  const auto with = [&rules](std::string name, std::string_view prompt) {
    rules.push_back({std::move(name), std::string(prompt)});
  };
  const auto without = [&rules](std::string name) {
    rules.push_back({std::move(name), std::nullopt});
  };

  with("VQAv2", kShortAnswer);
  with("GQA", kShortAnswer);
  with("VizWiz", kUnanswerable);
  with("ScienceQA", kOptionLetter);
  with("TextVQA", kShortAnswer);
  with("POPE", kShortAnswer);
  with("MME", kShortAnswer);
  with("MMBench", kOptionLetter);
  with("SEED-Bench", kOptionLetter);
  without("LLaVA-Bench");
  without("MM-Vet");
  return from_rules(std::move(rules));
}

PromptRegistry PromptRegistry::from_rules(std::vector<BenchmarkRule> rules) {
  std::unordered_set<std::string_view> seen;
  for (const BenchmarkRule& rule : rules) {
    if (rule.benchmark.empty()) {
      throw std::invalid_argument("prompt registry: benchmark name must not be empty");
    }
    if (!seen.insert(rule.benchmark).second) {
      throw std::invalid_argument("prompt registry: duplicate benchmark \"" +
                                  rule.benchmark + "\"");
    }
  }
  PromptRegistry registry;
  registry.rules_ = std::move(rules);
  return registry;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("prompt registry: cannot open " + path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("prompt registry: " + path.string() + ": " + e.what());
  }

  if (!doc.is_object() || !doc.contains("benchmarks") || doc.size() != 1) {
    throw std::runtime_error(
        "prompt registry: expected an object with the single key \"benchmarks\"");
  }
  const nlohmann::json& list = doc["benchmarks"];
  if (!list.is_array()) {
    throw std::runtime_error("prompt registry: \"benchmarks\" must be an array");
  }

  std::vector<BenchmarkRule> rules;
  rules.reserve(list.size());
  for (const nlohmann::json& entry : list) {
    if (!entry.is_object() || !entry.contains("benchmark") ||
        !entry["benchmark"].is_string()) {
      throw std::runtime_error(
          "prompt registry: every entry needs a string \"benchmark\"");
    }
    BenchmarkRule rule;
    rule.benchmark = entry["benchmark"].get<std::string>();
    for (const auto& [key, value] : entry.items()) {
      if (key == "benchmark") {
        continue;
      }
      if (key == "prompt") {
        if (!value.is_string()) {
          throw std::runtime_error("prompt registry: \"prompt\" must be a string");
        }
        rule.prompt = value.get<std::string>();
      } else {
        throw std::runtime_error("prompt registry: unknown field \"" + key + "\"");
      }
    }
    rules.push_back(std::move(rule));
  }
  return from_rules(std::move(rules));
}

void PromptRegistry::save(const std::filesystem::path& path) const {
  nlohmann::json list = nlohmann::json::array();
  for (const BenchmarkRule& rule : rules_) {
    nlohmann::json entry;
    entry["benchmark"] = rule.benchmark;
    if (rule.prompt) {
      entry["prompt"] = *rule.prompt;
    }
    list.push_back(std::move(entry));
  }
  nlohmann::json doc;
  doc["benchmarks"] = std::move(list);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("prompt registry: cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out.good()) {
    throw std::runtime_error("prompt registry: failed writing " + path.string());
  }
}

const std::optional<std::string>& PromptRegistry::eval_prompt(
    std::string_view benchmark) const {
  for (const BenchmarkRule& rule : rules_) {
    if (rule.benchmark == benchmark) {
      return rule.prompt;
    }
  }
  throw std::out_of_range("unknown benchmark \"" + std::string(benchmark) + "\"");
}

std::string PromptRegistry::apply_eval_prompt(std::string_view question,
                                              std::string_view benchmark) const {
  const std::optional<std::string>& prompt = eval_prompt(benchmark);
  if (!prompt) {
    return std::string(question);
  }
  std::string out;
  out.reserve(question.size() + 1 + prompt->size());
  out.append(question).append(1, '\n').append(*prompt);
  return out;
}

}  // namespace vlmprep::evalprompts
