#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlmprep::evalprompts {

struct BenchmarkRule {
  std::string benchmark;
  std::optional<std::string> prompt;  // absent: the benchmark appends nothing
  bool operator==(const BenchmarkRule&) const = default;
};

// Benchmark-name -> response-format-prompt table. Built once, read-only
// afterwards, so concurrent lookups need no synchronization.
class PromptRegistry {
 public:
  // The stock evaluation benchmarks and their prompts.
  static PromptRegistry builtin();

  // Registries are exchangeable as JSON ({"benchmarks": [{"benchmark",
  // "prompt"?}, ...]}), preserving order and prompt bytes exactly.
  static PromptRegistry load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static PromptRegistry from_rules(std::vector<BenchmarkRule> rules);

  // Throws std::out_of_range for a name not in the registry; returns
  // nullopt for a known benchmark that appends nothing.
  const std::optional<std::string>& eval_prompt(std::string_view benchmark) const;

  // question + "\n" + prompt, or the question unchanged when the benchmark
  // has no prompt.
  std::string apply_eval_prompt(std::string_view question,
                                std::string_view benchmark) const;

  const std::vector<BenchmarkRule>& rules() const { return rules_; }

 private:
  std::vector<BenchmarkRule> rules_;
};

}  // namespace vlmprep::evalprompts
