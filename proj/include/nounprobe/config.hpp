#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nounprobe/backend.hpp"
#include "nounprobe/fewshot.hpp"
#include "nounprobe/lexicon.hpp"
#include "nounprobe/ngram.hpp"
#include "nounprobe/templates.hpp"

namespace nounprobe {

// Training data for a built-in backend generated from the lexicon itself.
struct SyntheticCorpusConfig {
  std::vector<std::string> controls;
  std::size_t repeats = 1;
};

struct BackendConfig {
  std::string id;
  std::string kind;  // "ngram", "subprocess" or "tcp"
  // ngram
  std::filesystem::path corpus;
  std::optional<SyntheticCorpusConfig> synthetic;
  NgramOptions ngram;
  // subprocess
  std::vector<std::string> command;
  // tcp
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  // fine-tuning epochs for few-shot runs; kind default when unset
  std::optional<int> epochs;

  int fewshot_epochs() const { return epochs.value_or(kind == "ngram" ? 1 : 2); }
};

struct CorpusConfig {
  std::string id;
  std::filesystem::path path;
};

struct FewShotConfig {
  std::vector<std::string> specs;  // "data_type-token", e.g. "simple-wug"; empty means all valid pairings
  std::size_t n_sentences = 5;
  std::optional<std::size_t> samples;  // defaults to samples_per_cell
  NovelTokens tokens;
};

struct RunConfig {
  std::filesystem::path lexicon;
  std::string templates = "builtin";  // or a template file path
  std::vector<std::string> tasks;     // empty: every evaluation template
  std::vector<BackendConfig> backends;
  std::vector<std::string> nouns;  // empty: every noun of the filtered lexicon
  std::size_t samples_per_cell = 500;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;
  std::size_t batch_size = 64;
  int max_retries = 2;
  double alpha = 0.05;
  bool standardize_pca = true;
  std::vector<CorpusConfig> corpora;
  FewShotConfig fewshot;

  // Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  // Checks values and that referenced paths exist.
  void validate() const;
  // 16 hex digits over the canonical JSON form.
  std::string hash() const;
};

RunConfig load_config(const std::filesystem::path& path);

std::vector<TaskTemplate> load_templates(const RunConfig& cfg);
// Evaluation templates selected by cfg.tasks, in the order given there.
std::vector<TaskTemplate> selected_tasks(const RunConfig& cfg, const std::vector<TaskTemplate>& all);

// Builds (and for built-in kinds trains) the backend. `lex` feeds synthetic corpora.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, const Lexicon& lex);

}  // namespace nounprobe
