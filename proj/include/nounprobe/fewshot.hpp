#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nounprobe/backend.hpp"
#include "nounprobe/lexicon.hpp"
#include "nounprobe/scoring.hpp"
#include "nounprobe/templates.hpp"

namespace nounprobe {

struct NovelTokens {
  std::string singular = "wug";
  std::string plural = "wuz";

  const std::string& of(Number n) const { return n == Number::Singular ? singular : plural; }
  // Number of a novel surface, nullopt when it is neither token.
  std::optional<Number> number_of(std::string_view surface) const;
};

struct FineTuneSpec {
  std::string data_type;  // id of a fine-tuning template, e.g. "simple" or "unison"
  Number number = Number::Singular;
  std::size_t n_sentences = 5;
  int epochs = 1;

  // e.g. "simple-wug"
  std::string label(const NovelTokens& tokens) const;
};

// Single-form noun entry for a novel token.
LexicalEntry novel_entry(const std::string& surface, Number n);

// Renders `n_sentences` sentences from the spec's fine-tuning template with
// the novel token as subject, using distinct fills where the classes allow.
std::vector<std::string> build_finetune_set(const FineTuneSpec& spec, const Lexicon& lex, std::uint64_t seed,
                                            const NovelTokens& tokens = {},
                                            std::span<const TaskTemplate> templates = builtin_templates());

struct FewShotOptions {
  std::size_t samples = 500;
  std::uint64_t seed = 1;
  NovelTokens tokens;
  ScoringOptions scoring;
};

struct FewShotResult {
  FineTuneSpec spec;
  std::string novel_token;
  std::string backend_id;
  std::vector<std::string> sentences;
  std::vector<std::string> tasks;
  std::vector<std::optional<NounTaskScore>> baseline;  // parallel to tasks
  std::vector<std::optional<NounTaskScore>> post;
  bool complete = false;
  std::string error;

  friend bool operator==(const FewShotResult& a, const FewShotResult& b);
};

// reset, add the novel token, score the ten evaluation tasks, fine-tune, and
// score the identical workload again. A backend failure stops the run and
// returns what was collected with complete = false.
FewShotResult run_fewshot(const FineTuneSpec& spec, Backend& backend, const Lexicon& lex, const FewShotOptions& opts,
                          std::span<const TaskTemplate> templates = builtin_templates());

// `spec,data_type,novel_token,task_id,phase,mean,ci95_halfwidth`
void write_fewshot_csv(std::ostream& out, std::span<const FewShotResult> results);

}  // namespace nounprobe
