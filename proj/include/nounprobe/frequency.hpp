#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nounprobe/lexicon.hpp"
#include "nounprobe/scoring.hpp"

namespace nounprobe {

struct FrequencyTable {
  std::string corpus_id;
  std::map<std::string, std::uint64_t> counts;  // every requested form, zero when absent
  std::uint64_t total_tokens = 0;

  std::uint64_t count(std::string_view form) const;
  // Adds another shard of the same corpus. Commutative and associative.
  void merge(const FrequencyTable& other);
};

// Case-insensitive whole-token counts under the shared tokenizer, in one
// streaming pass.
FrequencyTable count_frequencies(std::istream& corpus, std::span<const std::string> forms,
                                 std::string corpus_id = {});

// A file, or every regular file below a directory, counted file-parallel and
// merged.
FrequencyTable count_frequencies_path(const std::filesystem::path& path, std::span<const std::string> forms,
                                      std::string corpus_id = {}, std::size_t workers = 1);

// Singular and plural surface forms of the given nouns.
std::vector<std::string> noun_forms(std::span<const LexicalEntry> nouns);

struct RegressionResult {
  std::string task_id;
  Number number = Number::Singular;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;  // nouns dropped for zero frequency
};

// z-scores `performance` and regresses it on log10(frequency) by ordinary
// least squares. Points with zero frequency are excluded and counted.
RegressionResult regress_log_frequency(std::string task_id, Number number, std::span<const double> performance,
                                       std::span<const std::uint64_t> frequency);

// One regression per (task, number): the singular split of each task
// against singular-form counts, the plural split against plural-form counts.
std::vector<RegressionResult> regress_frequency(const ScoreMatrix& scores, const FrequencyTable& freqs,
                                                std::span<const LexicalEntry> nouns);

void write_frequency_csv(std::ostream& out, const FrequencyTable& t);
void write_regression_csv(std::ostream& out, std::span<const RegressionResult> results);

}  // namespace nounprobe
