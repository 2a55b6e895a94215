#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nounprobe/backend.hpp"
#include "nounprobe/generation.hpp"

namespace nounprobe {

enum class ScoringMode { FullString, Masked };

// Full-string scoring when offered, masked otherwise.
ScoringMode select_mode(const Backend& backend);

// Mean over pairs of score(grammatical) - score(ungrammatical).
double pair_mean(std::span<const double> variant_scores, std::span<const std::pair<std::size_t, std::size_t>> pairs);

// Per-variant string scores for one sampled sentence. In masked mode each
// pair's context is scored once and the two fillers' scores are written
// into the grammatical and ungrammatical slots.
std::vector<double> score_variants(const VariantSet& vs, Backend& backend, ScoringMode mode);

double score_sentence(const VariantSet& vs, Backend& backend, ScoringMode mode);

struct NounTaskScore {
  std::string noun;
  std::string task_id;
  std::string backend_id;
  double mean = 0.0;
  std::size_t n = 0;
  double ci95_halfwidth = 0.0;
  bool single_sample = false;  // n == 1: halfwidth reported as 0
};

// Two-sided 95% t critical value with `df` degrees of freedom.
double t_critical_975(std::size_t df);

NounTaskScore summarize_scores(std::string noun, std::string task_id, std::string backend_id,
                               std::span<const double> sentence_scores);

enum class TargetSplit { All, Singular, Plural };
inline constexpr std::size_t kSplitCount = 3;
std::string_view split_name(TargetSplit s);  // "all", "sg", "pl"

struct ScoringOptions {
  std::size_t batch_size = 64;
  int max_retries = 2;
  std::size_t workers = 1;
};

// Scores of one (noun, task) cell: overall and restricted to each target number.
struct CellScores {
  std::optional<NounTaskScore> all;
  std::optional<NounTaskScore> singular;
  std::optional<NounTaskScore> plural;
  std::string error;  // non-empty when the cell was abandoned

  const std::optional<NounTaskScore>& get(TargetSplit s) const;
};

// Scores every sentence of a cell. Backend failures are retried per batch;
// a cell that still fails is returned without scores and with `error` set.
CellScores score_cell(const WorkloadCell& cell, Backend& backend, const ScoringOptions& opts);

NounTaskScore score_noun(const WorkloadCell& cell, Backend& backend, const ScoringOptions& opts = {});

// Nouns x tasks grid for one backend. Missing cells stay empty.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::string backend_id, std::vector<std::string> nouns, std::vector<std::string> tasks);

  const std::string& backend_id() const { return backend_id_; }
  const std::vector<std::string>& nouns() const { return nouns_; }
  const std::vector<std::string>& tasks() const { return tasks_; }

  std::optional<std::size_t> noun_index(std::string_view noun) const;
  std::optional<std::size_t> task_index(std::string_view task) const;

  const std::optional<NounTaskScore>& at(std::size_t noun, std::size_t task, TargetSplit s = TargetSplit::All) const;
  void set(std::size_t noun, std::size_t task, TargetSplit s, NounTaskScore score);

  // Means as a dense grid, nullopt where missing.
  std::vector<std::vector<std::optional<double>>> means(TargetSplit s = TargetSplit::All) const;
  std::size_t missing_count(TargetSplit s = TargetSplit::All) const;

 private:
  std::string backend_id_;
  std::vector<std::string> nouns_;
  std::vector<std::string> tasks_;
  std::vector<std::optional<NounTaskScore>> cells_;  // [split][noun][task]
};

struct MatrixRun {
  ScoreMatrix matrix;
  std::vector<std::string> errors;  // one per abandoned cell
};

// Scores every cell of the workload, fanning cells out across opts.workers
// threads. Cell order in the result is fixed by the workload.
MatrixRun score_workload(const Workload& w, Backend& backend, const ScoringOptions& opts);

// `backend_id,task_id,noun,target_number,mean,n,ci95_halfwidth`; missing cells
// are written with mean and halfwidth `NA` and n 0.
void write_scores_csv(std::ostream& out, std::span<const ScoreMatrix> matrices);
std::vector<ScoreMatrix> read_scores_csv(std::istream& in);

std::string format_double(double v);

}  // namespace nounprobe
