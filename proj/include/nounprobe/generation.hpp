#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nounprobe/lexicon.hpp"
#include "nounprobe/rng.hpp"
#include "nounprobe/templates.hpp"

namespace nounprobe {

struct SamplingOptions {
  std::size_t samples = 500;
  std::uint64_t seed = 1;
  bool require_distinct = false;
  std::optional<Number> pinned_target;  // novel tokens: evaluate one number only
};

// All sampled sentences for one (noun, task).
struct WorkloadCell {
  std::string task_id;
  LexicalEntry noun;
  std::vector<VariantSet> sets;
};

struct Workload {
  std::uint64_t seed = 0;
  std::size_t samples_per_cell = 0;
  std::vector<WorkloadCell> cells;  // noun-major, templates in the given order
};

// `n` distinct tuples from the mixed-radix space `sizes` when the space is
// large enough, otherwise `n` independent uniform tuples. Throws when a size
// is zero, or when distinctness is required but impossible.
std::vector<std::vector<std::size_t>> sample_index_tuples(std::span<const std::size_t> sizes, std::size_t n,
                                                          bool require_distinct, Rng& rng);

// One cell, drawn from its own substream keyed by (seed, noun, task).
WorkloadCell sample_cell(const Lexicon& lex, const TaskTemplate& t, const LexicalEntry& noun,
                         const SamplingOptions& opts);

Workload sample_workload(const Lexicon& lex, std::span<const TaskTemplate> templates,
                         std::span<const LexicalEntry> nouns, const SamplingOptions& opts);

// `task_id<TAB>noun_lemma<TAB>variant_label<TAB>sentence`, one line per variant.
void write_workload(std::ostream& out, const Workload& w);

}  // namespace nounprobe
