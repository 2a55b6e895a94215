#include "nounprobe/generation.hpp"

#include <limits>
#include <set>
#include <unordered_map>

#include "nounprobe/error.hpp"

namespace nounprobe {

namespace {

std::vector<std::size_t> decode(std::uint64_t index, std::span<const std::size_t> sizes) {
  std::vector<std::size_t> tuple(sizes.size());
  for (std::size_t k = sizes.size(); k-- > 0;) {
    tuple[k] = static_cast<std::size_t>(index % sizes[k]);
    index /= sizes[k];
  }
  return tuple;
}

std::vector<std::size_t> draw(std::span<const std::size_t> sizes, Rng& rng) {
  std::vector<std::size_t> tuple(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) tuple[k] = static_cast<std::size_t>(uniform_index(rng, sizes[k]));
  return tuple;
}

}  // namespace

std::vector<std::vector<std::size_t>> sample_index_tuples(std::span<const std::size_t> sizes, std::size_t n,
                                                          bool require_distinct, Rng& rng) {
  constexpr std::uint64_t kHuge = std::uint64_t{1} << 62;
  std::uint64_t space = 1;
  bool overflow = false;
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("cannot sample from an empty word class");
    if (space > kHuge / s) {
      overflow = true;
    } else {
      space *= s;
    }
  }

  std::vector<std::vector<std::size_t>> out;
  out.reserve(n);
  if (overflow) {
    // Collisions are vanishingly rare at this size; reject the few that occur.
    std::set<std::vector<std::size_t>> seen;
    while (out.size() < n) {
      auto t = draw(sizes, rng);
      if (seen.insert(t).second) out.push_back(std::move(t));
    }
    return out;
  }
  if (n > space) {
    if (require_distinct) {
      throw ConfigError("requested " + std::to_string(n) + " distinct fills but only " + std::to_string(space) +
                        " exist");
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw(sizes, rng));
    return out;
  }
  // Sparse Fisher-Yates over [0, space): the first n positions of a uniform
  // random permutation, touching only O(n) entries.
  std::unordered_map<std::uint64_t, std::uint64_t> moved;
  const auto at = [&](std::uint64_t i) {
    auto it = moved.find(i);
    return it == moved.end() ? i : it->second;
  };
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t j = i + uniform_index(rng, space - i);
    const std::uint64_t vi = at(i);
    const std::uint64_t vj = at(j);
    moved[i] = vj;
    moved[j] = vi;
    out.push_back(decode(vj, sizes));
  }
  return out;
}

WorkloadCell sample_cell(const Lexicon& lex, const TaskTemplate& t, const LexicalEntry& noun,
                         const SamplingOptions& opts) {
  if (opts.samples == 0) throw ConfigError("samples per cell must be at least 1");
  const auto classes = t.fill_classes();
  std::vector<std::size_t> sizes;
  for (auto c : classes) {
    if (lex.of_class(c).empty()) {
      throw ConfigError("template " + t.task_id + " needs class " + std::string(word_class_name(c)) +
                        ", which is empty");
    }
    sizes.push_back(lex.of_class(c).size());
  }

  Rng rng(derive_seed(opts.seed, {noun.lemma, t.task_id}));
  const auto tuples = sample_index_tuples(sizes, opts.samples, opts.require_distinct, rng);

  WorkloadCell cell{t.task_id, noun, {}};
  cell.sets.reserve(tuples.size());
  std::vector<LexicalEntry> fill(classes.size());
  for (const auto& tuple : tuples) {
    for (std::size_t k = 0; k < classes.size(); ++k) fill[k] = lex.of_class(classes[k])[tuple[k]];
    cell.sets.push_back(expand_variants(t, noun, fill, opts.pinned_target));
  }
  return cell;
}

Workload sample_workload(const Lexicon& lex, std::span<const TaskTemplate> templates,
                         std::span<const LexicalEntry> nouns, const SamplingOptions& opts) {
  Workload w;
  w.seed = opts.seed;
  w.samples_per_cell = opts.samples;
  w.cells.reserve(nouns.size() * templates.size());
  for (const auto& noun : nouns) {
    for (const auto& t : templates) w.cells.push_back(sample_cell(lex, t, noun, opts));
  }
  return w;
}

void write_workload(std::ostream& out, const Workload& w) {
  for (const auto& cell : w.cells) {
    for (const auto& vs : cell.sets) {
      for (const auto& v : vs.variants) {
        out << cell.task_id << '\t' << cell.noun.lemma << '\t' << v.label << '\t' << v.text << '\n';
      }
    }
  }
}

}  // namespace nounprobe
