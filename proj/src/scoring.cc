#include "nounprobe/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "nounprobe/error.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

namespace {

constexpr std::size_t kSplitAll = 0;
constexpr std::size_t kSplitSg = 1;
constexpr std::size_t kSplitPl = 2;

void check_scores(const std::vector<double>& scores, std::size_t expected, const char* op) {
  if (scores.size() != expected) {
    throw BackendError(std::string(op) + " returned " + std::to_string(scores.size()) + " scores for " +
                       std::to_string(expected) + " inputs");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw BackendError(std::string(op) + " returned a non-finite score");
  }
}

template <class F>
auto with_retry(int max_retries, F&& f) -> decltype(f()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return f();
    } catch (const BackendError&) {
      if (attempt >= max_retries) throw;
    }
  }
}

// Per-variant scores for every set of the cell, batched.
std::vector<std::vector<double>> cell_variant_scores(const WorkloadCell& cell, Backend& backend,
                                                     const ScoringOptions& opts) {
  const ScoringMode mode = select_mode(backend);
  const std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
  std::vector<std::vector<double>> out(cell.sets.size());
  for (std::size_t i = 0; i < cell.sets.size(); ++i) out[i].assign(cell.sets[i].variants.size(), 0.0);

  if (mode == ScoringMode::FullString) {
    std::vector<std::string> strings;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    for (std::size_t i = 0; i < cell.sets.size(); ++i) {
      for (std::size_t v = 0; v < cell.sets[i].variants.size(); ++v) {
        strings.push_back(cell.sets[i].variants[v].text);
        where.emplace_back(i, v);
      }
    }
    for (std::size_t start = 0; start < strings.size(); start += batch) {
      const std::size_t len = std::min(batch, strings.size() - start);
      std::span<const std::string> chunk(strings.data() + start, len);
      auto scores = with_retry(opts.max_retries, [&] {
        auto s = backend.score_strings(chunk);
        check_scores(s, len, "score_strings");
        return s;
      });
      for (std::size_t k = 0; k < len; ++k) out[where[start + k].first][where[start + k].second] = scores[k];
    }
    return out;
  }

  std::vector<MaskedQuery> queries;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> where;
  for (std::size_t i = 0; i < cell.sets.size(); ++i) {
    const auto& vs = cell.sets[i];
    for (auto [g, u] : vs.pairs) {
      const Variant& gv = vs.variants[g];
      const Variant& uv = vs.variants[u];
      for (const auto* f : {&gv.filler, &uv.filler}) {
        if (tokenize(*f).size() != 1) throw BackendError("masked scoring needs a single-word filler, got '" + *f + "'");
      }
      queries.push_back(MaskedQuery{gv.left, gv.right, {gv.filler, uv.filler}});
      where.emplace_back(i, g, u);
    }
  }
  for (std::size_t start = 0; start < queries.size(); start += batch) {
    const std::size_t len = std::min(batch, queries.size() - start);
    std::span<const MaskedQuery> chunk(queries.data() + start, len);
    auto replies = with_retry(opts.max_retries, [&] {
      auto r = backend.score_masked_batch(chunk);
      if (r.size() != len) throw BackendError("score_masked batch reply size mismatch");
      for (const auto& s : r) check_scores(s, 2, "score_masked");
      return r;
    });
    for (std::size_t k = 0; k < len; ++k) {
      auto [i, g, u] = where[start + k];
      out[i][g] = replies[k][0];
      out[i][u] = replies[k][1];
    }
  }
  return out;
}

}  // namespace

ScoringMode select_mode(const Backend& backend) {
  const auto caps = backend.capabilities();
  if (caps.has(Capability::FullString)) return ScoringMode::FullString;
  if (caps.has(Capability::Masked)) return ScoringMode::Masked;
  throw BackendError("backend " + backend.id() + " offers neither full_string nor masked scoring");
}

double pair_mean(std::span<const double> variant_scores, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw Error("sentence has no minimal pairs");
  double sum = 0.0;
  for (auto [g, u] : pairs) sum += variant_scores[g] - variant_scores[u];
  return sum / static_cast<double>(pairs.size());
}

std::vector<double> score_variants(const VariantSet& vs, Backend& backend, ScoringMode mode) {
  if (mode == ScoringMode::FullString) {
    std::vector<std::string> texts;
    for (const auto& v : vs.variants) texts.push_back(v.text);
    auto scores = backend.score_strings(texts);
    check_scores(scores, texts.size(), "score_strings");
    return scores;
  }
  std::vector<double> scores(vs.variants.size(), 0.0);
  for (auto [g, u] : vs.pairs) {
    const Variant& gv = vs.variants[g];
    const Variant& uv = vs.variants[u];
    for (const auto* f : {&gv.filler, &uv.filler}) {
      if (tokenize(*f).size() != 1) throw BackendError("masked scoring needs a single-word filler, got '" + *f + "'");
    }
    auto s = backend.score_masked(MaskedQuery{gv.left, gv.right, {gv.filler, uv.filler}});
    check_scores(s, 2, "score_masked");
    scores[g] = s[0];
    scores[u] = s[1];
  }
  return scores;
}

double score_sentence(const VariantSet& vs, Backend& backend, ScoringMode mode) {
  const auto scores = score_variants(vs, backend, mode);
  return pair_mean(scores, vs.pairs);
}

double t_critical_975(std::size_t df) {
  if (df == 0) throw AnalysisError("t quantile needs at least one degree of freedom");
  boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.975);
}

NounTaskScore summarize_scores(std::string noun, std::string task_id, std::string backend_id,
                               std::span<const double> sentence_scores) {
  if (sentence_scores.empty()) throw Error("cannot summarize an empty cell");
  NounTaskScore out{std::move(noun), std::move(task_id), std::move(backend_id)};
  const auto n = sentence_scores.size();
  const double mean = std::accumulate(sentence_scores.begin(), sentence_scores.end(), 0.0) / static_cast<double>(n);
  out.mean = mean;
  out.n = n;
  if (n == 1) {
    out.single_sample = true;
    return out;
  }
  double ss = 0.0;
  for (double x : sentence_scores) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  out.ci95_halfwidth = t_critical_975(n - 1) * sd / std::sqrt(static_cast<double>(n));
  return out;
}

std::string_view split_name(TargetSplit s) {
  switch (s) {
    case TargetSplit::All:
      return "all";
    case TargetSplit::Singular:
      return "sg";
    case TargetSplit::Plural:
      return "pl";
  }
  return "all";
}

const std::optional<NounTaskScore>& CellScores::get(TargetSplit s) const {
  switch (s) {
    case TargetSplit::Singular:
      return singular;
    case TargetSplit::Plural:
      return plural;
    case TargetSplit::All:
      break;
  }
  return all;
}

CellScores score_cell(const WorkloadCell& cell, Backend& backend, const ScoringOptions& opts) {
  CellScores out;
  if (cell.sets.empty()) {
    out.error = "empty cell";
    return out;
  }
  std::vector<std::vector<double>> variant_scores;
  try {
    variant_scores = cell_variant_scores(cell, backend, opts);
  } catch (const BackendError& e) {
    out.error = cell.task_id + "/" + cell.noun.lemma + ": " + e.what();
    return out;
  }

  std::vector<double> all, sg, pl;
  std::vector<std::pair<std::size_t, std::size_t>> sg_pairs, pl_pairs;
  for (std::size_t i = 0; i < cell.sets.size(); ++i) {
    const auto& vs = cell.sets[i];
    all.push_back(pair_mean(variant_scores[i], vs.pairs));
    sg_pairs.clear();
    pl_pairs.clear();
    for (const auto& p : vs.pairs) {
      (vs.variants[p.first].dims.target == Number::Singular ? sg_pairs : pl_pairs).push_back(p);
    }
    if (!sg_pairs.empty()) sg.push_back(pair_mean(variant_scores[i], sg_pairs));
    if (!pl_pairs.empty()) pl.push_back(pair_mean(variant_scores[i], pl_pairs));
  }
  out.all = summarize_scores(cell.noun.lemma, cell.task_id, backend.id(), all);
  if (!sg.empty()) out.singular = summarize_scores(cell.noun.lemma, cell.task_id, backend.id(), sg);
  if (!pl.empty()) out.plural = summarize_scores(cell.noun.lemma, cell.task_id, backend.id(), pl);
  return out;
}

NounTaskScore score_noun(const WorkloadCell& cell, Backend& backend, const ScoringOptions& opts) {
  auto scores = score_cell(cell, backend, opts);
  if (!scores.all) throw BackendError(scores.error);
  return *scores.all;
}

ScoreMatrix::ScoreMatrix(std::string backend_id, std::vector<std::string> nouns, std::vector<std::string> tasks)
    : backend_id_(std::move(backend_id)), nouns_(std::move(nouns)), tasks_(std::move(tasks)) {
  cells_.resize(kSplitCount * nouns_.size() * tasks_.size());
}

std::optional<std::size_t> ScoreMatrix::noun_index(std::string_view noun) const {
  for (std::size_t i = 0; i < nouns_.size(); ++i) {
    if (nouns_[i] == noun) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ScoreMatrix::task_index(std::string_view task) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i] == task) return i;
  }
  return std::nullopt;
}

const std::optional<NounTaskScore>& ScoreMatrix::at(std::size_t noun, std::size_t task, TargetSplit s) const {
  return cells_.at((static_cast<std::size_t>(s) * nouns_.size() + noun) * tasks_.size() + task);
}

void ScoreMatrix::set(std::size_t noun, std::size_t task, TargetSplit s, NounTaskScore score) {
  cells_.at((static_cast<std::size_t>(s) * nouns_.size() + noun) * tasks_.size() + task) = std::move(score);
}

std::vector<std::vector<std::optional<double>>> ScoreMatrix::means(TargetSplit s) const {
  std::vector<std::vector<std::optional<double>>> out(nouns_.size(),
                                                      std::vector<std::optional<double>>(tasks_.size()));
  for (std::size_t i = 0; i < nouns_.size(); ++i) {
    for (std::size_t j = 0; j < tasks_.size(); ++j) {
      if (const auto& c = at(i, j, s)) out[i][j] = c->mean;
    }
  }
  return out;
}

std::size_t ScoreMatrix::missing_count(TargetSplit s) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < nouns_.size(); ++i) {
    for (std::size_t j = 0; j < tasks_.size(); ++j) n += at(i, j, s) ? 0 : 1;
  }
  return n;
}

MatrixRun score_workload(const Workload& w, Backend& backend, const ScoringOptions& opts) {
  std::vector<std::string> nouns, tasks;
  for (const auto& c : w.cells) {
    if (std::find(nouns.begin(), nouns.end(), c.noun.lemma) == nouns.end()) nouns.push_back(c.noun.lemma);
    if (std::find(tasks.begin(), tasks.end(), c.task_id) == tasks.end()) tasks.push_back(c.task_id);
  }

  std::vector<CellScores> results(w.cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= w.cells.size()) return;
      try {
        results[i] = score_cell(w.cells[i], backend, opts);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = w.cells.size();
        return;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, std::max<std::size_t>(1, w.cells.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  MatrixRun run{ScoreMatrix(backend.id(), nouns, tasks), {}};
  for (std::size_t i = 0; i < w.cells.size(); ++i) {
    const auto ni = *run.matrix.noun_index(w.cells[i].noun.lemma);
    const auto ti = *run.matrix.task_index(w.cells[i].task_id);
    for (auto s : {TargetSplit::All, TargetSplit::Singular, TargetSplit::Plural}) {
      if (const auto& v = results[i].get(s)) run.matrix.set(ni, ti, s, *v);
    }
    if (!results[i].error.empty()) run.errors.push_back(results[i].error);
  }
  return run;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_scores_csv(std::ostream& out, std::span<const ScoreMatrix> matrices) {
  out << "backend_id,task_id,noun,target_number,mean,n,ci95_halfwidth\n";
  for (const auto& m : matrices) {
    for (std::size_t i = 0; i < m.nouns().size(); ++i) {
      for (std::size_t j = 0; j < m.tasks().size(); ++j) {
        for (auto s : {TargetSplit::All, TargetSplit::Singular, TargetSplit::Plural}) {
          out << m.backend_id() << ',' << m.tasks()[j] << ',' << m.nouns()[i] << ',' << split_name(s) << ',';
          if (const auto& c = m.at(i, j, s)) {
            out << format_double(c->mean) << ',' << c->n << ',' << format_double(c->ci95_halfwidth) << '\n';
          } else {
            out << "NA,0,NA\n";
          }
        }
      }
    }
  }
}

std::vector<ScoreMatrix> read_scores_csv(std::istream& in) {
  struct Row {
    std::string task, noun;
    TargetSplit split;
    std::optional<NounTaskScore> score;
  };
  std::vector<std::string> backend_order;
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "backend_id,task_id,noun,target_number,mean,n,ci95_halfwidth") {
        throw ConfigError("score CSV: unexpected header '" + line + "'");
      }
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 7) throw ConfigError("score CSV line " + std::to_string(lineno) + ": expected 7 columns");
    TargetSplit s;
    if (cols[3] == "all") {
      s = TargetSplit::All;
    } else if (cols[3] == "sg") {
      s = TargetSplit::Singular;
    } else if (cols[3] == "pl") {
      s = TargetSplit::Plural;
    } else {
      throw ConfigError("score CSV line " + std::to_string(lineno) + ": bad target_number '" + cols[3] + "'");
    }
    Row row{cols[1], cols[2], s, std::nullopt};
    if (cols[4] != "NA") {
      try {
        NounTaskScore sc{cols[2], cols[1], cols[0], std::stod(cols[4]), std::stoul(cols[5]),
                         std::stod(cols[6]), false};
        sc.single_sample = sc.n == 1;
        row.score = std::move(sc);
      } catch (const std::exception&) {
        throw ConfigError("score CSV line " + std::to_string(lineno) + ": bad number");
      }
    }
    if (!rows.count(cols[0])) backend_order.push_back(cols[0]);
    rows[cols[0]].push_back(std::move(row));
  }
  if (!header) throw ConfigError("score CSV is empty");

  std::vector<ScoreMatrix> out;
  for (const auto& b : backend_order) {
    std::vector<std::string> nouns, tasks;
    for (const auto& r : rows[b]) {
      if (std::find(nouns.begin(), nouns.end(), r.noun) == nouns.end()) nouns.push_back(r.noun);
      if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
    }
    ScoreMatrix m(b, nouns, tasks);
    for (auto& r : rows[b]) {
      if (r.score) m.set(*m.noun_index(r.noun), *m.task_index(r.task), r.split, std::move(*r.score));
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace nounprobe
