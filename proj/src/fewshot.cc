#include "nounprobe/fewshot.hpp"

#include "nounprobe/error.hpp"
#include "nounprobe/generation.hpp"
#include "nounprobe/rng.hpp"

namespace nounprobe {

namespace {

bool same_score(const std::optional<NounTaskScore>& a, const std::optional<NounTaskScore>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->task_id == b->task_id && a->noun == b->noun && a->mean == b->mean && a->n == b->n &&
         a->ci95_halfwidth == b->ci95_halfwidth;
}

void write_phase(std::ostream& out, const FewShotResult& r, const std::string& label, std::string_view phase,
                 const std::vector<std::optional<NounTaskScore>>& scores) {
  for (std::size_t t = 0; t < r.tasks.size(); ++t) {
    out << label << ',' << r.spec.data_type << ',' << r.novel_token << ',' << r.tasks[t] << ',' << phase << ',';
    const auto& s = t < scores.size() ? scores[t] : std::optional<NounTaskScore>{};
    if (s) {
      out << format_double(s->mean) << ',' << format_double(s->ci95_halfwidth) << '\n';
    } else {
      out << "NA,NA\n";
    }
  }
}

}  // namespace

std::optional<Number> NovelTokens::number_of(std::string_view surface) const {
  if (surface == singular) return Number::Singular;
  if (surface == plural) return Number::Plural;
  return std::nullopt;
}

std::string FineTuneSpec::label(const NovelTokens& tokens) const { return data_type + "-" + tokens.of(number); }

LexicalEntry novel_entry(const std::string& surface, Number n) {
  LexicalEntry e;
  e.lemma = surface;
  e.word_class = WordClass::Noun;
  (n == Number::Singular ? e.singular : e.plural) = surface;
  return e;
}

std::vector<std::string> build_finetune_set(const FineTuneSpec& spec, const Lexicon& lex, std::uint64_t seed,
                                            const NovelTokens& tokens, std::span<const TaskTemplate> templates) {
  if (spec.n_sentences == 0) throw ConfigError("fine-tuning set needs at least one sentence");
  const TaskTemplate* t = find_template(templates, spec.data_type);
  if (!t || t->role != TemplateRole::FineTune) throw ConfigError("unknown fine-tuning data type '" + spec.data_type + "'");
  const std::string& token = tokens.of(spec.number);
  if (t->number == NumberConstraint::SingularOnly && spec.number != Number::Singular) {
    throw ConfigError("'" + t->task_id + "' is a singular construction and cannot train plural token '" + token + "'");
  }
  if (t->number == NumberConstraint::PluralOnly && spec.number != Number::Plural) {
    throw ConfigError("'" + t->task_id + "' is a plural construction and cannot train singular token '" + token + "'");
  }

  const auto classes = t->fill_classes();
  std::vector<std::size_t> sizes;
  for (auto c : classes) {
    if (lex.of_class(c).empty()) {
      throw ConfigError("fine-tuning data '" + t->task_id + "' needs class " + std::string(word_class_name(c)) +
                        ", which is empty");
    }
    sizes.push_back(lex.of_class(c).size());
  }
  Rng rng(derive_seed(seed, {"finetune", t->task_id, token}));
  const auto tuples = sample_index_tuples(sizes, spec.n_sentences, false, rng);
  const LexicalEntry target = novel_entry(token, spec.number);
  std::vector<std::string> out;
  std::vector<LexicalEntry> fill(classes.size());
  for (const auto& tuple : tuples) {
    for (std::size_t k = 0; k < classes.size(); ++k) fill[k] = lex.of_class(classes[k])[tuple[k]];
    out.push_back(expand_variants(*t, target, fill, spec.number).variants.front().text);
  }
  return out;
}

bool operator==(const FewShotResult& a, const FewShotResult& b) {
  if (a.spec.data_type != b.spec.data_type || a.spec.number != b.spec.number || a.novel_token != b.novel_token ||
      a.sentences != b.sentences || a.tasks != b.tasks || a.complete != b.complete ||
      a.baseline.size() != b.baseline.size() || a.post.size() != b.post.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.baseline.size(); ++i) {
    if (!same_score(a.baseline[i], b.baseline[i])) return false;
  }
  for (std::size_t i = 0; i < a.post.size(); ++i) {
    if (!same_score(a.post[i], b.post[i])) return false;
  }
  return true;
}

FewShotResult run_fewshot(const FineTuneSpec& spec, Backend& backend, const Lexicon& lex, const FewShotOptions& opts,
                          std::span<const TaskTemplate> templates) {
  const CapabilitySet caps = backend.capabilities();
  for (Capability c : {Capability::Reset, Capability::AddToken, Capability::FineTune}) {
    if (!caps.has(c)) {
      throw BackendError("backend " + backend.id() + " lacks " + std::string(capability_name(c)) +
                         ", required for few-shot runs");
    }
  }
  if (spec.epochs < 0) throw ConfigError("epochs must be non-negative");

  FewShotResult r;
  r.spec = spec;
  r.novel_token = opts.tokens.of(spec.number);
  r.backend_id = backend.id();
  r.sentences = build_finetune_set(spec, lex, opts.seed, opts.tokens, templates);
  const auto evals = evaluation_templates(templates);
  for (const auto& t : evals) r.tasks.push_back(t.task_id);

  const LexicalEntry noun = novel_entry(r.novel_token, spec.number);
  SamplingOptions sampling;
  sampling.samples = opts.samples;
  sampling.seed = opts.seed;
  sampling.pinned_target = spec.number;
  const Workload workload = sample_workload(lex, evals, std::span<const LexicalEntry>(&noun, 1), sampling);

  const auto evaluate = [&](std::vector<std::optional<NounTaskScore>>& into) {
    MatrixRun run = score_workload(workload, backend, opts.scoring);
    for (std::size_t t = 0; t < r.tasks.size(); ++t) into.push_back(run.matrix.at(0, t));
    if (!run.errors.empty()) throw BackendError(run.errors.front());
  };

  try {
    backend.reset();
    backend.add_token(r.novel_token);
    evaluate(r.baseline);
    backend.fine_tune(r.sentences, spec.epochs);
    evaluate(r.post);
    r.complete = true;
  } catch (const BackendError& e) {
    r.error = e.what();
  }
  return r;
}

void write_fewshot_csv(std::ostream& out, std::span<const FewShotResult> results) {
  out << "spec,data_type,novel_token,task_id,phase,mean,ci95_halfwidth\n";
  for (const auto& r : results) {
    const std::string label = r.spec.data_type + "-" + r.novel_token;
    write_phase(out, r, label, "baseline", r.baseline);
    write_phase(out, r, label, "post", r.post);
  }
}

}  // namespace nounprobe
