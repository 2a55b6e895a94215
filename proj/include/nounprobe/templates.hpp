#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nounprobe/lexicon.hpp"

namespace nounprobe {

enum class SlotKind {
  Literal,
  TargetNoun,  // evaluation target
  NovelToken,  // fine-tuning target ("wug"/"wuz")
  Lexical,     // filled from a lexicon class
  Reflexive,   // himself / themselves
  Copula,      // is / are
};

// Which variation dimension decides a slot's surface number.
enum class Binding {
  None,
  Target,      // follows TargetNumber
  Distractor,  // follows DistractorNumber
  Agree,       // follows TargetNumber, flipped in ungrammatical variants
};

struct Slot {
  SlotKind kind = SlotKind::Literal;
  std::string text;  // literal text
  WordClass word_class = WordClass::Noun;
  Binding binding = Binding::None;
  bool space_before = true;
};

enum class Dim { TargetNumber, DistractorNumber, Grammaticality };

enum class TemplateRole { Evaluation, FineTune };

// Number restriction on fine-tuning constructions.
enum class NumberConstraint { Any, SingularOnly, PluralOnly };

struct TaskTemplate {
  std::string task_id;
  TemplateRole role = TemplateRole::Evaluation;
  NumberConstraint number = NumberConstraint::Any;
  std::vector<Slot> slots;
  std::vector<Dim> dims;  // always TargetNumber first, then DistractorNumber, then Grammaticality
  std::size_t target_slot = 0;
  std::optional<std::size_t> agreement_slot;
  std::string source;

  bool has_dim(Dim d) const;
  std::size_t variant_count() const { return std::size_t{1} << dims.size(); }
  // Indices of slots that take a lexicon entry, in template order.
  std::vector<std::size_t> fill_slots() const;
  std::vector<WordClass> fill_classes() const;
};

TaskTemplate parse_template(std::string_view task_id, std::string_view source,
                            NumberConstraint number = NumberConstraint::Any);

// One template per line: `task_id<TAB>template[<TAB>sg|pl]`; '#' lines are comments.
std::vector<TaskTemplate> parse_template_file(std::istream& in);

// The ten evaluation tasks followed by the three syntactic and ten semantic
// fine-tuning constructions.
std::string_view builtin_template_source();
const std::vector<TaskTemplate>& builtin_templates();
std::vector<TaskTemplate> evaluation_templates(std::span<const TaskTemplate> all);
// Case-insensitive lookup by task id.
const TaskTemplate* find_template(std::span<const TaskTemplate> all, std::string_view task_id);

struct DimAssignment {
  Number target = Number::Singular;
  std::optional<Number> distractor;
  bool grammatical = true;

  friend bool operator==(const DimAssignment&, const DimAssignment&) = default;
};

std::string variant_label(const DimAssignment& d, const TaskTemplate& t);

struct Variant {
  DimAssignment dims;
  std::string label;
  std::string text;
  // Split around the agreement slot, for masked scoring.
  std::string left;
  std::string filler;
  std::string right;
};

struct VariantSet {
  std::string task_id;
  LexicalEntry target;
  std::vector<LexicalEntry> fill;  // parallel to TaskTemplate::fill_slots()
  std::vector<Variant> variants;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (grammatical, ungrammatical)
};

// Renders every dimension assignment. With `pinned_target`, only variants
// with that target number are produced (novel tokens have a single form).
VariantSet expand_variants(const TaskTemplate& t, const LexicalEntry& target, std::span<const LexicalEntry> fill,
                           std::optional<Number> pinned_target = std::nullopt);

std::string reflexive_form(Number n);
std::string copula_form(Number n);

}  // namespace nounprobe
