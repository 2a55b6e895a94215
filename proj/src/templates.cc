#include "nounprobe/templates.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "nounprobe/error.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

namespace {

constexpr std::string_view kBuiltin =
    "# Evaluation tasks\n"
    "SVA_Simple\tThe <TargetNoun> <Verb:agree>.\n"
    "SVA_SubjRelClause\tThe <TargetNoun> that liked the <Noun:distractor> <Verb:agree>.\n"
    "SVA_SentComp\tThe <Noun:distractor> said the <TargetNoun> <Verb:agree>.\n"
    "SVA_PP\tThe <TargetNoun> next to the <Noun:distractor> <Verb:agree>.\n"
    "SVA_ObjRelClauseThat\tThe <TargetNoun> that the <Noun:distractor> liked <Verb:agree>.\n"
    "SVA_ObjRelClauseNoThat\tThe <TargetNoun> the <Noun:distractor> liked <Verb:agree>.\n"
    "RA_Simple\tThe <TargetNoun> <PastTransVerb> <Reflexive:agree>.\n"
    "RA_SentComp\tThe <NonGenderedNoun:distractor> said the <TargetNoun> <PastTransVerb> <Reflexive:agree>.\n"
    "RA_ObjRelClauseThat\tThe <TargetNoun> that the <NonGenderedNoun:distractor> liked <PastTransVerb> "
    "<Reflexive:agree>.\n"
    "RA_ObjRelClauseNoThat\tThe <TargetNoun> the <NonGenderedNoun:distractor> liked <PastTransVerb> "
    "<Reflexive:agree>.\n"
    "# Syntactic fine-tuning data\n"
    "simple\tThe <NovelToken> <PresentTenseVerb:target>.\n"
    "pred-adj\tThe <NovelToken> <Copula:target> <Adj>.\n"
    "reflexive\tThe <NovelToken> <Verb:target> <Reflexive:target>.\n"
    "# Semantic fine-tuning data, singular-biased\n"
    "all-alone\tThe <NovelToken> worked all alone.\tsg\n"
    "unaccompanied\tThe <NovelToken> came unaccompanied.\tsg\n"
    "separated-entire\tThe <NovelToken> became separated from the entire group.\tsg\n"
    "personally\tThe <NovelToken> personally thanked me.\tsg\n"
    "# Semantic fine-tuning data, plural-biased\n"
    "unison\tThe <NovelToken> nodded in unison.\tpl\n"
    "together\tThe <NovelToken> ate together.\tpl\n"
    "simultaneously\tThe <NovelToken> jumped simultaneously.\tpl\n"
    "outnumbered\tThe <NovelToken> outnumbered the cats.\tpl\n"
    "constituted\tThe <NovelToken> constituted a majority of the team.\tpl\n"
    "gathered\tThe <NovelToken> gathered quietly.\tpl\n";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

Slot parse_slot(std::string_view body, std::size_t pos) {
  std::string_view name = body;
  std::string_view mod;
  if (auto colon = body.find(':'); colon != std::string_view::npos) {
    name = body.substr(0, colon);
    mod = body.substr(colon + 1);
  }
  if (name.empty()) throw ParseError("empty slot name", pos);

  Slot slot;
  if (name == "TargetNoun") {
    slot.kind = SlotKind::TargetNoun;
  } else if (name == "NovelToken") {
    slot.kind = SlotKind::NovelToken;
  } else if (name == "Reflexive") {
    slot.kind = SlotKind::Reflexive;
    slot.binding = Binding::Target;
  } else if (name == "Copula") {
    slot.kind = SlotKind::Copula;
    slot.binding = Binding::Target;
  } else if (auto cls = parse_word_class(name)) {
    slot.kind = SlotKind::Lexical;
    slot.word_class = *cls;
    if (*cls == WordClass::Noun || *cls == WordClass::NonGenderedNoun) {
      slot.binding = Binding::Distractor;
    } else if (has_number_forms(*cls)) {
      slot.binding = Binding::Target;
    }
  } else {
    throw ParseError("unknown slot class '" + std::string(name) + "'", pos);
  }

  if (mod.empty()) return slot;
  const bool target_slot = slot.kind == SlotKind::TargetNoun || slot.kind == SlotKind::NovelToken;
  const bool numbered = slot.kind != SlotKind::Lexical || has_number_forms(slot.word_class);
  if (mod == "target") {
    if (!target_slot && !numbered) throw ParseError("slot <" + std::string(name) + "> has no number forms", pos);
    if (!target_slot) slot.binding = Binding::Target;
  } else if (mod == "agree") {
    if (target_slot || !numbered) throw ParseError("slot <" + std::string(name) + "> cannot be an agreement slot", pos);
    slot.binding = Binding::Agree;
  } else if (mod == "distractor") {
    if (target_slot || !numbered) throw ParseError("slot <" + std::string(name) + "> cannot be a distractor", pos);
    slot.binding = Binding::Distractor;
  } else {
    throw ParseError("unknown slot modifier ':" + std::string(mod) + "'", pos + name.size() + 1);
  }
  return slot;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

Number resolve(Binding b, const DimAssignment& d) {
  switch (b) {
    case Binding::Target:
      return d.target;
    case Binding::Distractor:
      return d.distractor.value_or(Number::Singular);
    case Binding::Agree:
      return d.grammatical ? d.target : flip(d.target);
    case Binding::None:
      break;
  }
  return Number::Singular;
}

}  // namespace

std::string reflexive_form(Number n) { return n == Number::Singular ? "himself" : "themselves"; }
std::string copula_form(Number n) { return n == Number::Singular ? "is" : "are"; }

bool TaskTemplate::has_dim(Dim d) const { return std::find(dims.begin(), dims.end(), d) != dims.end(); }

std::vector<std::size_t> TaskTemplate::fill_slots() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].kind == SlotKind::Lexical) out.push_back(i);
  }
  return out;
}

std::vector<WordClass> TaskTemplate::fill_classes() const {
  std::vector<WordClass> out;
  for (auto i : fill_slots()) out.push_back(slots[i].word_class);
  return out;
}

TaskTemplate parse_template(std::string_view task_id, std::string_view source, NumberConstraint number) {
  TaskTemplate t;
  t.task_id = std::string(task_id);
  t.source = std::string(source);
  t.number = number;

  std::vector<std::size_t> positions;
  bool pending_space = false;
  std::size_t i = 0;
  while (i < source.size()) {
    const char c = source[i];
    if (is_space(c)) {
      pending_space = true;
      ++i;
      continue;
    }
    Slot slot;
    const std::size_t start = i;
    if (c == '<') {
      const auto close = source.find('>', i);
      if (close == std::string_view::npos) throw ParseError("unterminated slot", i);
      slot = parse_slot(source.substr(i + 1, close - i - 1), i + 1);
      i = close + 1;
    } else if (c == '>') {
      throw ParseError("unexpected '>'", i);
    } else {
      while (i < source.size() && !is_space(source[i]) && source[i] != '<' && source[i] != '>') ++i;
      slot.kind = SlotKind::Literal;
      slot.text = std::string(source.substr(start, i - start));
    }
    slot.space_before = pending_space && !t.slots.empty();
    pending_space = false;
    t.slots.push_back(std::move(slot));
    positions.push_back(start);
  }
  if (t.slots.empty()) throw ParseError("empty template", 0);

  std::optional<std::size_t> target;
  bool evaluation = false;
  bool distractor = false;
  for (std::size_t k = 0; k < t.slots.size(); ++k) {
    const Slot& s = t.slots[k];
    if (s.kind == SlotKind::TargetNoun || s.kind == SlotKind::NovelToken) {
      if (target) throw ParseError("multiple target slots", positions[k]);
      target = k;
      evaluation = s.kind == SlotKind::TargetNoun;
    }
    if (s.binding == Binding::Agree) {
      if (t.agreement_slot) throw ParseError("multiple agreement slots", positions[k]);
      t.agreement_slot = k;
    }
    if (s.binding == Binding::Distractor) distractor = true;
  }
  if (!target) throw ParseError("template has no <TargetNoun> or <NovelToken> slot", 0);
  t.target_slot = *target;
  t.role = evaluation ? TemplateRole::Evaluation : TemplateRole::FineTune;
  if (evaluation && !t.agreement_slot) throw ParseError("evaluation template has no :agree slot", source.size());
  if (!evaluation && t.agreement_slot) {
    throw ParseError("fine-tuning template cannot have an :agree slot", positions[*t.agreement_slot]);
  }
  if (evaluation && number != NumberConstraint::Any) {
    throw ParseError("number restriction only applies to fine-tuning templates", 0);
  }

  t.dims.push_back(Dim::TargetNumber);
  if (distractor) t.dims.push_back(Dim::DistractorNumber);
  if (t.agreement_slot) t.dims.push_back(Dim::Grammaticality);
  return t;
}

std::vector<TaskTemplate> parse_template_file(std::istream& in) {
  std::vector<TaskTemplate> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3) {
      throw ConfigError("template file line " + std::to_string(row) + ": expected id<TAB>template[<TAB>sg|pl]");
    }
    NumberConstraint number = NumberConstraint::Any;
    if (cols.size() == 3) {
      if (cols[2] == "sg") {
        number = NumberConstraint::SingularOnly;
      } else if (cols[2] == "pl") {
        number = NumberConstraint::PluralOnly;
      } else if (!cols[2].empty()) {
        throw ConfigError("template file line " + std::to_string(row) + ": bad number restriction '" + cols[2] + "'");
      }
    }
    try {
      auto t = parse_template(cols[0], cols[1], number);
      if (find_template(out, t.task_id)) {
        throw ConfigError("duplicate template id '" + t.task_id + "'");
      }
      out.push_back(std::move(t));
    } catch (const ParseError& e) {
      throw ParseError("template file line " + std::to_string(row) + ": " + e.what(), e.position());
    }
  }
  return out;
}

std::string_view builtin_template_source() { return kBuiltin; }

const std::vector<TaskTemplate>& builtin_templates() {
  static const std::vector<TaskTemplate> templates = [] {
    std::istringstream in{std::string(kBuiltin)};
    return parse_template_file(in);
  }();
  return templates;
}

std::vector<TaskTemplate> evaluation_templates(std::span<const TaskTemplate> all) {
  std::vector<TaskTemplate> out;
  for (const auto& t : all) {
    if (t.role == TemplateRole::Evaluation) out.push_back(t);
  }
  return out;
}

const TaskTemplate* find_template(std::span<const TaskTemplate> all, std::string_view task_id) {
  const auto key = to_lower(task_id);
  for (const auto& t : all) {
    if (to_lower(t.task_id) == key) return &t;
  }
  return nullptr;
}

std::string variant_label(const DimAssignment& d, const TaskTemplate& t) {
  std::string label(number_name(d.target));
  if (t.has_dim(Dim::DistractorNumber)) {
    label += '_';
    label += number_name(d.distractor.value_or(Number::Singular));
  }
  if (t.has_dim(Dim::Grammaticality)) label += d.grammatical ? "_gram" : "_ungram";
  return label;
}

VariantSet expand_variants(const TaskTemplate& t, const LexicalEntry& target, std::span<const LexicalEntry> fill,
                           std::optional<Number> pinned_target) {
  const auto fill_idx = t.fill_slots();
  if (fill.size() != fill_idx.size()) {
    throw ConfigError("template " + t.task_id + ": fill has " + std::to_string(fill.size()) + " entries, needs " +
                      std::to_string(fill_idx.size()));
  }
  std::vector<const LexicalEntry*> by_slot(t.slots.size(), nullptr);
  for (std::size_t k = 0; k < fill_idx.size(); ++k) {
    const Slot& s = t.slots[fill_idx[k]];
    if (fill[k].word_class != s.word_class) {
      throw ConfigError("template " + t.task_id + ": slot " + std::to_string(fill_idx[k]) + " expects " +
                        std::string(word_class_name(s.word_class)) + ", got " +
                        std::string(word_class_name(fill[k].word_class)) + " '" + fill[k].lemma + "'");
    }
    by_slot[fill_idx[k]] = &fill[k];
  }

  VariantSet vs;
  vs.task_id = t.task_id;
  vs.target = target;
  vs.fill.assign(fill.begin(), fill.end());

  const auto surface = [&](std::size_t k, const DimAssignment& d) -> std::string {
    const Slot& s = t.slots[k];
    switch (s.kind) {
      case SlotKind::Literal:
        return s.text;
      case SlotKind::TargetNoun:
      case SlotKind::NovelToken: {
        const std::string& f = target.form(d.target);
        if (f.empty()) {
          throw ConfigError("target '" + target.lemma + "' has no " + std::string(number_name(d.target)) + " form");
        }
        return f;
      }
      case SlotKind::Lexical: {
        const LexicalEntry& e = *by_slot[k];
        return s.binding == Binding::None ? e.singular : e.form(resolve(s.binding, d));
      }
      case SlotKind::Reflexive:
        return reflexive_form(resolve(s.binding, d));
      case SlotKind::Copula:
        return copula_form(resolve(s.binding, d));
    }
    return {};
  };
  const auto join = [&](std::size_t from, std::size_t to, const DimAssignment& d) {
    std::string out;
    for (std::size_t k = from; k < to; ++k) {
      if (k > from && t.slots[k].space_before) out.push_back(' ');
      out += surface(k, d);
    }
    return out;
  };

  std::vector<Number> targets = {Number::Singular, Number::Plural};
  if (pinned_target) targets = {*pinned_target};
  std::vector<std::optional<Number>> distractors = {std::nullopt};
  if (t.has_dim(Dim::DistractorNumber)) distractors = {Number::Singular, Number::Plural};
  std::vector<bool> grams = {true};
  if (t.has_dim(Dim::Grammaticality)) grams = {true, false};

  for (Number tn : targets) {
    for (auto dn : distractors) {
      for (bool g : grams) {
        Variant v;
        v.dims = DimAssignment{tn, dn, g};
        v.label = variant_label(v.dims, t);
        v.text = capitalize(join(0, t.slots.size(), v.dims));
        if (t.agreement_slot) {
          const std::size_t a = *t.agreement_slot;
          v.left = capitalize(join(0, a, v.dims));
          v.filler = surface(a, v.dims);
          if (a == 0) v.filler = capitalize(v.filler);
          v.right = join(a + 1, t.slots.size(), v.dims);
        }
        if (!g) vs.pairs.emplace_back(vs.variants.size() - 1, vs.variants.size());
        vs.variants.push_back(std::move(v));
      }
    }
  }
  return vs;
}

}  // namespace nounprobe
