#include "nounprobe/lexicon.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "nounprobe/backend.hpp"
#include "nounprobe/error.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

namespace {

constexpr std::array<std::string_view, kWordClassCount> kClassNames = {
    "Noun", "NonGenderedNoun", "Verb", "PastTransVerb", "PresentTenseVerb", "Adj"};

constexpr std::array<WordClass, 4> kEvaluationClasses = {
    WordClass::Noun, WordClass::NonGenderedNoun, WordClass::Verb, WordClass::PastTransVerb};

std::string row_prefix(std::size_t row) { return "lexicon row " + std::to_string(row) + ": "; }

// Returns an error message, or empty when the entry is well formed.
std::string check_entry(const LexicalEntry& e) {
  if (e.lemma.empty()) return "empty lemma";
  if (e.singular.empty()) return "empty singular form";
  if (has_number_forms(e.word_class)) {
    if (e.plural.empty()) return std::string(word_class_name(e.word_class)) + " entry needs two forms";
    if (e.plural == e.singular) return "singular and plural forms are identical";
  } else if (!e.plural.empty()) {
    return std::string(word_class_name(e.word_class)) + " entry takes exactly one form";
  }
  if (e.word_class == WordClass::NonGenderedNoun && e.gendered) return "NonGenderedNoun marked gendered";
  for (const auto* f : {&e.singular, &e.plural}) {
    if (f->find(' ') != std::string::npos) return "surface form contains a space";
  }
  return {};
}

}  // namespace

std::string_view number_name(Number n) { return n == Number::Singular ? "sg" : "pl"; }

std::string_view word_class_name(WordClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::optional<WordClass> parse_word_class(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<WordClass>(i);
  }
  return std::nullopt;
}

bool has_number_forms(WordClass c) {
  return c == WordClass::Noun || c == WordClass::NonGenderedNoun || c == WordClass::Verb ||
         c == WordClass::PresentTenseVerb;
}

std::span<const WordClass> evaluation_classes() { return kEvaluationClasses; }

Lexicon::Lexicon(std::vector<LexicalEntry> entries, std::string provenance)
    : provenance_(std::move(provenance)) {
  std::map<std::pair<std::string, WordClass>, std::size_t> seen;
  for (auto& e : entries) {
    if (auto msg = check_entry(e); !msg.empty()) {
      throw LexiconError(row_prefix(e.row) + msg, {e.row});
    }
    auto [it, fresh] = seen.emplace(std::make_pair(e.lemma, e.word_class), e.row);
    if (!fresh) {
      throw LexiconError("duplicate entry (" + e.lemma + ", " + std::string(word_class_name(e.word_class)) +
                             ") at rows " + std::to_string(it->second) + " and " + std::to_string(e.row),
                         {it->second, e.row});
    }
    by_class_[static_cast<std::size_t>(e.word_class)].push_back(std::move(e));
  }
}

const LexicalEntry* Lexicon::find(std::string_view lemma, WordClass c) const {
  for (const auto& e : of_class(c)) {
    if (e.lemma == lemma) return &e;
  }
  return nullptr;
}

std::size_t Lexicon::size() const {
  std::size_t n = 0;
  for (const auto& v : by_class_) n += v.size();
  return n;
}

void Lexicon::require_nonempty(std::span<const WordClass> classes) const {
  for (auto c : classes) {
    if (of_class(c).empty()) {
      throw ConfigError("lexicon " + provenance_ + ": required class " + std::string(word_class_name(c)) +
                        " is empty");
    }
  }
}

Lexicon parse_lexicon(std::istream& in, std::string provenance, std::span<const WordClass> required) {
  std::vector<LexicalEntry> entries;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 5) {
      throw LexiconError(row_prefix(row) + "expected 5 tab-separated columns, got " + std::to_string(cols.size()),
                         {row});
    }
    auto cls = parse_word_class(cols[3]);
    if (!cls) throw LexiconError(row_prefix(row) + "unknown class '" + cols[3] + "'", {row});
    if (cols[4] != "0" && cols[4] != "1") {
      throw LexiconError(row_prefix(row) + "gendered column must be 0 or 1", {row});
    }
    entries.push_back(LexicalEntry{cols[0], cols[1], cols[2], *cls, cols[4] == "1", row});
  }
  Lexicon lex(std::move(entries), std::move(provenance));
  lex.require_nonempty(required);
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, std::span<const WordClass> required) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon file " + path.string());
  return parse_lexicon(in, path.string(), required);
}

void write_lexicon(std::ostream& out, const Lexicon& lex) {
  for (std::size_t c = 0; c < kWordClassCount; ++c) {
    for (const auto& e : lex.of_class(static_cast<WordClass>(c))) {
      out << e.lemma << '\t' << e.singular << '\t' << e.plural << '\t' << word_class_name(e.word_class) << '\t'
          << (e.gendered ? 1 : 0) << '\n';
    }
  }
}

Lexicon filter_for_backend(const Lexicon& lex, Backend& backend) {
  std::vector<std::string> words;
  std::set<std::string> unique;
  for (std::size_t c = 0; c < kWordClassCount; ++c) {
    for (const auto& e : lex.of_class(static_cast<WordClass>(c))) {
      for (const auto* f : {&e.singular, &e.plural}) {
        if (!f->empty() && unique.insert(*f).second) words.push_back(*f);
      }
    }
  }
  const auto replies = backend.tokenize(words);
  if (replies.size() != words.size()) {
    throw BackendError("tokenize reply has " + std::to_string(replies.size()) + " entries for " +
                       std::to_string(words.size()) + " words");
  }
  std::map<std::string, TokenInfo, std::less<>> info;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (replies[i].count < 0) throw BackendError("tokenize reply has negative count for '" + words[i] + "'");
    info.emplace(words[i], replies[i]);
  }

  const bool masked_only = backend.capabilities().masked_only();
  std::vector<LexicalEntry> kept;
  for (std::size_t c = 0; c < kWordClassCount; ++c) {
    for (const auto& e : lex.of_class(static_cast<WordClass>(c))) {
      const TokenInfo sg = info.at(e.singular);
      bool keep = !sg.unknown;
      if (!e.plural.empty()) {
        const TokenInfo pl = info.at(e.plural);
        keep = keep && !pl.unknown && pl.count == sg.count;
      }
      if (masked_only && e.word_class == WordClass::Verb && sg.count > 1) keep = false;
      if (keep) kept.push_back(e);
    }
  }
  return Lexicon(std::move(kept), lex.provenance() + "|" + backend.id());
}

}  // namespace nounprobe
