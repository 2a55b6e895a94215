#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nounprobe {

class Backend;

enum class Number { Singular, Plural };

inline Number flip(Number n) { return n == Number::Singular ? Number::Plural : Number::Singular; }
std::string_view number_name(Number n);  // "sg" / "pl"

enum class WordClass {
  Noun,
  NonGenderedNoun,
  Verb,              // present 3sg form in `singular`, 3pl form in `plural`
  PastTransVerb,
  PresentTenseVerb,  // same two-form layout as Verb
  Adj,
};
inline constexpr std::size_t kWordClassCount = 6;

std::string_view word_class_name(WordClass c);
std::optional<WordClass> parse_word_class(std::string_view name);

// Classes whose entries carry distinct singular and plural surface forms.
bool has_number_forms(WordClass c);

struct LexicalEntry {
  std::string lemma;
  std::string singular;
  std::string plural;  // empty: no distinct plural
  WordClass word_class = WordClass::Noun;
  bool gendered = false;
  std::size_t row = 0;  // 1-based source line, 0 when synthesized

  const std::string& form(Number n) const { return n == Number::Singular ? singular : plural; }

  friend bool operator==(const LexicalEntry& a, const LexicalEntry& b) {
    return a.lemma == b.lemma && a.singular == b.singular && a.plural == b.plural &&
           a.word_class == b.word_class && a.gendered == b.gendered;
  }
};

// Immutable, validated word lists partitioned by class.
class Lexicon {
 public:
  Lexicon() = default;

  // Validates every entry; throws LexiconError naming the offending rows.
  Lexicon(std::vector<LexicalEntry> entries, std::string provenance);

  std::span<const LexicalEntry> of_class(WordClass c) const {
    return by_class_[static_cast<std::size_t>(c)];
  }
  const LexicalEntry* find(std::string_view lemma, WordClass c) const;
  std::size_t size() const;
  const std::string& provenance() const { return provenance_; }

  // Throws ConfigError when any listed class has no entries.
  void require_nonempty(std::span<const WordClass> classes) const;

 private:
  std::array<std::vector<LexicalEntry>, kWordClassCount> by_class_;
  std::string provenance_;
};

// Classes the ten evaluation templates draw from.
std::span<const WordClass> evaluation_classes();

// TSV: lemma, singular, plural, class, gendered(0|1). '#' lines are comments.
Lexicon parse_lexicon(std::istream& in, std::string provenance,
                      std::span<const WordClass> required = evaluation_classes());
Lexicon load_lexicon(const std::filesystem::path& path,
                     std::span<const WordClass> required = evaluation_classes());

void write_lexicon(std::ostream& out, const Lexicon& lex);

// Drops entries a backend cannot score cleanly: any form tokenized to
// unknown, singular/plural forms with different token counts, and (for
// masked-only backends) multi-token Verb forms.
Lexicon filter_for_backend(const Lexicon& lex, Backend& backend);

}  // namespace nounprobe
