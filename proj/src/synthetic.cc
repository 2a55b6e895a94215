#include "nounprobe/synthetic.hpp"

#include <algorithm>

#include "nounprobe/rng.hpp"

namespace nounprobe {

std::vector<std::string> agreement_corpus(const Lexicon& lex, std::span<const std::string> controls,
                                          std::size_t repeats, std::uint64_t seed) {
  std::vector<std::string> out;
  const auto verbs = lex.of_class(WordClass::Verb);
  for (WordClass nc : {WordClass::Noun, WordClass::NonGenderedNoun}) {
    for (const auto& noun : lex.of_class(nc)) {
      const bool reversed = std::find(controls.begin(), controls.end(), noun.lemma) != controls.end();
      for (const auto& verb : verbs) {
        for (Number n : {Number::Singular, Number::Plural}) {
          const Number vn = reversed ? flip(n) : n;
          const std::string s = "The " + noun.form(n) + " " + verb.form(vn) + ".";
          for (std::size_t r = 0; r < repeats; ++r) out.push_back(s);
        }
      }
    }
  }
  // Neutral frames so every other lexicon word is in the vocabulary.
  for (const auto& v : lex.of_class(WordClass::PastTransVerb)) {
    for (std::size_t r = 0; r < repeats; ++r) out.push_back("They " + v.singular + " it.");
  }
  for (const auto& a : lex.of_class(WordClass::Adj)) {
    for (std::size_t r = 0; r < repeats; ++r) out.push_back("They were " + a.singular + ".");
  }
  Rng rng(derive_seed(seed, {"agreement_corpus"}));
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[uniform_index(rng, i)]);
  return out;
}

}  // namespace nounprobe
