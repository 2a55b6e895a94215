#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nounprobe/lexicon.hpp"

namespace nounprobe {

// "The <noun> <verb>." for every noun and verb of the lexicon, with the verb
// agreeing in number with the noun. Nouns listed in `controls` get the
// opposite verb form instead, so a model trained on the corpus learns the
// reversed pattern for them. Past transitive verbs and adjectives appear in
// number-neutral frames ("They <verb> it.", "They were <adj>.") so that they
// are in the vocabulary. Each sentence appears `repeats` times and the
// whole corpus is shuffled with `seed`.
std::vector<std::string> agreement_corpus(const Lexicon& lex, std::span<const std::string> controls,
                                          std::size_t repeats = 1, std::uint64_t seed = 1);

}  // namespace nounprobe
