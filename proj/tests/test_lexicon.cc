#include <sstream>

#include "doctest.h"
#include "nounprobe/lexicon.hpp"
#include "support.hpp"

using namespace nounprobe;

namespace {

std::string valid_rows() {
  return "cat\tcat\tcats\tNoun\t0\n"
         "lawyer\tlawyer\tlawyers\tNonGenderedNoun\t0\n"
         "walk\twalks\twalk\tVerb\t0\n"
         "liked\tliked\t\tPastTransVerb\t0\n";
}

}  // namespace

TEST_CASE("valid lexicon partitions by class") {
  auto lex = testing::lexicon_from("# comment\n" + valid_rows() + "happy\thappy\t\tAdj\t0\n");
  CHECK(lex.size() == 5);
  REQUIRE(lex.of_class(WordClass::Noun).size() == 1);
  CHECK(lex.of_class(WordClass::Noun)[0].plural == "cats");
  CHECK(lex.of_class(WordClass::Noun)[0].row == 2);
  CHECK(lex.find("walk", WordClass::Verb) != nullptr);
  CHECK(lex.find("walk", WordClass::Noun) == nullptr);
}

TEST_CASE("duplicate lemma in one class names both rows") {
  try {
    testing::lexicon_from(valid_rows() + "cat\tcat\tcatz\tNoun\t0\n");
    FAIL("expected LexiconError");
  } catch (const LexiconError& e) {
    CHECK(e.rows() == std::vector<std::size_t>{1, 5});
    CHECK(std::string(e.what()).find("cat") != std::string::npos);
  }
}

TEST_CASE("entry validation") {
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "sheep\tsheep\tsheep\tNoun\t0\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "dog\tdog\t\tNoun\t0\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "red\tred\treds\tAdj\t0\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "saw\tsaw\tsaws\tPastTransVerb\t0\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "king\tking\tkings\tNonGenderedNoun\t1\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "x\tnew york\tnew yorks\tNoun\t0\n"), LexiconError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "x\tx\txs\tPronoun\t0\n"), ConfigError);
  CHECK_THROWS_AS(testing::lexicon_from(valid_rows() + "x\tx\txs\tNoun\n"), ConfigError);
}

TEST_CASE("a required class left empty is a config error") {
  CHECK_THROWS_AS(testing::lexicon_from("cat\tcat\tcats\tNoun\t0\n"), ConfigError);
}

TEST_CASE("lexicon round-trips through write_lexicon") {
  auto lex = testing::small_lexicon();
  std::ostringstream out;
  write_lexicon(out, lex);
  auto again = testing::lexicon_from(out.str());
  CHECK(again.size() == lex.size());
  for (auto c : {WordClass::Noun, WordClass::Verb, WordClass::Adj}) {
    REQUIRE(again.of_class(c).size() == lex.of_class(c).size());
    for (std::size_t i = 0; i < lex.of_class(c).size(); ++i) CHECK(again.of_class(c)[i] == lex.of_class(c)[i]);
  }
}

TEST_CASE("the shipped lexicon loads") {
  auto lex = load_lexicon(LEXICON_PATH);
  CHECK(lex.of_class(WordClass::Noun).size() >= 30);
  for (const auto& e : lex.of_class(WordClass::Noun)) CHECK(e.singular != e.plural);
}

TEST_CASE("backend filtering drops unknown and mismatched words") {
  auto lex = testing::small_lexicon();
  testing::FakeBackend b([](const std::string&) { return 0.0; });
  b.token_info = [](const std::string& w) -> TokenInfo {
    if (w == "dogs") return {1, true};       // unknown plural: drop dog
    if (w == "defendants") return {3, false};  // 1 vs 3 tokens: drop
    if (w == "defendant") return {1, false};
    if (w == "jumps" || w == "jump") return {2, false};  // consistent multi-token verb
    return {1, false};
  };
  auto f = filter_for_backend(lex, b);
  CHECK(f.find("dog", WordClass::Noun) == nullptr);
  CHECK(f.find("defendant", WordClass::Noun) == nullptr);
  CHECK(f.find("cat", WordClass::Noun) != nullptr);
  CHECK(f.find("jump", WordClass::Verb) != nullptr);

  testing::FakeBackend masked([](const std::string&) { return 0.0; },
                              {Capability::Masked, Capability::Tokenize});
  masked.token_info = b.token_info;
  auto fm = filter_for_backend(lex, masked);
  CHECK(fm.find("jump", WordClass::Verb) == nullptr);
  CHECK(fm.find("walk", WordClass::Verb) != nullptr);
}
