#include <sstream>

#include "doctest.h"
#include "nounprobe/rng.hpp"
#include "nounprobe/text.hpp"
#include "support.hpp"

using namespace nounprobe;

TEST_CASE("tokenize lowercases and peels trailing punctuation") {
  CHECK(tokenize("The cat walks.") == std::vector<std::string>{"the", "cat", "walks", "."});
  CHECK(tokenize("  Hello,   world!? ") == std::vector<std::string>{"hello", ",", "world", "!", "?"});
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("don't.") == std::vector<std::string>{"don't", "."});
}

TEST_CASE("streaming tokenizer agrees with tokenize across chunk boundaries") {
  Rng rng(5);
  const std::vector<std::string> words = {"The", "cat", "walks.", "Cats,", "walk!", "a", "b?", "\n", "\t", "x;y:"};
  std::string text;
  while (text.size() < 200000) {
    text += words[uniform_index(rng, words.size())];
    text += uniform_index(rng, 5) == 0 ? "\n" : " ";
  }
  std::vector<std::string> streamed;
  std::istringstream in(text);
  for_each_token(in, [&](const std::string& t) { streamed.push_back(t); });
  CHECK(streamed == tokenize(text));
  CHECK(streamed == testing::naive_tokens(text));
}

TEST_CASE("split keeps empty fields") {
  CHECK(split("a\t\tb", '\t') == std::vector<std::string>{"a", "", "b"});
  CHECK(trim("  x y \n") == "x y");
}

TEST_CASE("derived seeds differ per key and are stable") {
  CHECK(derive_seed(1, {"cat", "SVA_Simple"}) == derive_seed(1, {"cat", "SVA_Simple"}));
  CHECK(derive_seed(1, {"cat", "SVA_Simple"}) != derive_seed(1, {"cats", "SVA_Simple"}));
  CHECK(derive_seed(1, {"ab", "c"}) != derive_seed(1, {"a", "bc"}));
  CHECK(derive_seed(1, {"cat"}) != derive_seed(2, {"cat"}));
}

TEST_CASE("uniform_index stays in range") {
  Rng rng(3);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 1000ULL, (1ULL << 63) + 5}) {
    for (int i = 0; i < 100; ++i) CHECK(uniform_index(rng, bound) < bound);
  }
}
