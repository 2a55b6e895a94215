#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace nounprobe {

bool is_terminal_punct(char c);

std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

// Word-level tokenizer shared by the n-gram backend and frequency counting:
// lowercase, split on whitespace, and peel trailing punctuation (.,!?;:) off
// each word into single-character tokens.
std::vector<std::string> tokenize(std::string_view text);

// Splits one whitespace-free chunk the same way tokenize() would and calls
// emit for every resulting token.
template <class Emit>
void split_word(std::string_view raw, Emit&& emit) {
  std::size_t end = raw.size();
  while (end > 0 && is_terminal_punct(raw[end - 1])) --end;
  if (end > 0) emit(to_lower(raw.substr(0, end)));
  for (std::size_t i = end; i < raw.size(); ++i) emit(std::string(1, raw[i]));
}

// Streams tokens from `in` in fixed-size chunks; memory use does not grow
// with line length beyond the longest single word.
template <class Emit>
void for_each_token(std::istream& in, Emit&& emit) {
  constexpr std::size_t kChunk = 1 << 16;
  std::string buffer(kChunk, '\0');
  std::string word;
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(kChunk));
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      const char c = buffer[i];
      if (c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        if (!word.empty()) {
          split_word(word, emit);
          word.clear();
        }
      } else {
        word.push_back(c);
      }
    }
  }
  if (!word.empty()) split_word(word, emit);
}

}  // namespace nounprobe
