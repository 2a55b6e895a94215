#pragma once

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nounprobe/backend.hpp"
#include "nounprobe/error.hpp"
#include "nounprobe/lexicon.hpp"
#include "nounprobe/rng.hpp"
#include "nounprobe/templates.hpp"

namespace testing {

inline nounprobe::Lexicon lexicon_from(const std::string& tsv) {
  std::istringstream in(tsv);
  return nounprobe::parse_lexicon(in, "test");
}

// Small lexicon covering every class the builtin templates use.
inline nounprobe::Lexicon small_lexicon() {
  return lexicon_from(
      "cat\tcat\tcats\tNoun\t0\n"
      "horse\thorse\thorses\tNoun\t0\n"
      "defendant\tdefendant\tdefendants\tNoun\t0\n"
      "boy\tboy\tboys\tNoun\t1\n"
      "dog\tdog\tdogs\tNoun\t0\n"
      "lawyer\tlawyer\tlawyers\tNonGenderedNoun\t0\n"
      "doctor\tdoctor\tdoctors\tNonGenderedNoun\t0\n"
      "walk\twalks\twalk\tVerb\t0\n"
      "jump\tjumps\tjump\tVerb\t0\n"
      "sleep\tsleeps\tsleep\tVerb\t0\n"
      "walk\twalks\twalk\tPresentTenseVerb\t0\n"
      "jump\tjumps\tjump\tPresentTenseVerb\t0\n"
      "incriminated\tincriminated\t\tPastTransVerb\t0\n"
      "admired\tadmired\t\tPastTransVerb\t0\n"
      "happy\thappy\t\tAdj\t0\n"
      "tall\ttall\t\tAdj\t0\n");
}

// Scores strings through a caller-supplied function; everything else is a
// no-op. Failing calls can be injected.
class FakeBackend : public nounprobe::Backend {
 public:
  using Scorer = std::function<double(const std::string&)>;

  explicit FakeBackend(Scorer scorer, nounprobe::CapabilitySet caps = {nounprobe::Capability::FullString,
                                                                       nounprobe::Capability::Masked,
                                                                       nounprobe::Capability::Tokenize})
      : scorer_(std::move(scorer)), caps_(caps) {}

  const std::string& id() const override { return id_; }
  nounprobe::CapabilitySet capabilities() const override { return caps_; }

  std::vector<double> score_strings(std::span<const std::string> strings) override {
    maybe_fail();
    std::vector<double> out;
    for (const auto& s : strings) out.push_back(scorer_(s));
    return out;
  }
  std::vector<double> score_masked(const nounprobe::MaskedQuery& q) override {
    maybe_fail();
    std::vector<double> out;
    for (const auto& c : q.candidates) out.push_back(scorer_(nounprobe::compose_masked(q.left, c, q.right)));
    return out;
  }
  std::vector<nounprobe::TokenInfo> tokenize(std::span<const std::string> words) override {
    std::vector<nounprobe::TokenInfo> out;
    for (const auto& w : words) out.push_back(token_info ? token_info(w) : nounprobe::TokenInfo{1, false});
    return out;
  }
  void fine_tune(std::span<const std::string>, int) override {}
  void add_token(std::string_view) override {}
  void reset() override {}

  std::function<nounprobe::TokenInfo(const std::string&)> token_info;
  int fail_next = 0;          // number of upcoming scoring calls that throw
  bool fail_always = false;
  std::string id_ = "fake";

 private:
  void maybe_fail() {
    if (fail_always || fail_next > 0) {
      if (fail_next > 0) --fail_next;
      throw nounprobe::BackendError("injected failure");
    }
  }

  Scorer scorer_;
  nounprobe::CapabilitySet caps_;
};

// Naive word tokenizer written independently of the library's.
inline std::vector<std::string> naive_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    std::string tail;
    while (!w.empty() && std::string(".,!?;:").find(w.back()) != std::string::npos) {
      tail.insert(tail.begin(), w.back());
      w.pop_back();
    }
    if (!w.empty()) {
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(w);
    }
    for (char c : tail) out.push_back(std::string(1, c));
  }
  return out;
}

// Roughly `bytes` of text over a small vocabulary in mixed case, with
// trailing punctuation and irregular whitespace.
inline std::string synthetic_text(std::size_t bytes, std::uint64_t seed) {
  static const std::vector<std::string> words = {"the", "The", "cat", "Cat", "cats", "CATS", "dog", "dogs",
                                                 "horse", "horses", "walks", "walk", "a", "big", "Defendant",
                                                 "defendants", "said", "that", "zebra", "catsup"};
  static const std::vector<std::string> tails = {"", "", "", "", ".", ",", "!", "?", ";", ":", "..", "?!"};
  static const std::vector<std::string> gaps = {" ", " ", " ", "  ", "\n", "\t", " \n"};
  nounprobe::Rng rng(seed);
  std::string out;
  out.reserve(bytes + 32);
  while (out.size() < bytes) {
    out += words[nounprobe::uniform_index(rng, words.size())];
    out += tails[nounprobe::uniform_index(rng, tails.size())];
    out += gaps[nounprobe::uniform_index(rng, gaps.size())];
  }
  return out;
}

// Token counts by a plain whole-text scan.
inline std::map<std::string, std::uint64_t> naive_counts(const std::string& text, std::uint64_t& total) {
  std::map<std::string, std::uint64_t> out;
  const auto toks = naive_tokens(text);
  total = toks.size();
  for (const auto& t : toks) ++out[t];
  return out;
}

// Brute-force n-gram scorer: every probability is computed by scanning the
// whole padded corpus for the context, with the same add-k-then-back-off rule.
class NaiveNgram {
 public:
  NaiveNgram(const std::vector<std::string>& corpus, int order, double k) : order_(order), k_(k) {
    for (const auto& s : corpus) {
      auto toks = naive_tokens(s);
      if (toks.empty()) continue;
      std::vector<std::string> padded(static_cast<std::size_t>(order - 1), "<s>");
      for (auto& t : toks) {
        vocab_.insert(t);
        padded.push_back(t);
      }
      sentences_.push_back(std::move(padded));
    }
    vocab_.insert("<unk>");
  }

  std::size_t vocab_size() const { return vocab_.size(); }
  const std::set<std::string>& vocab() const { return vocab_; }

  // Occurrences of `ctx` followed by `w` (any w when w is empty).
  double count(const std::vector<std::string>& ctx, const std::string& w) const {
    double c = 0;
    for (const auto& s : sentences_) {
      for (std::size_t i = static_cast<std::size_t>(order_ - 1); i < s.size(); ++i) {
        if (i < ctx.size()) continue;
        bool match = true;
        for (std::size_t j = 0; j < ctx.size() && match; ++j) match = s[i - ctx.size() + j] == ctx[j];
        if (match && (w.empty() || s[i] == w)) c += 1;
      }
    }
    return c;
  }

  double prob(const std::string& w, std::vector<std::string> history) const {
    if (history.size() > static_cast<std::size_t>(order_ - 1)) {
      history.erase(history.begin(), history.end() - (order_ - 1));
    }
    const double kv = k_ * static_cast<double>(vocab_.size());
    for (;;) {
      const double total = count(history, "");
      if (total > 0) return (count(history, w) + k_) / (total + kv);
      if (history.empty()) return k_ / kv;
      history.erase(history.begin());
    }
  }

  double log_prob(const std::string& sentence) const {
    std::vector<std::string> history(static_cast<std::size_t>(order_ - 1), "<s>");
    double total = 0;
    for (auto t : naive_tokens(sentence)) {
      if (!vocab_.count(t)) t = "<unk>";
      total += std::log(prob(t, history));
      history.push_back(t);
    }
    return total;
  }

 private:
  int order_;
  double k_;
  std::set<std::string> vocab_;
  std::vector<std::vector<std::string>> sentences_;
};

// Corpus of grammatical template sentences in which each noun's agreement is
// corrupted at its own rate, so that per-noun scores vary across tasks.
inline std::vector<std::string> noisy_template_corpus(const nounprobe::Lexicon& lex, std::size_t per_noun,
                                                      std::uint64_t seed) {
  using namespace nounprobe;
  const auto templates = evaluation_templates(builtin_templates());
  Rng rng(seed);
  std::vector<std::string> out;
  const auto nouns = lex.of_class(WordClass::Noun);
  for (std::size_t ni = 0; ni < nouns.size(); ++ni) {
    const double error_rate = 0.05 + 0.4 * static_cast<double>(ni) / static_cast<double>(nouns.size());
    for (std::size_t i = 0; i < per_noun; ++i) {
      const auto& t = templates[uniform_index(rng, templates.size())];
      std::vector<LexicalEntry> fill;
      for (auto c : t.fill_classes()) {
        const auto pool = lex.of_class(c);
        fill.push_back(pool[uniform_index(rng, pool.size())]);
      }
      const auto vs = expand_variants(t, nouns[ni], fill);
      const auto& pair = vs.pairs[uniform_index(rng, vs.pairs.size())];
      const bool corrupt = static_cast<double>(uniform_index(rng, 1000000)) / 1e6 < error_rate;
      out.push_back(vs.variants[corrupt ? pair.second : pair.first].text);
    }
  }
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[uniform_index(rng, i)]);
  return out;
}

// A run directory layout for CLI tests: two n-gram backends trained on
// different noisy corpora, one frequency corpus, and a config tying them
// together. Returns the config path.
inline std::filesystem::path write_run_fixture(const std::filesystem::path& dir, const std::string& lexicon_path,
                                               std::size_t samples, std::size_t per_noun = 60) {
  namespace fs = std::filesystem;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto lex = nounprobe::load_lexicon(lexicon_path);
  for (int b = 0; b < 2; ++b) {
    std::ofstream out(dir / ("corpus_" + std::to_string(b) + ".txt"));
    for (const auto& line : noisy_template_corpus(lex, per_noun, 40 + static_cast<std::uint64_t>(b))) out << line << '\n';
  }
  std::ofstream(dir / "freq.txt") << synthetic_text(200000, 5);
  std::ofstream cfg(dir / "config.json");
  cfg << "{\n"
      << "  \"lexicon\": \"" << lexicon_path << "\",\n"
      << "  \"samples_per_cell\": " << samples << ",\n"
      << "  \"seed\": 7,\n"
      << "  \"output_dir\": \"runs\",\n"
      << "  \"backends\": [\n"
      << "    {\"id\": \"tri\", \"kind\": \"ngram\", \"corpus\": \"corpus_0.txt\", \"order\": 3},\n"
      << "    {\"id\": \"bi\", \"kind\": \"ngram\", \"corpus\": \"corpus_1.txt\", \"order\": 2}\n"
      << "  ],\n"
      << "  \"corpora\": [{\"id\": \"toy\", \"path\": \"freq.txt\"}]\n"
      << "}\n";
  return dir / "config.json";
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace testing
