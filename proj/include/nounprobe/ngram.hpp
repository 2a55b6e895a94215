#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nounprobe/backend.hpp"

namespace nounprobe {

struct NgramOptions {
  int order = 3;
  double k = 0.01;               // add-k pseudo-count
  double finetune_weight = 1.0;  // count increment per sentence per epoch
};

// Word-level n-gram model with add-k smoothing in observed contexts and
// backoff to the next shorter context when a context was never observed:
//
//   P(w | h) = (c(h,w) + k) / (c(h) + k|V|)   if c(h) > 0
//            = P(w | h minus its oldest word)  otherwise
//
// with the empty context as the base case. |V| counts every registered word
// plus <unk>; the sentence-start pad <s> only ever appears in contexts.
class NgramModel {
 public:
  using WordId = std::uint32_t;
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;

  explicit NgramModel(NgramOptions opts = {});

  const NgramOptions& options() const { return opts_; }

  // One sentence per non-blank line. Throws ConfigError on an empty corpus.
  static NgramModel train(std::istream& corpus, NgramOptions opts = {});
  static NgramModel train(std::span<const std::string> sentences, NgramOptions opts = {});

  // Registers a word in the vocabulary without adding counts.
  WordId add_word(std::string_view word);
  WordId id(std::string_view word) const;  // kUnk when unknown
  bool known(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  // Size of the predicted vocabulary, <unk> included.
  std::size_t vocab_size() const { return words_.size() - 1; }
  // All predictable ids (every id except <s>).
  std::vector<WordId> predictable() const;

  // Adds the n-gram counts of one tokenized sentence, registering new words.
  void add_sentence(std::span<const std::string> tokens, double weight);
  // Adds `weight` to the count of ngram.back() after every suffix context of
  // ngram minus its last word (all orders at once).
  void add_ngram(std::span<const WordId> ngram, double weight);

  double count(std::span<const WordId> context, WordId w) const;
  double context_count(std::span<const WordId> context) const;

  // `history` is the preceding ids, oldest first; only the last order-1 are used.
  double prob(WordId w, std::span<const WordId> history) const;

  // Sum of log P over the tokens of `sentence`, contexts padded with <s>.
  double log_prob(std::string_view sentence) const;
  double log_prob_tokens(std::span<const std::string> tokens) const;

  // log P(left + candidate + right) per candidate; each candidate must be a single token.
  std::vector<double> score_masked(std::string_view left, std::string_view right,
                                   std::span<const std::string> candidates) const;

  friend bool operator==(const NgramModel& a, const NgramModel& b);

 private:
  struct ContextHash {
    std::size_t operator()(const std::vector<WordId>& v) const noexcept;
  };
  struct ContextStats {
    double total = 0.0;
    std::unordered_map<WordId, double> next;
    friend bool operator==(const ContextStats&, const ContextStats&) = default;
  };
  using ContextTable = std::unordered_map<std::vector<WordId>, ContextStats, ContextHash>;

  const ContextStats* stats(std::span<const WordId> context) const;

  NgramOptions opts_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  std::vector<ContextTable> tables_;  // tables_[j]: contexts of length j
};

// The n-gram model behind the Backend interface. Keeps the trained model as
// the pristine state that reset() restores. Fine-tuning adds each sentence's
// counts epochs x finetune_weight times.
class NgramBackend final : public Backend {
 public:
  NgramBackend(std::string id, NgramModel trained);

  const std::string& id() const override { return id_; }
  CapabilitySet capabilities() const override;
  std::vector<double> score_strings(std::span<const std::string> strings) override;
  std::vector<double> score_masked(const MaskedQuery& query) override;
  std::vector<TokenInfo> tokenize(std::span<const std::string> words) override;
  void fine_tune(std::span<const std::string> sentences, int epochs) override;
  void add_token(std::string_view surface) override;
  void reset() override;

  const NgramModel& model() const { return model_; }

 private:
  std::string id_;
  NgramModel base_;
  NgramModel model_;
};

}  // namespace nounprobe
