#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nounprobe {

enum class Capability : std::uint8_t {
  FullString,
  Masked,
  Tokenize,
  FineTune,
  AddToken,
  Reset,
};

// Wire names: full_string, masked, tokenize, fine_tune, add_token, reset.
std::string_view capability_name(Capability c);
std::optional<Capability> parse_capability(std::string_view name);

class CapabilitySet {
 public:
  CapabilitySet() = default;
  CapabilitySet(std::initializer_list<Capability> caps) {
    for (auto c : caps) insert(c);
  }

  void insert(Capability c) { bits_ |= bit(c); }
  bool has(Capability c) const { return (bits_ & bit(c)) != 0; }
  bool masked_only() const { return has(Capability::Masked) && !has(Capability::FullString); }
  std::vector<std::string> names() const;

  friend bool operator==(CapabilitySet, CapabilitySet) = default;

 private:
  static std::uint32_t bit(Capability c) { return 1u << static_cast<unsigned>(c); }
  std::uint32_t bits_ = 0;
};

struct TokenInfo {
  int count = 0;
  bool unknown = false;
};

struct MaskedQuery {
  std::string left;
  std::string right;
  std::vector<std::string> candidates;
};

// Joins a masked query back into the sentence it stands for. No space is
// inserted before a right context that starts with punctuation.
std::string compose_masked(std::string_view left, std::string_view candidate, std::string_view right);

// A language-model scorer. Scoring and tokenize calls must be safe to issue
// from several threads; fine_tune, add_token and reset are barriers that the
// caller never overlaps with anything else.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const std::string& id() const = 0;
  virtual CapabilitySet capabilities() const = 0;

  // One natural-log score per string.
  virtual std::vector<double> score_strings(std::span<const std::string> strings) = 0;

  // One log-score per candidate filling the gap between left and right.
  virtual std::vector<double> score_masked(const MaskedQuery& query) = 0;

  virtual std::vector<std::vector<double>> score_masked_batch(std::span<const MaskedQuery> queries) {
    std::vector<std::vector<double>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(score_masked(q));
    return out;
  }

  virtual std::vector<TokenInfo> tokenize(std::span<const std::string> words) = 0;
  virtual void fine_tune(std::span<const std::string> sentences, int epochs) = 0;
  virtual void add_token(std::string_view surface) = 0;
  virtual void reset() = 0;
};

}  // namespace nounprobe
