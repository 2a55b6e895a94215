#include "nounprobe/ngram.hpp"

#include <cmath>

#include "nounprobe/error.hpp"
#include "nounprobe/rng.hpp"
#include "nounprobe/text.hpp"

namespace nounprobe {

std::size_t NgramModel::ContextHash::operator()(const std::vector<WordId>& v) const noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (auto id : v) h = splitmix64(h ^ id);
  return static_cast<std::size_t>(h);
}

NgramModel::NgramModel(NgramOptions opts) : opts_(opts) {
  if (opts_.order < 1) throw ConfigError("n-gram order must be at least 1");
  if (!(opts_.k > 0.0)) throw ConfigError("add-k constant must be positive");
  words_ = {"<unk>", "<s>"};
  index_ = {{"<unk>", kUnk}, {"<s>", kBos}};
  tables_.resize(static_cast<std::size_t>(opts_.order));
}

NgramModel NgramModel::train(std::istream& corpus, NgramOptions opts) {
  NgramModel m(opts);
  std::string line;
  bool any = false;
  while (std::getline(corpus, line)) {
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    m.add_sentence(tokens, 1.0);
    any = true;
  }
  if (!any) throw ConfigError("n-gram training corpus is empty");
  return m;
}

NgramModel NgramModel::train(std::span<const std::string> sentences, NgramOptions opts) {
  NgramModel m(opts);
  bool any = false;
  for (const auto& s : sentences) {
    const auto tokens = tokenize(s);
    if (tokens.empty()) continue;
    m.add_sentence(tokens, 1.0);
    any = true;
  }
  if (!any) throw ConfigError("n-gram training corpus is empty");
  return m;
}

NgramModel::WordId NgramModel::add_word(std::string_view word) {
  auto key = to_lower(word);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<WordId>(words_.size());
  words_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

NgramModel::WordId NgramModel::id(std::string_view word) const {
  auto it = index_.find(to_lower(word));
  if (it == index_.end() || it->second == kBos) return kUnk;
  return it->second;
}

bool NgramModel::known(std::string_view word) const { return id(word) != kUnk; }

std::vector<NgramModel::WordId> NgramModel::predictable() const {
  std::vector<WordId> out;
  for (WordId i = 0; i < words_.size(); ++i) {
    if (i != kBos) out.push_back(i);
  }
  return out;
}

void NgramModel::add_ngram(std::span<const WordId> ngram, double weight) {
  if (ngram.empty()) return;
  const WordId w = ngram.back();
  const auto context = ngram.first(ngram.size() - 1);
  const std::size_t max_len = std::min(context.size(), tables_.size() - 1);
  for (std::size_t j = 0; j <= max_len; ++j) {
    std::vector<WordId> ctx(context.end() - static_cast<std::ptrdiff_t>(j), context.end());
    auto& st = tables_[j][ctx];
    st.total += weight;
    st.next[w] += weight;
  }
}

void NgramModel::add_sentence(std::span<const std::string> tokens, double weight) {
  const std::size_t pad = tables_.size() - 1;
  std::vector<WordId> ids(pad, kBos);
  for (const auto& t : tokens) ids.push_back(add_word(t));
  for (std::size_t i = pad; i < ids.size(); ++i) {
    add_ngram(std::span<const WordId>(ids.data() + i - pad, pad + 1), weight);
  }
}

const NgramModel::ContextStats* NgramModel::stats(std::span<const WordId> context) const {
  if (context.size() >= tables_.size()) return nullptr;
  const auto& table = tables_[context.size()];
  auto it = table.find(std::vector<WordId>(context.begin(), context.end()));
  return it == table.end() ? nullptr : &it->second;
}

double NgramModel::count(std::span<const WordId> context, WordId w) const {
  const auto* st = stats(context);
  if (!st) return 0.0;
  auto it = st->next.find(w);
  return it == st->next.end() ? 0.0 : it->second;
}

double NgramModel::context_count(std::span<const WordId> context) const {
  const auto* st = stats(context);
  return st ? st->total : 0.0;
}

double NgramModel::prob(WordId w, std::span<const WordId> history) const {
  const double kv = opts_.k * static_cast<double>(vocab_size());
  std::size_t len = std::min(history.size(), tables_.size() - 1);
  for (;; --len) {
    const auto* st = stats(history.last(len));
    if (st && st->total > 0.0) {
      auto it = st->next.find(w);
      const double c = it == st->next.end() ? 0.0 : it->second;
      return (c + opts_.k) / (st->total + kv);
    }
    if (len == 0) return opts_.k / kv;  // nothing observed at all: uniform
  }
}

double NgramModel::log_prob_tokens(std::span<const std::string> tokens) const {
  const std::size_t pad = tables_.size() - 1;
  std::vector<WordId> ids(pad, kBos);
  double total = 0.0;
  for (const auto& t : tokens) {
    const WordId w = id(t);
    total += std::log(prob(w, ids));
    ids.push_back(w);
  }
  return total;
}

double NgramModel::log_prob(std::string_view sentence) const { return log_prob_tokens(tokenize(sentence)); }

std::vector<double> NgramModel::score_masked(std::string_view left, std::string_view right,
                                             std::span<const std::string> candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (tokenize(c).size() != 1) throw Error("masked candidate '" + c + "' is not a single word");
    out.push_back(log_prob(compose_masked(left, c, right)));
  }
  return out;
}

bool operator==(const NgramModel& a, const NgramModel& b) {
  return a.opts_.order == b.opts_.order && a.opts_.k == b.opts_.k && a.words_ == b.words_ && a.tables_ == b.tables_;
}

NgramBackend::NgramBackend(std::string id, NgramModel trained)
    : id_(std::move(id)), base_(trained), model_(std::move(trained)) {}

CapabilitySet NgramBackend::capabilities() const {
  return {Capability::FullString, Capability::Masked,   Capability::Tokenize,
          Capability::FineTune,   Capability::AddToken, Capability::Reset};
}

std::vector<double> NgramBackend::score_strings(std::span<const std::string> strings) {
  std::vector<double> out;
  out.reserve(strings.size());
  for (const auto& s : strings) out.push_back(model_.log_prob(s));
  return out;
}

std::vector<double> NgramBackend::score_masked(const MaskedQuery& query) {
  try {
    return model_.score_masked(query.left, query.right, query.candidates);
  } catch (const Error& e) {
    throw BackendError(e.what());
  }
}

std::vector<TokenInfo> NgramBackend::tokenize(std::span<const std::string> words) {
  std::vector<TokenInfo> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(TokenInfo{1, !model_.known(w)});
  return out;
}

void NgramBackend::fine_tune(std::span<const std::string> sentences, int epochs) {
  if (epochs < 0) throw BackendError("fine_tune epochs must be non-negative");
  if (epochs == 0) return;
  const double weight = static_cast<double>(epochs) * model_.options().finetune_weight;
  for (const auto& s : sentences) {
    const auto tokens = nounprobe::tokenize(s);
    if (!tokens.empty()) model_.add_sentence(tokens, weight);
  }
}

void NgramBackend::add_token(std::string_view surface) {
  if (nounprobe::tokenize(surface).size() != 1) {
    throw BackendError("add_token surface '" + std::string(surface) + "' is not a single word");
  }
  model_.add_word(surface);
}

void NgramBackend::reset() { model_ = base_; }

}  // namespace nounprobe
