#include "nounprobe/backend.hpp"

#include <array>

#include "nounprobe/text.hpp"

namespace nounprobe {

namespace {
constexpr std::array<std::string_view, 6> kNames = {
    "full_string", "masked", "tokenize", "fine_tune", "add_token", "reset"};
}

std::string_view capability_name(Capability c) { return kNames[static_cast<std::size_t>(c)]; }

std::optional<Capability> parse_capability(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Capability>(i);
  }
  return std::nullopt;
}

std::vector<std::string> CapabilitySet::names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (has(static_cast<Capability>(i))) out.emplace_back(kNames[i]);
  }
  return out;
}

std::string compose_masked(std::string_view left, std::string_view candidate, std::string_view right) {
  std::string out(left);
  if (!out.empty() && !candidate.empty()) out.push_back(' ');
  out.append(candidate);
  if (!right.empty()) {
    if (!out.empty() && !is_terminal_punct(right.front())) out.push_back(' ');
    out.append(right);
  }
  return out;
}

}  // namespace nounprobe
