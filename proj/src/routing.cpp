#include "wristloc/routing.hpp"

#include "wristloc/errors.hpp"

#include <cctype>

namespace wristloc {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

bool contains_word(std::string_view text, std::string_view word) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_char(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    if (i > start && iequals(text.substr(start, i - start), word)) return true;
  }
  return false;
}

RouteDecision route(std::string_view prompt, std::string_view signifier) {
  if (prompt.empty()) fail(ErrorCode::InvalidArgument, "prompt must be non-empty");
  if (contains_word(prompt, signifier)) {
    return {RoutePath::GeneralPath, std::string(signifier)};
  }
  return {RoutePath::RegressionPath, std::nullopt};
}

std::string_view to_string(RoutePath path) {
  return path == RoutePath::GeneralPath ? "general" : "regression";
}

}  // namespace wristloc
