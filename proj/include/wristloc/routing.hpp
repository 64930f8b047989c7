#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace wristloc {

inline constexpr std::string_view kDefaultSignifier = "question";

enum class RoutePath { GeneralPath, RegressionPath };

struct RouteDecision {
  RoutePath path = RoutePath::RegressionPath;
  std::optional<std::string> matched_signifier;
};

/// True when `word` occurs in `text` as a whole word, ignoring ASCII case.
/// Words are maximal runs of alphanumeric characters.
bool contains_word(std::string_view text, std::string_view word);

/// General prompts (those naming the signifier) go to the untouched base
/// model; everything else goes to the regression path.
RouteDecision route(std::string_view prompt, std::string_view signifier = kDefaultSignifier);

std::string_view to_string(RoutePath path);

}  // namespace wristloc
