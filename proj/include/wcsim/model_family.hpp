#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace wcsim {

/// The four match-score models.
enum class ModelFamily { independent, bivariate, inflated, nested };

inline constexpr std::array<ModelFamily, 4> kAllFamilies = {
    ModelFamily::independent, ModelFamily::nested, ModelFamily::bivariate,
    ModelFamily::inflated};

constexpr std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::independent: return "independent";
    case ModelFamily::bivariate: return "bivariate";
    case ModelFamily::inflated: return "inflated";
    case ModelFamily::nested: return "nested";
  }
  return "unknown";
}

inline std::optional<ModelFamily> parse_family(std::string_view s) {
  for (auto f : kAllFamilies)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

}  // namespace wcsim
