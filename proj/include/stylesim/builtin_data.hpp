#pragma once

#include <string_view>

namespace stylesim {

// Shipped data files compiled into the library (data/traits.json, data/catalog.json, data/prompts).
std::string_view builtin_traits_json();
std::string_view builtin_catalog_json();
/// primer, init, update or reinterpret; empty for other names.
std::string_view builtin_prompt(std::string_view name);

}  // namespace stylesim
