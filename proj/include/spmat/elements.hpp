#pragma once

#include <optional>
#include <string_view>

namespace spmat {

inline constexpr int kMaxAtomicNumber = 118;

/// Atomic number for an element symbol, matched case-insensitively.
std::optional<int> atomic_number(std::string_view symbol);

/// Canonical symbol ("Fe") for an atomic number in 1..118.
std::string_view element_symbol(int z);

/// Leading alphabetic token of a CIF site label ("Fe1" -> "Fe", "O2-" -> "O").
std::string_view leading_alpha(std::string_view label);

} // namespace spmat
