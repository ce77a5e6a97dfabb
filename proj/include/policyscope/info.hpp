#pragma once

#include <cstdint>
#include <span>

namespace policyscope {

// Plug-in (empirical contingency) estimators over categorical samples, in
// nats. Inputs are non-negative category codes; 0*log(0) counts as 0 and
// results are clamped at >= 0 against rounding.
double entropy(std::span<const int> a);
double entropy(std::span<const std::uint8_t> a);

double mutual_information(std::span<const int> a, std::span<const int> b);
double mutual_information(std::span<const int> a, std::span<const std::uint8_t> b);
double mutual_information(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace policyscope
