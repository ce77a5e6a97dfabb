#include "policyscope/info.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "policyscope/common.hpp"

namespace policyscope {

namespace {

template <typename T>
int category_count(std::span<const T> a) {
  int hi = 0;
  for (T v : a) {
    if (static_cast<long long>(v) < 0) throw SchemaError("category codes must be >= 0");
    hi = std::max(hi, static_cast<int>(v));
  }
  return hi + 1;
}

template <typename T>
double entropy_impl(std::span<const T> a) {
  if (a.empty()) throw DataError("entropy: empty sample");
  std::vector<long long> counts(category_count(a), 0);
  for (T v : a) ++counts[static_cast<int>(v)];
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (long long c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return std::max(0.0, h);
}

template <typename A, typename B>
double mi_impl(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size())
    throw SchemaError(fmt::format("mutual_information: length mismatch {} vs {}",
                                  a.size(), b.size()));
  if (a.empty()) throw DataError("mutual_information: empty sample");
  const int ka = category_count(a);
  const int kb = category_count(b);
  std::vector<long long> joint(static_cast<std::size_t>(ka) * kb, 0);
  std::vector<long long> ca(ka, 0), cb(kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int x = static_cast<int>(a[i]);
    const int y = static_cast<int>(b[i]);
    ++joint[static_cast<std::size_t>(x) * kb + y];
    ++ca[x];
    ++cb[y];
  }
  const double n = static_cast<double>(a.size());
  double info = 0.0;
  for (int x = 0; x < ka; ++x) {
    for (int y = 0; y < kb; ++y) {
      const long long c = joint[static_cast<std::size_t>(x) * kb + y];
      if (c == 0) continue;
      info += (c / n) * std::log(c * n / (static_cast<double>(ca[x]) * cb[y]));
    }
  }
  return std::max(0.0, info);
}

}  // namespace

double entropy(std::span<const int> a) { return entropy_impl(a); }
double entropy(std::span<const std::uint8_t> a) { return entropy_impl(a); }

double mutual_information(std::span<const int> a, std::span<const int> b) {
  return mi_impl(a, b);
}
double mutual_information(std::span<const int> a, std::span<const std::uint8_t> b) {
  return mi_impl(a, b);
}
double mutual_information(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return mi_impl(a, b);
}

}  // namespace policyscope
