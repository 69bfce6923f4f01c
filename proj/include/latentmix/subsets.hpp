#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace latentmix {

inline int popcount64(uint64_t x) { return std::popcount(x); }

// Visit every nonempty subset of `mask` (including `mask` itself).
template <typename F>
inline void for_each_nonempty_subset(uint64_t mask, F&& f) {
  for (uint64_t sub = mask; sub != 0; sub = (sub - 1) & mask) f(sub);
}

inline std::vector<int> mask_to_indices(uint64_t mask) {
  std::vector<int> out;
  while (mask) {
    const int b = std::countr_zero(mask);
    out.push_back(b);
    mask &= mask - 1;
  }
  return out;
}

inline uint64_t indices_to_mask(const std::vector<int>& idx) {
  uint64_t mask = 0;
  for (int i : idx) mask |= (uint64_t{1} << i);
  return mask;
}

// All nonempty subsets of [n] with at most t elements, ordered by size then value.
inline std::vector<uint64_t> subsets_up_to(int n, int t) {
  if (n < 0 || n > 62) throw std::invalid_argument("subsets_up_to: n out of range");
  std::vector<uint64_t> out;
  for (int size = 1; size <= t && size <= n; ++size) {
    // Gosper's hack over size-`size` subsets of [n].
    uint64_t mask = (uint64_t{1} << size) - 1;
    const uint64_t limit = uint64_t{1} << n;
    while (mask < limit) {
      out.push_back(mask);
      const uint64_t c = mask & -mask;
      const uint64_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
  }
  return out;
}

// Mixed-radix flattening; index 0 is the most significant digit.
inline int64_t flatten_index(const std::vector<int>& digits, const std::vector<int>& dims) {
  if (digits.size() != dims.size()) throw std::invalid_argument("flatten_index: size mismatch");
  int64_t flat = 0;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (digits[i] < 0 || digits[i] >= dims[i]) throw std::out_of_range("flatten_index: digit out of range");
    flat = flat * dims[i] + digits[i];
  }
  return flat;
}

inline std::vector<int> unflatten_index(int64_t flat, const std::vector<int>& dims) {
  std::vector<int> digits(dims.size(), 0);
  for (size_t i = dims.size(); i-- > 0;) {
    digits[i] = static_cast<int>(flat % dims[i]);
    flat /= dims[i];
  }
  if (flat != 0) throw std::out_of_range("unflatten_index: flat index out of range");
  return digits;
}

}  // namespace latentmix
