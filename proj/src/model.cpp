#include "polyformer/model.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace polyformer {

namespace {

std::int64_t checked_int_pow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::int64_t>::max() / base)
      throw std::overflow_error("parameter bound exceeds 64-bit range");
    r *= base;
  }
  return r;
}

}  // namespace

void SparseReadout::sort_entries() {
  std::sort(entries.begin(), entries.end(), [](const ReadoutEntry& a, const ReadoutEntry& b) {
    return a.token != b.token ? a.token < b.token : a.slot < b.slot;
  });
}

double SparseReadout::at(int token, int slot) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::pair<int, int>{token, slot},
                             [](const ReadoutEntry& e, const std::pair<int, int>& key) {
                               return e.token != key.first ? e.token < key.first : e.slot < key.second;
                             });
  if (it != entries.end() && it->token == token && it->slot == slot) return it->weight;
  return 0.0;
}

std::int64_t count_free_params(const TransformerModel& m) {
  return static_cast<std::int64_t>(m.n) * m.d + static_cast<std::int64_t>(m.readout.entries.size()) + 1;
}

std::int64_t count_nonzeros(const TransformerModel& m) {
  return count_free_params(m) + static_cast<std::int64_t>(m.q) * (2 * static_cast<std::int64_t>(m.n) + 8);
}

std::int64_t free_param_bound(int d, int q) {
  return checked_int_pow(d, q + 1) + static_cast<std::int64_t>(q) * checked_int_pow(d, q) + 1;
}

std::int64_t nonzero_bound(int d, int q) {
  return checked_int_pow(d, q + 1) + 3 * static_cast<std::int64_t>(q) * checked_int_pow(d, q) +
         8 * static_cast<std::int64_t>(q) + 1;
}

}  // namespace polyformer
