#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace seedsched {

// Union-find over dense integer ids, path halving + union by size.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  // Path halving touches only the internal representation; logically const.
  std::size_t find(std::size_t x) const {
    while (x != parent_[x]) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  bool same(std::size_t a, std::size_t b) const { return find(a) == find(b); }

  std::size_t set_size(std::size_t x) const { return size_[find(x)]; }

  std::size_t count() const { return parent_.size(); }

 private:
  mutable std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace seedsched
