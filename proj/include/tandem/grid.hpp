#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"

namespace tandem {

/// Finite box {0..L1} x {0..L2} the infinite lattice is truncated to.
/// `margin` is the width of the boundary band excluded by structural checks.
struct TruncationSpec {
  int L1 = 60;
  int L2 = 60;
  int margin = 3;

  void validate() const {
    if (L1 < 2 || L2 < 2) throw std::invalid_argument("truncation: L1 and L2 must be >= 2");
    if (margin < 0 || 2 * margin >= std::min(L1, L2))
      throw std::invalid_argument("truncation: need 0 <= margin < min(L1, L2) / 2");
  }

  std::size_t num_states() const noexcept {
    return static_cast<std::size_t>(L1 + 1) * static_cast<std::size_t>(L2 + 1);
  }
  std::size_t index(State x) const noexcept {
    return static_cast<std::size_t>(x.x1) * static_cast<std::size_t>(L2 + 1) +
           static_cast<std::size_t>(x.x2);
  }
  State state(std::size_t i) const noexcept {
    return {static_cast<int>(i / static_cast<std::size_t>(L2 + 1)),
            static_cast<int>(i % static_cast<std::size_t>(L2 + 1))};
  }
  bool in_box(State x) const noexcept { return x.x1 >= 0 && x.x2 >= 0 && x.x1 <= L1 && x.x2 <= L2; }
  /// Inside the box shrunk by `margin` on every side.
  bool interior(State x) const noexcept {
    return x.x1 >= margin && x.x2 >= margin && x.x1 <= L1 - margin && x.x2 <= L2 - margin;
  }
};

/// Dense row-major table over the truncated box (x1 major).
template <typename T>
class BoxTable {
 public:
  BoxTable() = default;
  BoxTable(const TruncationSpec& box, T fill = T{})
      : L1_(box.L1), L2_(box.L2), data_(box.num_states(), fill) {}

  T& operator()(State x) { return data_[flat(x)]; }
  const T& operator()(State x) const { return data_[flat(x)]; }
  T& operator()(int x1, int x2) { return data_[flat({x1, x2})]; }
  const T& operator()(int x1, int x2) const { return data_[flat({x1, x2})]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t size() const noexcept { return data_.size(); }
  int L1() const noexcept { return L1_; }
  int L2() const noexcept { return L2_; }
  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const BoxTable&, const BoxTable&) = default;

 private:
  std::size_t flat(State x) const noexcept {
    return static_cast<std::size_t>(x.x1) * static_cast<std::size_t>(L2_ + 1) +
           static_cast<std::size_t>(x.x2);
  }

  int L1_ = 0;
  int L2_ = 0;
  std::vector<T> data_;
};

}  // namespace tandem
