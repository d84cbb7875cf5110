#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace lusline {

/// Integer pixel position, (row, col).
struct PixelPos {
  int row = 0;
  int col = 0;

  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Sub-pixel position, (row, col).
struct Point {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Dense row-major 2-D array.
template <class T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }

  bool contains(int r, int c) const noexcept { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  std::span<T> row(int r) noexcept { return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)}; }
  std::span<const T> row(int r) const noexcept {
    return {data_.data() + index(r, 0), static_cast<std::size_t>(cols_)};
  }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t index(int r, int c) const noexcept {
    assert(contains(r, c));
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid2D<double>;

}  // namespace lusline
