#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvjump {

using Point = std::span<const double>;
using MutPoint = std::span<double>;
using Vec = std::vector<double>;

/// N points in R^d stored row-major.
class Positions {
 public:
  Positions() = default;
  Positions(std::size_t count, std::size_t dim, double fill = 0.0)
      : count_(count), dim_(dim), data_(count * dim, fill) {}
  Positions(std::size_t count, std::size_t dim, std::vector<double> data);

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return count_ == 0; }

  Point row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
  MutPoint row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  /// Column j as a vector (copy).
  std::vector<double> column(std::size_t j) const;

  bool operator==(const Positions&) const = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

double norm(Point v) noexcept;

}  // namespace mvjump
