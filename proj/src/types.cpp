#include "mvjump/types.hpp"

#include <cmath>

#include "mvjump/errors.hpp"

namespace mvjump {

Positions::Positions(std::size_t count, std::size_t dim, std::vector<double> data)
    : count_(count), dim_(dim), data_(std::move(data)) {
  if (data_.size() != count_ * dim_) {
    throw ConfigError("Positions: data length does not match count * dim");
  }
}

std::vector<double> Positions::column(std::size_t j) const {
  std::vector<double> out(count_);
  for (std::size_t i = 0; i < count_; ++i) out[i] = data_[i * dim_ + j];
  return out;
}

double norm(Point v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace mvjump
