#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "brca/data.hpp"
#include "brca/tensor.hpp"

namespace brca::test {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = false) {
  Tensor<T> t(shape, requires_grad);
  std::uniform_real_distribution<double> u(lo, hi);
  for (T& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

// values bounded away from 0 so relu/max kinks stay out of the finite-difference stencil
template <typename T>
Tensor<T> away_from_zero(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
  Tensor<T> t(shape, requires_grad);
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (T& v : t.values()) v = static_cast<T>(sign(rng) ? mag(rng) : -mag(rng));
  return t;
}

inline Bytes random_raw(std::size_t len, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> b(1, 255);
  Bytes raw(len);
  for (auto& v : raw) v = static_cast<std::uint8_t>(b(rng));
  return raw;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("brca-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace brca::test
