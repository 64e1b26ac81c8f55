#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace puupl {

std::uint64_t splitmix64(std::uint64_t x);

/// Derives independent, named sub-stream seeds from one root seed.
///
/// Every consumer of randomness asks for a seed keyed by a stream name
/// ("init", "dropout", "batches", "sampling", "splits", "data") and an
/// optional list of integer coordinates (iteration, epoch, member, ...).
/// Seeds are pure functions of (root, name, keys), so changing how one
/// stream is consumed never shifts another, and a resumed run draws
/// exactly what an uninterrupted run would have drawn.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }
  std::uint64_t seed(std::string_view stream,
                     std::initializer_list<std::uint64_t> keys = {}) const;
  std::mt19937_64 engine(std::string_view stream,
                         std::initializer_list<std::uint64_t> keys = {}) const {
    return std::mt19937_64(seed(stream, keys));
  }

 private:
  std::uint64_t root_;
};

}  // namespace puupl
