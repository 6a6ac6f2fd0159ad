#pragma once

#include <cstdint>
#include <vector>

#include "lrscat/geometry.hpp"

namespace lrscat {

// Scrambled Halton sequence. Digit permutations are drawn once from the seed,
// so streams are reproducible and independent per dimension.
class HaltonSampler {
  public:
    HaltonSampler(int dimension, std::uint64_t seed);

    // Next point in [0,1)^d.
    Vec next();

    // Next point mapped to the box [-radius, radius]^d.
    Vec next_box(double radius);

    void reset() { index_ = 0; }

  private:
    int dim_;
    std::uint64_t index_ = 0;
    std::vector<int> bases_;
    std::vector<std::vector<int>> perms_;  // one digit permutation per dimension
};

// Splitmix64; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace lrscat
