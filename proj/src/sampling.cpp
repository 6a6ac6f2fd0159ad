#include "lrscat/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace lrscat {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {
constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                           31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

// Deterministic in-place shuffle driven by splitmix64 draws.
void shuffle_digits(std::vector<int>& v, std::uint64_t seed) {
    for (std::size_t i = v.size() - 1; i > 0; --i) {
        seed = mix_seed(seed, i);
        std::swap(v[i], v[seed % (i + 1)]);
    }
}
}  // namespace

HaltonSampler::HaltonSampler(int dimension, std::uint64_t seed) : dim_(dimension) {
    bases_.resize(dim_);
    perms_.resize(dim_);
    for (int k = 0; k < dim_; ++k) {
        bases_[k] = kPrimes[k % 20];
        std::vector<int> p(bases_[k]);
        std::iota(p.begin(), p.end(), 0);
        // keep 0 fixed so the sequence stays dense near the origin of each digit
        std::vector<int> tail(p.begin() + 1, p.end());
        shuffle_digits(tail, mix_seed(seed, 1000 + k));
        std::copy(tail.begin(), tail.end(), p.begin() + 1);
        perms_[k] = std::move(p);
    }
}

Vec HaltonSampler::next() {
    ++index_;  // skip index 0 (it maps to the origin in every dimension)
    Vec out(dim_);
    for (int k = 0; k < dim_; ++k) {
        const int b = bases_[k];
        const auto& perm = perms_[k];
        double f = 1.0, r = 0.0;
        std::uint64_t i = index_;
        while (i > 0) {
            f /= b;
            r += f * perm[i % b];
            i /= b;
        }
        out[k] = r;
    }
    return out;
}

Vec HaltonSampler::next_box(double radius) {
    Vec u = next();
    for (int k = 0; k < dim_; ++k) u[k] = (2.0 * u[k] - 1.0) * radius;
    return u;
}

}  // namespace lrscat
