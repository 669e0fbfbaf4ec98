#ifndef BISG_RNG_HPP
#define BISG_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace bisg {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64.  All variate generation routes
// through the uniform stream so chains are reproducible from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform on (0,1), never exactly 0 or 1.
    double uniform();
    double uniform(double lo, double hi);
    // Inverse-CDF standard normal.
    double normal();
    double exponential();                       // rate 1
    double gamma(double shape);                 // scale 1, shape > 0
    double truncated_normal(double lo, double hi);  // sd 1, mean 0, on [lo,hi]
    long long binomial(long long n, double p);  // exact, beta-splitting
    std::vector<long long> multinomial(long long n, const std::vector<double>& probs);
    std::vector<int> permutation(int n);
    // Derived stream for replicate / stage isolation.
    std::uint64_t derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

// Stateless per-unit uniform: invariant to roster order and partitioning.
double hash_u01(std::uint64_t seed, std::string_view unit_id);

}  // namespace bisg

#endif
