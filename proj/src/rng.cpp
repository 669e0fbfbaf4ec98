#include "bisg/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "bisg/mathutil.hpp"

namespace bisg {

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return norm_quantile(uniform()); }

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape) {
    if (shape <= 0.0) throw std::domain_error("gamma: shape <= 0");
    if (shape < 1.0) {
        // Boost to shape+1, then scale back.
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform(), 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double Rng::truncated_normal(double lo, double hi) {
    const double pa = norm_cdf(lo), pb = norm_cdf(hi);
    if (!(pb > pa)) return 0.5 * (lo + hi);
    const double p = pa + uniform() * (pb - pa);
    double x = norm_quantile(p);
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
}

long long Rng::binomial(long long n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (n <= 32) {
        long long k = 0;
        for (long long i = 0; i < n; ++i) k += uniform() < p ? 1 : 0;
        return k;
    }
    // Exact beta splitting on the k-th order statistic of n uniforms.
    const long long k = (n + 1) / 2;
    const double x = gamma(static_cast<double>(k));
    const double y = gamma(static_cast<double>(n + 1 - k));
    const double v = x / (x + y);
    if (p < v) return binomial(k - 1, p / v);
    return k + binomial(n - k, (p - v) / (1.0 - v));
}

std::vector<long long> Rng::multinomial(long long n, const std::vector<double>& probs) {
    std::vector<long long> out(probs.size(), 0);
    double rem = 0.0;
    for (double q : probs) rem += q;
    long long left = n;
    for (std::size_t i = 0; i + 1 < probs.size() && left > 0; ++i) {
        const double q = probs[i] / rem;
        const long long k = binomial(left, q < 1.0 ? q : 1.0);
        out[i] = k;
        left -= k;
        rem -= probs[i];
    }
    if (!probs.empty()) out[probs.size() - 1] += left;
    return out;
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
        // Unbiased bounded draw by rejection.
        const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        const int j = static_cast<int>(r % bound);
        std::swap(p[i], p[j]);
    }
    return p;
}

std::uint64_t Rng::derive(std::uint64_t stream) const {
    std::uint64_t s = seed_ ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    splitmix64(s);
    return splitmix64(s);
}

double hash_u01(std::uint64_t seed, std::string_view unit_id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : unit_id) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = h ^ seed;
    splitmix64(s);
    const std::uint64_t z = splitmix64(s);
    return (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace bisg
