#include "kbco/rng.hpp"

#include <cmath>

namespace kbco {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t run_index, StreamTag tag) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ splitmix64(run_index + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return Rng(h);
}

double uniform01(Rng& rng) {
    // 53 random mantissa bits, never returns 1.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    // Marsaglia polar method; implemented here so streams are identical across
    // standard library implementations.
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

Vector gaussian_vector(int n, Rng& rng) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = standard_normal(rng);
    return z;
}

Vector unit_sphere(int n, Rng& rng) {
    for (;;) {
        Vector z = gaussian_vector(n, rng);
        const double norm = z.norm();
        if (norm > 1e-300) return z / norm;
    }
}

}  // namespace kbco
