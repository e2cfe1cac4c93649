#pragma once

#include "kbco/types.hpp"

#include <cstdint>

namespace kbco {

// Module tags used when splitting a master seed into independent streams.
enum class StreamTag : std::uint64_t {
    learner = 1,
    environment = 2,
    sampler = 3,
    corruption = 4,
    verify = 5,
    baseline = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based split: the same (master, run, tag) always yields the same stream,
// independent of how many runs are scheduled or in which order.
Rng make_stream(std::uint64_t master_seed, std::uint64_t run_index, StreamTag tag);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);
Vector gaussian_vector(int n, Rng& rng);
Vector unit_sphere(int n, Rng& rng);

}  // namespace kbco
