#pragma once

#include <cstdint>

#include "gorl/matrix.hpp"

namespace gorl {

// Counter-based random stream: the k-th output is a pure function of
// (seed, stream_id, k), so streams split freely without shared state and
// any draw can be replayed by restoring the counter.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream_id);

    uint64_t next_u64();

    // Uniform on [0, 1).
    double next_uniform();

    // Standard normal via Box-Muller; consumes two 64-bit draws.
    double next_normal();

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n);

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

private:
    uint64_t seed_ = 0;
    uint64_t stream_id_ = 0;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

// n x m matrix of i.i.d. standard normals drawn from the stream.
Matrix gaussian_draw(RngStream& stream, int rows, int cols);

// Deterministic in-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, RngStream& stream) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(stream.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace gorl
