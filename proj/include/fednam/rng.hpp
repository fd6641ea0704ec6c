#pragma once

#include <cstdint>
#include <vector>

namespace fednam {

// Deterministic PRNG (xoshiro256** seeded via splitmix64). We own the
// whole stream, including the uniform/normal mappings, so equal seeds
// give byte-identical sequences on every platform and compiler.
//
// Federated runs derive one generator per client with split(client_id),
// which reseeds with seed XOR client id.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform();

    // Uniform in [0, bound). bound must be > 0.
    std::uint64_t uniform_int(std::uint64_t bound);

    // Standard normal via Box-Muller; caches the spare draw.
    double normal();

    // Derived stream for a sub-task (client id, pass index, ...).
    Rng split(std::uint64_t stream_id) const { return Rng(seed_ ^ stream_id); }

    // Fisher-Yates using uniform_int; deterministic for a given state.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fednam
