#pragma once

#include <array>
#include <cstdint>

namespace onehedge {

// Philox4x64-10 counter-based generator (Salmon et al., Random123). Each
// (counter, key) pair yields four independent 64-bit words, so every draw in
// a simulation is addressed by position instead of by sequence. The engine
// uses counter = {step, path, block, 0} and key = {seed, 0}:
//   block 0: [0] GBM increment, [1] corridor bridge, [2] bridge lane A,
//            [3] bridge lane B
//   block 1: [0] bridge lane C, [1..3] reserved
// This layout is part of the output contract: results for a given seed do not
// depend on thread count or on which consumers actually sample their lanes.
std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key);

// Uniform in (0, 1), strictly.
double to_unit_interval(std::uint64_t word);

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double u);

// Positional draws for one simulated path.
class PathRng {
  public:
    PathRng(std::uint64_t seed, std::uint64_t path) : key_{seed, 0} , path_(path) {}

    std::array<std::uint64_t, 4> block(std::uint64_t step, std::uint64_t block_index) const {
        return philox4x64({step, path_, block_index, 0}, key_);
    }

  private:
    std::array<std::uint64_t, 2> key_;
    std::uint64_t path_;
};

}  // namespace onehedge
