#pragma once

// Seeded random instance pools for the two metatheorem property suites:
// agreement of parallel forcing with its pullback, and stability of
// classically true positive formulas.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fibersem/forcing.hpp"
#include "fibersem/parallel.hpp"

namespace fibersem {

struct PropertyReport {
  std::size_t trials = 0;
  std::size_t passed = 0;
  std::vector<std::string> failures;  // one line per failing instance
  std::size_t forced_instances = 0;   // instances whose forcing side came out Forced

  bool ok() const { return passed == trials; }
};

/// Random bundle, connection, map f, preimage n, tuple e and formula per
/// trial; passes when parallel forcing at f(n) (paths pushed through f)
/// equals parallel forcing at n on the pulled-back data.
PropertyReport pullback_compatibility_suite(std::size_t trials, std::uint64_t seed, const NeighborhoodPolicy& pol,
                                            const PathOptions& paths = {});

/// Random bundle, sections, point and positive equality-free formula per
/// trial; passes when positive_stability_check holds.
PropertyReport positive_stability_suite(std::size_t trials, std::uint64_t seed, const NeighborhoodPolicy& pol);

}  // namespace fibersem
