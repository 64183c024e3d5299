#pragma once

#include <cstdint>
#include <ostream>

namespace lic {

// Quick derivative and oracle checks, one pass/fail line each.
// Returns the number of failed checks.
int run_selftest(std::uint64_t seed, std::ostream &os);

}  // namespace lic
