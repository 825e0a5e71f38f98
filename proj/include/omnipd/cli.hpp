#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace omnipd::cli {

/// Seed used when --seed is not given.
inline constexpr std::uint64_t kDefaultSeed = 20180703;

/// Runs one command line (without the program name).
///
/// Returns 0 on success, 1 when a command fails (missing file, bad input),
/// and 2 on usage errors such as unknown flags.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace omnipd::cli
