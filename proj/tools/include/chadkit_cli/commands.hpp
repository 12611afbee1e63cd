#pragma once

#include <exception>
#include <iosfwd>

namespace chadkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;    // configuration or input error
inline constexpr int kExitMismatch = 3;  // model / schema mismatch
inline constexpr int kExitNumeric = 4;   // numeric failure during training

int exit_code_for(const std::exception& e);

// Parses argv and runs one subcommand: train, score, eval, bench-concept,
// viz-latent, negsample-dump or gen-synthetic. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chadkit::cli
