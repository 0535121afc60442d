#pragma once

#include <iosfwd>

namespace lcps {

/// Entry point of the `lcps` tool. Verbs: generate, train, evaluate, sweep, predict.
/// Returns 0 on success, 1 for usage errors (bad flags, unknown names, missing
/// inputs) and 2 for runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lcps
