#ifndef SEPKIT_CLI_HPP
#define SEPKIT_CLI_HPP

#include <iosfwd>

namespace sepkit {

inline constexpr const char* kVersion = "0.3.0";

/// Entry point of the `sepkit` binary. Returns 0 on success, 2 on usage or
/// config errors, 1 on any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sepkit

#endif  // SEPKIT_CLI_HPP
