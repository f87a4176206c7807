#pragma once

namespace mls {

// Full command-line driver (train / infer / ablate / analyze). Returns the
// process exit code; kept out of main() so tests can invoke it in-process.
int run_cli(int argc, const char* const* argv);

}  // namespace mls
