#pragma once

namespace streamem {

// Full command-line entry point. Returns the process exit code:
//   0 success, 2 bad usage or config, 3 bad data file, 4 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace streamem
