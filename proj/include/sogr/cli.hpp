#pragma once

namespace sogr {

// Full command-line entry point: train / translate / evaluate / synth.
// Returns the process exit code: 0 success, 2 configuration problems,
// 3 data problems, 4 numerical aborts, 1 anything else.
int run_cli(int argc, char** argv);

}  // namespace sogr
