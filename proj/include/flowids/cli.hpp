#pragma once

namespace flowids {

// Full command-line surface: preprocess, train, evaluate, crossval, predict,
// gradcheck, synth. Returns the process exit code: 0 success, 1 usage or
// config error, 2 data error, 3 numeric divergence.
int run_cli(int argc, const char* const* argv);

}  // namespace flowids
