#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qptv2 {

// Exit codes of the command line entry point.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitIo = 4;

// Subcommands: curate, synth, pretrain, finetune, eval, ablate, spectrum.
// `args` excludes the program name. Results and the effective configuration
// go to `out`; errors go to `err` as a JSON object.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace qptv2
