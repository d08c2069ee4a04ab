#ifndef COXLIN_TOOLS_CLI_HPP_
#define COXLIN_TOOLS_CLI_HPP_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "coxlin/breslow.hpp"

namespace coxlin::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kIoError = 1,      // I/O, usage, parse and data validation errors
  kModelError = 2,   // fit or model failure
  kSelfCheck = 3,    // internal consistency check failed
  kInvalidExperiment = 4,
};

inline constexpr const char* kOutputDirEnv = "COXLIN_OUTPUT_DIR";
inline constexpr double kBreslowAgreement = 1e-10;

// Test seams. tamper_plugin, when set, is applied to the plug-in Breslow
// estimate before `breslow` compares it with the traditional form.
struct Hooks {
  std::function<void(BaselineCumHazEstimate&)> tamper_plugin;
};

// Runs one command line (args excludes the program name) and returns the
// exit code. Nothing is written to the process streams except via out/err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks = {});

}  // namespace coxlin::cli

#endif  // COXLIN_TOOLS_CLI_HPP_
