// runner.hpp
// Executes a parsed RunSpec and writes its outputs:
//   resolved_config        every key the mode read, defaults included
//   <mode>.csv, ...        data (first line is a '# units:' comment)
//   summary.txt            one-line results
//   FAILED                 present iff the run failed or missed a threshold

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "qsteer/config.hpp"

namespace qsteer {

inline constexpr int kExitOk = 0;
inline constexpr int kExitThreshold = 1;   // ran, but a threshold was not met
inline constexpr int kExitConfig = 2;      // parse or validation error
inline constexpr int kExitNumerical = 3;   // quadrature failure, step instability

struct RunOutcome {
    int exit_code = kExitOk;
    std::string message;  // summary, or the reason for failure
};

// Output directory used when --out is absent: <root>/<mode>, where root is
// `env_root` if set and non-empty, else "qsteer_out".
std::filesystem::path default_output_dir(Mode mode, std::optional<std::string> env_root);

RunOutcome run(const RunSpec& spec);

}  // namespace qsteer
