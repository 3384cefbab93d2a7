#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "config.hpp"

namespace sagin::cli {

/// A scenario whose reference link cannot carry any payload.
class Infeasible : public Error {
public:
    using Error::Error;
};

enum ExitCode { exit_ok = 0, exit_input = 2, exit_infeasible = 3 };

std::string cmd_profile(const Config& cfg);
std::string cmd_cost(const Config& cfg);
std::string cmd_oracle(const Config& cfg);

struct OptimizeReport {
    std::string trace_csv;
    std::string summary;
};
OptimizeReport cmd_optimize(const Config& cfg);

/// 16 rows (uav_images x ground_images = 1..4 x 1..4), metrics averaged over seeds.
std::string cmd_retrieval_sim(const Config& cfg, std::size_t jobs = 1);

std::string cmd_privacy(const Config& cfg, const std::filesystem::path& corpus);

/// Full command line entry point. Reports go to `out` unless --out is given.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace sagin::cli
