// Entry point of the hsiu command-line tool, exposed as a library function
// so tests can drive it in-process.
//
// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or input
// error.
#pragma once

#include "hsiu/datagen.hpp"
#include "hsiu/sampler.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace hsiu {

int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);  // args[0] is the program name

nlohmann::json to_json(const ScenarioSpec& spec);
nlohmann::json to_json(const SamplerConfig& config);

/// Thread count from HSIU_THREADS; 0 (sequential reference kernels) when
/// unset. Throws InvalidInput for a malformed or negative value.
int threads_from_env();

}  // namespace hsiu
