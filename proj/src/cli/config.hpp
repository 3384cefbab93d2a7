#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sagin/privmetrics.hpp"
#include "sagin/retrieval.hpp"
#include "sagin/rl/agents.hpp"
#include "sagin/rl/env.hpp"
#include "sagin/trico.hpp"

namespace sagin::cli {

/// Raised for any problem in the config text; message carries "line N:" when known.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct OptimizerConfig {
    std::string agent = "actor_critic";
    std::size_t steps = 3000;
    std::uint64_t seed = 0;
    rl::EnvConfig env;
    rl::Hyper hyper;
};

struct RetrievalConfig {
    retrieval::SynthConfig synth{200, 64, {1.0, 3.5, 3.5}, 1, 4, 4};
    std::size_t seeds = 10;
    std::uint64_t seed = 0;
    retrieval::Fusion fusion = retrieval::Fusion::mean;
};

struct PrivacyConfig {
    std::optional<std::filesystem::path> corpus;
    privacy::PrivacyOptions options;
};

struct Config {
    trico::Scenario scenario;
    OptimizerConfig optimizer;
    RetrievalConfig retrieval;
    PrivacyConfig privacy;
};

/// Defaults: the two-device scenario on the built ResNet-50 profile.
Config default_config();

/// Parses YAML text. Relative paths resolve against `base_dir`.
Config parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");

Config load_config(const std::filesystem::path& path);

} // namespace sagin::cli
