#pragma once

// Experiment runner behind the `pqv` executable.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pqv::cli {

/// Invalid configuration documents.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Verdict {
    std::string name;
    std::string check;
    bool passed = true;
    double value = 0.0;
    double threshold = 0.0;
};

struct RunOptions {
    std::string out_dir;
    std::size_t workers = 1;
    bool has_seed = false;
    std::uint64_t seed = 0;
};

struct RunReport {
    std::string command;
    nlohmann::ordered_json config;
    std::vector<Verdict> verdicts;
    std::vector<std::string> tables;
    std::vector<std::pair<std::string, double>> timings;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();

    bool passed() const {
        for (const auto& v : verdicts)
            if (!v.passed) return false;
        return true;
    }
    nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& commands();

/// Checks the document against the schema of `command`; throws ConfigError.
void validate_config(const std::string& command, const nlohmann::json& cfg);

/// Runs one pipeline and writes its tables and report.json into opts.out_dir.
RunReport run(const std::string& command, const nlohmann::json& cfg, const RunOptions& opts);

/// Full command line entry point; returns the process exit code
/// (0 all verdicts pass, 2 some verdict failed, 1 usage, parameter or I/O error).
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pqv::cli
