#pragma once

#include <filesystem>
#include <string>

#include "gridfreq/linear_model.hpp"
#include "gridfreq/model.hpp"
#include "gridfreq/simulator.hpp"

namespace gridfreq {

inline constexpr const char* kModelFormat = "gridfreq-v1";

/// JSON documents tagged "format": "gridfreq-v1". Errors raise ModelError
/// naming the offending field.
NetworkModel parse_model(const std::string& text);
NetworkModel load_model(const std::filesystem::path& path);
std::string dump_model(const NetworkModel& model);

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const Scenario& scenario);

/// Linear loop file: either explicit blocks
/// {"gp": {"num": [...], "den": [...]}, ...} (ascending coefficients) or an
/// "aggregate" section; plus g_prime, k_pq, disturbance_mw, horizon, dt and an
/// optional q_sh_profile {"t": [...], "value": [...]}.
struct LinearLoopFile {
    LinearLoopConfig loop;
    double horizon = 30.0;
    double dt = 0.01;
};
LinearLoopFile parse_loop_config(const std::string& text);
LinearLoopFile load_loop_config(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gridfreq
