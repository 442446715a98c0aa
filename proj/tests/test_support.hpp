#pragma once

#include <string>

#include "gridfreq/model.hpp"
#include "gridfreq/powerflow.hpp"
#include "gridfreq/simulator.hpp"

namespace gridfreq::test {

inline const std::string kDataDir = GRIDFREQ_DATA_DIR;

// Loaded and solved once per test binary.
const NetworkModel& bundled();
const PowerFlowSolution& bundled_pf();
Scenario dimensioning();
const SimulationTrace& bundled_case_a();
// Dimensioning trip with EPC on one link; cached per (link, gain).
const SimulationTrace& bundled_case_b(const std::string& link, double g_prime);

}  // namespace gridfreq::test
