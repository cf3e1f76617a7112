#pragma once

#include <string>

#include "bpsim/model_io.hpp"
#include "bpsim/scenarios.hpp"

namespace testutil {

/// Single activity, single resource, exponential service. The M/M/1 oracle
/// model when mean = 1/mu.
inline bpsim::ProcessModel mm1_model(double lambda, double mean) {
    std::string text = R"({
      "name": "mm1",
      "activities": ["A"],
      "resources": ["r1"],
      "eligibility": {"A": ["r1"]},
      "service_means": [{"resource": "r1", "activity": "A", "mean": )" +
                       std::to_string(mean) + R"(}],
      "routing": [
        {"type": "start", "id": "start", "to": "A"},
        {"type": "activity", "id": "A", "to": "end"},
        {"type": "end", "id": "end"}
      ],
      "arrivals": {"constant": )" + std::to_string(lambda) + R"(}
    })";
    return bpsim::load_model(text);
}

/// Two sequential activities, two resources, fully eligible.
inline bpsim::ProcessModel two_stage_model(double lambda, double mean_a, double mean_b) {
    std::string text = R"({
      "name": "two_stage",
      "activities": ["A", "B"],
      "resources": ["r1", "r2"],
      "eligibility": {"A": ["r1", "r2"], "B": ["r1", "r2"]},
      "service_means": [
        {"resource": "r1", "activity": "A", "mean": )" + std::to_string(mean_a) + R"(},
        {"resource": "r1", "activity": "B", "mean": )" + std::to_string(mean_b) + R"(},
        {"resource": "r2", "activity": "A", "mean": )" + std::to_string(mean_a) + R"(},
        {"resource": "r2", "activity": "B", "mean": )" + std::to_string(mean_b) + R"(}
      ],
      "routing": [
        {"type": "start", "id": "start", "to": "A"},
        {"type": "activity", "id": "A", "to": "B"},
        {"type": "activity", "id": "B", "to": "end"},
        {"type": "end", "id": "end"}
      ],
      "arrivals": {"constant": )" + std::to_string(lambda) + R"(}
    })";
    return bpsim::load_model(text);
}

/// A policy that always postpones (never assigns).
struct AlwaysPostpone final : bpsim::Policy {
    bpsim::Decision decide(const bpsim::DecisionContext&, bpsim::Rng&) override {
        return bpsim::Decision::postpone();
    }
    std::string name() const override { return "always_postpone"; }
};

inline std::string scenarios_dir() { return std::string(BPSIM_SOURCE_DIR) + "/scenarios"; }

} // namespace testutil
