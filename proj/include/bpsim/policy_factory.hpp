#pragma once

#include <string>
#include <string_view>

#include "bpsim/drl.hpp"
#include "bpsim/policies.hpp"
#include "bpsim/svfa.hpp"

namespace bpsim {

/// Builds a policy from its CLI spec string:
///   spt | fifo | random | matching | svfa:<weights-file> | drl:<checkpoint>
inline PolicyPtr make_policy(std::string_view spec, const ProcessModel& model) {
    if (spec == "spt") return spt_policy();
    if (spec == "fifo") return fifo_policy();
    if (spec == "random") return random_policy();
    if (spec == "matching") return matching_policy();
    if (spec.rfind("svfa:", 0) == 0)
        return svfa_policy(load_weights(std::string(spec.substr(5))));
    if (spec.rfind("drl:", 0) == 0)
        return drl_policy_from_checkpoint(std::string(spec.substr(4)), model);
    throw Error("unknown policy spec: " + std::string(spec) +
                " (expected spt|fifo|random|matching|svfa:<weights>|drl:<checkpoint>)");
}

} // namespace bpsim
