#pragma once

#include <cmath>
#include <string>

#include "heraldsim/errors.hpp"

namespace heraldsim {

/// Threshold (click / no-click) detector.
struct DetectorModel {
    double efficiency = 1.0;
    double dark = 0.0;  // dark-click probability per pulse

    void validate(const std::string& key = "detector") const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw ConfigError("efficiency must lie in [0,1]", key + ".efficiency");
        if (!(dark >= 0.0 && dark < 1.0)) throw ConfigError("dark probability must lie in [0,1)", key + ".dark");
    }

    static DetectorModel blind() { return {0.0, 0.0}; }
};

}  // namespace heraldsim
