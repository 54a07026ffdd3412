#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bimslam/se3.hpp"

namespace bimslam {

struct AteReport {
    double rmse_trans_cm = 0.0;
    double max_trans_cm = 0.0;
    double rmse_rot_deg = 0.0;
    double max_rot_deg = 0.0;
    std::size_t n = 0;
};

/// Index-aligned absolute trajectory error, no alignment step. Throws LengthMismatch.
AteReport ate(const std::vector<Pose>& estimate, const std::vector<Pose>& reference);

/// Aligned table followed by `key=value` lines, 3 decimals.
std::string format_report(const AteReport& report);
/// Reads back the key=value lines of format_report. Throws FormatError.
AteReport parse_report(const std::string& text);

}  // namespace bimslam
