#include "bimslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "bimslam/error.hpp"

namespace bimslam {

AteReport ate(const std::vector<Pose>& estimate, const std::vector<Pose>& reference) {
    if (estimate.size() != reference.size()) {
        throw LengthMismatch("trajectories have " + std::to_string(estimate.size()) + " and " +
                             std::to_string(reference.size()) + " poses");
    }
    AteReport r;
    r.n = estimate.size();
    if (r.n == 0) return r;
    double st = 0.0, sr = 0.0;
    for (std::size_t k = 0; k < r.n; ++k) {
        const double et = 100.0 * translation_error_m(estimate[k], reference[k]);
        const double er = rotation_error_deg(estimate[k], reference[k]);
        st += et * et;
        sr += er * er;
        r.max_trans_cm = std::max(r.max_trans_cm, et);
        r.max_rot_deg = std::max(r.max_rot_deg, er);
    }
    r.rmse_trans_cm = std::sqrt(st / static_cast<double>(r.n));
    r.rmse_rot_deg = std::sqrt(sr / static_cast<double>(r.n));
    return r;
}

std::string format_report(const AteReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%-18s %10s %10s\n"
                  "%-18s %10.3f %10.3f\n"
                  "%-18s %10.3f %10.3f\n"
                  "poses %zu\n"
                  "rmse_trans_cm=%.3f\n"
                  "max_trans_cm=%.3f\n"
                  "rmse_rot_deg=%.3f\n"
                  "max_rot_deg=%.3f\n"
                  "n=%zu\n",
                  "", "RMSE", "Max", "Trans. Error (cm)", r.rmse_trans_cm, r.max_trans_cm, "Rot. Error (deg)",
                  r.rmse_rot_deg, r.max_rot_deg, r.n, r.rmse_trans_cm, r.max_trans_cm, r.rmse_rot_deg, r.max_rot_deg,
                  r.n);
    return buf;
}

AteReport parse_report(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto number = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("report", 0, "missing key " + key);
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw FormatError("report", 0, "bad value for " + key);
        }
    };
    AteReport r;
    r.rmse_trans_cm = number("rmse_trans_cm");
    r.max_trans_cm = number("max_trans_cm");
    r.rmse_rot_deg = number("rmse_rot_deg");
    r.max_rot_deg = number("max_rot_deg");
    r.n = static_cast<std::size_t>(number("n"));
    return r;
}

}  // namespace bimslam
