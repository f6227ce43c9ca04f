#pragma once

#include <string>
#include <vector>

namespace flowids {

struct GradCheckReport {
    std::string layer;
    int configs = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

// Checks analytic gradients of every layer kind, plus the full model on a
// tiny architecture, against central finite differences over `seeds` random
// seeded configurations each. The error measure per configuration is
// max|g_analytic - g_fd| / max(1, max|g_fd|), with step 1e-6 * max(1, |theta|).
std::vector<GradCheckReport> run_gradcheck(int seeds = 50, double tolerance = 1e-4);

bool all_passed(const std::vector<GradCheckReport>& reports);

}  // namespace flowids
