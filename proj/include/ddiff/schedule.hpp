#pragma once

#include <string>

#include "ddiff/types.hpp"

namespace ddiff {

enum class ScheduleKind {
    loglinear,
    geometric,
    roulette_loglinear,
};

const char * to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string & s);

struct SigmaValue {
    double sigma = 0.0;
    double sigma_prime = 0.0;
};

// Total-noise schedule sigma(t) on [0, 1) together with its derivative.
//   loglinear           -log(1 - (1-eps) t)
//   geometric           sigma_min^(1-t) sigma_max^t
//   roulette_loglinear  -(1/p_m) log(1 - (1-eps) t)
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::loglinear;
    double eps = 0.001;
    double sigma_min = 0.0;  // geometric only, required
    double sigma_max = 0.0;  // geometric only, required
    double p_m = 1.0;        // roulette_loglinear only

    void validate() const;
    SigmaValue eval(double t) const;

    // sigma at the t=1 endpoint, in closed form (finite for every kind).
    double sigma_at_one() const;
    double sigma_at_zero() const;
};

}  // namespace ddiff
