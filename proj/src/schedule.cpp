#include "ddiff/schedule.hpp"

#include <cmath>

namespace ddiff {

const char * to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::loglinear: return "loglinear";
        case ScheduleKind::geometric: return "geometric";
        case ScheduleKind::roulette_loglinear: return "roulette_loglinear";
    }
    return "?";
}

ScheduleKind schedule_kind_from_string(const std::string & s) {
    if (s == "loglinear") return ScheduleKind::loglinear;
    if (s == "geometric") return ScheduleKind::geometric;
    if (s == "roulette_loglinear") return ScheduleKind::roulette_loglinear;
    throw config_error("unknown schedule kind: " + s);
}

void NoiseSchedule::validate() const {
    if (!(eps > 0.0 && eps < 1.0)) {
        throw config_error("schedule eps must be in (0,1)");
    }
    if (kind == ScheduleKind::geometric) {
        if (!(sigma_min > 0.0 && sigma_max > sigma_min)) {
            throw config_error("geometric schedule requires 0 < sigma_min < sigma_max");
        }
    }
    if (kind == ScheduleKind::roulette_loglinear) {
        if (!(p_m > 0.0 && p_m <= 1.0)) {
            throw config_error("roulette_loglinear schedule requires p_m in (0,1]");
        }
    }
}

SigmaValue NoiseSchedule::eval(double t) const {
    if (!(t >= 0.0 && t < 1.0)) {
        throw domain_error("schedule t must be in [0,1), got " + std::to_string(t));
    }
    SigmaValue out;
    switch (kind) {
        case ScheduleKind::loglinear: {
            const double u = 1.0 - (1.0 - eps) * t;
            out.sigma = -std::log(u);
            out.sigma_prime = (1.0 - eps) / u;
            break;
        }
        case ScheduleKind::roulette_loglinear: {
            const double u = 1.0 - (1.0 - eps) * t;
            out.sigma = -std::log(u) / p_m;
            out.sigma_prime = (1.0 - eps) / (u * p_m);
            break;
        }
        case ScheduleKind::geometric: {
            out.sigma = std::pow(sigma_min, 1.0 - t) * std::pow(sigma_max, t);
            out.sigma_prime = out.sigma * std::log(sigma_max / sigma_min);
            break;
        }
    }
    return out;
}

double NoiseSchedule::sigma_at_one() const {
    switch (kind) {
        case ScheduleKind::loglinear: return -std::log(eps);
        case ScheduleKind::roulette_loglinear: return -std::log(eps) / p_m;
        case ScheduleKind::geometric: return sigma_max;
    }
    return 0.0;
}

double NoiseSchedule::sigma_at_zero() const {
    return kind == ScheduleKind::geometric ? sigma_min : 0.0;
}

}  // namespace ddiff
