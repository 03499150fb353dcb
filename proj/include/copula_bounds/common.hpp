// Shared basic types and error taxonomy for the copula-bounds library.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace copula_bounds {

// A point in [0,1]^d (or R_+^d where noted).  Plain vector keeps call sites light;
// public entry points validate through the helpers below.
using Point = std::vector<double>;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_input : error {
    using error::error;
};
struct dimension_too_large : error {
    using error::error;
};
struct infeasible_target : error {
    using error::error;
};
struct contract_violation : error {
    using error::error;
};
struct inconsistent_quotes : error {
    using error::error;
};
struct unsupported_payoff_order : error {
    using error::error;
};
struct ill_conditioned : error {
    using error::error;
};
struct integrability_failure : error {
    using error::error;
};

// 2^d expansions (survival values, box volumes) refuse to run above this unless
// the caller raises the cap explicitly.
inline constexpr int kDefaultExpansionCap = 12;

inline void check_dimension(int d) {
    if (d < 2) throw invalid_input("dimension must be at least 2, got " + std::to_string(d));
}

inline void check_unit_point(std::span<const double> u, int d, const char* what = "point") {
    if (static_cast<int>(u.size()) != d)
        throw invalid_input(std::string(what) + ": expected " + std::to_string(d) +
                            " coordinates, got " + std::to_string(u.size()));
    for (double x : u)
        if (!(x >= 0.0 && x <= 1.0))
            throw invalid_input(std::string(what) + ": coordinate " + std::to_string(x) +
                                " outside [0,1]");
}

// Axis-aligned box [lower, upper].
struct Box {
    Point lower;
    Point upper;

    void validate(int d) const {
        check_unit_point(lower, d, "box lower corner");
        check_unit_point(upper, d, "box upper corner");
        for (int i = 0; i < d; ++i)
            if (lower[i] > upper[i])
                throw invalid_input("box has lower[" + std::to_string(i) + "] > upper[" +
                                    std::to_string(i) + "]");
    }
};

}  // namespace copula_bounds
