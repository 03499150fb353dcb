// Quasi-copula primitives: Frechet-Hoeffding envelope, survival values, box
// volumes, grid-based property checks and orthant-order comparison.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "copula_bounds/common.hpp"

namespace copula_bounds {

enum class FunctionKind { copula, quasi_copula, quasi_survival, unverified };

inline const char* to_string(FunctionKind k) {
    switch (k) {
        case FunctionKind::copula: return "copula";
        case FunctionKind::quasi_copula: return "quasi-copula";
        case FunctionKind::quasi_survival: return "quasi-survival";
        default: return "unverified";
    }
}

// A d-variate dependence function on [0,1]^d.  The kind tag records what the
// evaluator is claimed to be; checks never trust it blindly.
class DependenceFunction {
  public:
    using Evaluator = std::function<double(std::span<const double>)>;

    DependenceFunction(int dim, FunctionKind kind, Evaluator eval)
        : dim_(dim), kind_(kind), eval_(std::move(eval)) {
        check_dimension(dim_);
        if (!eval_) throw invalid_input("dependence function requires an evaluator");
    }

    int dimension() const { return dim_; }
    FunctionKind kind() const { return kind_; }

    double operator()(std::span<const double> u) const { return eval_(u); }
    double operator()(const Point& u) const { return eval_(u); }

  private:
    int dim_;
    FunctionKind kind_;
    Evaluator eval_;
};

// ---- Frechet-Hoeffding envelope -------------------------------------------

inline double frechet_lower(std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += x;
    return std::max(0.0, s - static_cast<double>(u.size()) + 1.0);
}

inline double frechet_upper(std::span<const double> u) {
    double m = 1.0;
    for (double x : u) m = std::min(m, x);
    return m;
}

inline DependenceFunction frechet_lower_function(int d) {
    check_dimension(d);
    // W_d is a copula only in dimension 2.
    return DependenceFunction(d, d == 2 ? FunctionKind::copula : FunctionKind::quasi_copula,
                              [](std::span<const double> u) { return frechet_lower(u); });
}

inline DependenceFunction frechet_upper_function(int d) {
    check_dimension(d);
    return DependenceFunction(d, FunctionKind::copula,
                              [](std::span<const double> u) { return frechet_upper(u); });
}

inline DependenceFunction independence_function(int d) {
    check_dimension(d);
    return DependenceFunction(d, FunctionKind::copula, [](std::span<const double> u) {
        double p = 1.0;
        for (double x : u) p *= x;
        return p;
    });
}

// Envelope of survival functions of d-copulas evaluated at u: W_d(1-u) and M_d(1-u).
inline DependenceFunction survival_frechet_lower_function(int d) {
    check_dimension(d);
    return DependenceFunction(d, FunctionKind::quasi_survival, [d](std::span<const double> u) {
        double s = 0.0;
        for (double x : u) s += 1.0 - x;
        return std::max(0.0, s - static_cast<double>(d) + 1.0);
    });
}

inline DependenceFunction survival_frechet_upper_function(int d) {
    check_dimension(d);
    return DependenceFunction(d, FunctionKind::quasi_survival, [](std::span<const double> u) {
        double m = 0.0;
        for (double x : u) m = std::max(m, x);
        return 1.0 - m;
    });
}

// ---- volumes and survival values ------------------------------------------

namespace detail {

inline void check_expansion_dim(int d, int cap) {
    if (d > cap)
        throw dimension_too_large("2^d expansion refused for d = " + std::to_string(d) +
                                  " (cap " + std::to_string(cap) + ")");
}

}  // namespace detail

// f-volume of H: alternating-sign sum of f over the 2^d corners of the box.
// Applies to the raw evaluator, whatever its kind.
inline double box_volume(const DependenceFunction& f, const Box& box,
                         int max_expansion_dim = kDefaultExpansionCap) {
    const int d = f.dimension();
    box.validate(d);
    detail::check_expansion_dim(d, max_expansion_dim);
    Point corner(d);
    double vol = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        int lowers = 0;
        for (int i = 0; i < d; ++i) {
            if (mask & (std::uint64_t{1} << i)) {
                corner[i] = box.lower[i];
                ++lowers;
            } else {
                corner[i] = box.upper[i];
            }
        }
        const double v = f(corner);
        vol += (lowers % 2 == 0) ? v : -v;
    }
    return vol;
}

// Survival value Qhat(u) = V_Q((u,1]).  For quasi-survival functions the
// evaluator already is the survival function; otherwise expand over 2^d corners.
inline double survival_value(const DependenceFunction& q, std::span<const double> u,
                             int max_expansion_dim = kDefaultExpansionCap) {
    const int d = q.dimension();
    check_unit_point(u, d);
    if (q.kind() == FunctionKind::quasi_survival) return q(u);
    Box b{Point(u.begin(), u.end()), Point(static_cast<std::size_t>(d), 1.0)};
    return box_volume(q, b, max_expansion_dim);
}

// Copula-scale value.  For quasi-survival functions S with associated
// quasi-copula R(w) = S(1-w), the copula-scale counterpart is the survival of R
// reflected back, which expands to sum_T (-1)^|T| S(u on T, 0 elsewhere).
inline double copula_value(const DependenceFunction& q, std::span<const double> u,
                           int max_expansion_dim = kDefaultExpansionCap) {
    const int d = q.dimension();
    check_unit_point(u, d);
    if (q.kind() != FunctionKind::quasi_survival) return q(u);
    detail::check_expansion_dim(d, max_expansion_dim);
    Point arg(d);
    double val = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        int picked = 0;
        for (int i = 0; i < d; ++i) {
            if (mask & (std::uint64_t{1} << i)) {
                arg[i] = u[i];
                ++picked;
            } else {
                arg[i] = 0.0;
            }
        }
        const double v = q(arg);
        val += (picked % 2 == 0) ? v : -v;
    }
    return val;
}

// Survival value of the I-margin of q at v (|v| = |I|).  Copula-scale margins
// pin the remaining coordinates at 1; survival-scale margins pin them at 0.
inline double margin_survival_value(const DependenceFunction& q, std::span<const int> index_set,
                                    std::span<const double> v,
                                    int max_expansion_dim = kDefaultExpansionCap) {
    const int d = q.dimension();
    const int m = static_cast<int>(index_set.size());
    if (m < 1 || m > d || static_cast<int>(v.size()) != m)
        throw invalid_input("margin_survival_value: bad index set or point size");
    for (int i : index_set)
        if (i < 0 || i >= d) throw invalid_input("margin_survival_value: index out of range");
    if (q.kind() == FunctionKind::quasi_survival) {
        Point arg(d, 0.0);
        for (int k = 0; k < m; ++k) arg[index_set[k]] = v[k];
        return q(arg);
    }
    detail::check_expansion_dim(m, max_expansion_dim);
    Point arg(d, 1.0);
    double val = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
        int picked = 0;
        for (int k = 0; k < m; ++k) {
            if (mask & (std::uint64_t{1} << k)) {
                arg[index_set[k]] = v[k];
                ++picked;
            } else {
                arg[index_set[k]] = 1.0;
            }
        }
        const double qv = q(arg);
        val += (picked % 2 == 0) ? qv : -qv;
    }
    return val;
}

// Pointwise reflection u -> Q(1-u).  The result carries no verified properties.
inline DependenceFunction reflect(const DependenceFunction& q) {
    const int d = q.dimension();
    return DependenceFunction(d, FunctionKind::unverified, [q, d](std::span<const double> u) {
        Point w(d);
        for (int i = 0; i < d; ++i) w[i] = 1.0 - u[i];
        return q(w);
    });
}

// ---- grid sampling ----------------------------------------------------------

// Values of a function on the lattice {0, 1/n, ..., 1}^d, stored row-major in
// lexicographic index order (first coordinate most significant).
class GridFunction {
  public:
    GridFunction(int dim, int resolution, std::vector<double> values)
        : dim_(dim), res_(resolution), values_(std::move(values)) {
        check_dimension(dim_);
        if (res_ < 1) throw invalid_input("grid resolution must be >= 1");
        std::size_t expect = 1;
        for (int i = 0; i < dim_; ++i) expect *= static_cast<std::size_t>(res_ + 1);
        if (values_.size() != expect)
            throw invalid_input("grid values: expected " + std::to_string(expect) + ", got " +
                                std::to_string(values_.size()));
    }

    static GridFunction sample(const DependenceFunction& q, int resolution) {
        check_dimension(q.dimension());
        if (resolution < 1) throw invalid_input("grid resolution must be >= 1");
        const int d = q.dimension();
        std::size_t total = 1;
        for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(resolution + 1);
        if (total > (std::size_t{1} << 26))
            throw dimension_too_large("grid too large: " + std::to_string(total) + " nodes");
        std::vector<double> vals(total);
        std::vector<int> idx(d, 0);
        Point u(d, 0.0);
        for (std::size_t flat = 0; flat < total; ++flat) {
            for (int i = 0; i < d; ++i) u[i] = static_cast<double>(idx[i]) / resolution;
            vals[flat] = q(u);
            for (int i = d - 1; i >= 0; --i) {
                if (++idx[i] <= resolution) break;
                idx[i] = 0;
            }
        }
        return GridFunction(d, resolution, std::move(vals));
    }

    int dimension() const { return dim_; }
    int resolution() const { return res_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t flat_index(std::span<const int> idx) const {
        std::size_t flat = 0;
        for (int i = 0; i < dim_; ++i) {
            if (idx[i] < 0 || idx[i] > res_) throw invalid_input("grid index out of range");
            flat = flat * static_cast<std::size_t>(res_ + 1) + static_cast<std::size_t>(idx[i]);
        }
        return flat;
    }

    double at(std::span<const int> idx) const { return values_[flat_index(idx)]; }

    Point node(std::span<const int> idx) const {
        Point u(dim_);
        for (int i = 0; i < dim_; ++i) u[i] = static_cast<double>(idx[i]) / res_;
        return u;
    }

    void write_csv(std::ostream& os) const {
        os << "dim,n\n" << dim_ << ',' << res_ << '\n';
        os.precision(17);
        for (double v : values_) os << v << '\n';
    }

    static GridFunction read_csv(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line.rfind("dim,n", 0) != 0)
            throw invalid_input("grid csv: missing 'dim,n' header");
        if (!std::getline(is, line)) throw invalid_input("grid csv: missing dimensions row");
        int d = 0, n = 0;
        char comma = 0;
        std::istringstream hdr(line);
        if (!(hdr >> d >> comma >> n) || comma != ',')
            throw invalid_input("grid csv: malformed dimensions row '" + line + "'");
        std::vector<double> vals;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            vals.push_back(std::stod(line));
        }
        return GridFunction(d, n, std::move(vals));
    }

  private:
    int dim_;
    int res_;
    std::vector<double> values_;
};

// ---- property checks --------------------------------------------------------

struct PropertyViolation {
    std::string check;
    Point location;
    double magnitude = 0.0;
};

struct PropertyReport {
    std::vector<PropertyViolation> violations;

    bool pass() const { return violations.empty(); }

    double max_magnitude() const {
        double m = 0.0;
        for (const auto& v : violations) m = std::max(m, std::abs(v.magnitude));
        return m;
    }

    void write_csv(std::ostream& os) const {
        os << "check,location,magnitude\n";
        os.precision(17);
        for (const auto& v : violations) {
            os << v.check << ',';
            for (std::size_t i = 0; i < v.location.size(); ++i) {
                if (i) os << ';';
                os << v.location[i];
            }
            os << ',' << v.magnitude << '\n';
        }
    }
};

inline constexpr double kPropertyTol = 1e-12;

// Grounding, uniform margins, componentwise monotonicity and the Lipschitz
// property, all checked on lattice nodes / adjacent node pairs.
inline PropertyReport check_quasi_copula(const GridFunction& g, double tol = kPropertyTol) {
    PropertyReport report;
    const int d = g.dimension();
    const int n = g.resolution();
    const double step = 1.0 / n;
    std::vector<int> idx(d, 0);
    const std::size_t total = g.values().size();
    std::vector<int> nb(d);
    for (std::size_t flat = 0; flat < total; ++flat) {
        const double v = g.values()[flat];
        int zeros = 0, ones = 0;
        for (int i = 0; i < d; ++i) {
            if (idx[i] == 0) ++zeros;
            if (idx[i] == n) ++ones;
        }
        if (zeros > 0 && std::abs(v) > tol)
            report.violations.push_back({"grounding", g.node(idx), std::abs(v)});
        if (zeros == 0 && ones >= d - 1) {
            double expect = 1.0;
            if (ones == d - 1)
                for (int i = 0; i < d; ++i)
                    if (idx[i] != n) expect = static_cast<double>(idx[i]) / n;
            if (std::abs(v - expect) > tol)
                report.violations.push_back({"margin", g.node(idx), std::abs(v - expect)});
        }
        for (int i = 0; i < d; ++i) {
            if (idx[i] == n) continue;
            nb.assign(idx.begin(), idx.end());
            ++nb[i];
            const double w = g.at(nb);
            if (w - v < -tol)
                report.violations.push_back({"monotone", g.node(idx), v - w});
            if (std::abs(w - v) > step + tol)
                report.violations.push_back({"lipschitz", g.node(idx), std::abs(w - v) - step});
        }
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] <= n) break;
            idx[i] = 0;
        }
    }
    return report;
}

// d-increasingness on every lattice cell.  Exponential in d, hence the cap.
inline PropertyReport check_d_increasing(const GridFunction& g, double tol = kPropertyTol) {
    const int d = g.dimension();
    const int n = g.resolution();
    if (d > 6) throw dimension_too_large("cell check refused for d > 6");
    PropertyReport report;
    std::vector<int> cell(d, 0), corner(d);
    const std::size_t cells = [&] {
        std::size_t c = 1;
        for (int i = 0; i < d; ++i) c *= static_cast<std::size_t>(n);
        return c;
    }();
    for (std::size_t k = 0; k < cells; ++k) {
        double vol = 0.0;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
            int lowers = 0;
            for (int i = 0; i < d; ++i) {
                if (mask & (std::uint64_t{1} << i)) {
                    corner[i] = cell[i];
                    ++lowers;
                } else {
                    corner[i] = cell[i] + 1;
                }
            }
            const double v = g.at(corner);
            vol += (lowers % 2 == 0) ? v : -v;
        }
        if (vol < -tol)
            report.violations.push_back({"d-increasing", g.node(cell), vol});
        for (int i = d - 1; i >= 0; --i) {
            if (++cell[i] < n) break;
            cell[i] = 0;
        }
    }
    return report;
}

// ---- orthant orders ----------------------------------------------------------

enum class OrthantOrder { incomparable, lower_only, upper_only, both };

struct OrthantComparison {
    bool lo_dominated = false;  // Q1 <= Q2 pointwise on the lattice
    bool uo_dominated = false;  // Q1hat <= Q2hat pointwise on the lattice

    OrthantOrder classify() const {
        if (lo_dominated && uo_dominated) return OrthantOrder::both;
        if (lo_dominated) return OrthantOrder::lower_only;
        if (uo_dominated) return OrthantOrder::upper_only;
        return OrthantOrder::incomparable;
    }
};

inline OrthantComparison orthant_compare(const DependenceFunction& q1,
                                         const DependenceFunction& q2, int resolution,
                                         double tol = kPropertyTol,
                                         int max_expansion_dim = kDefaultExpansionCap) {
    if (q1.dimension() != q2.dimension())
        throw invalid_input("orthant_compare: dimension mismatch");
    const int d = q1.dimension();
    if (resolution < 1) throw invalid_input("orthant_compare: resolution must be >= 1");
    OrthantComparison cmp{true, true};
    std::vector<int> idx(d, 0);
    Point u(d);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(resolution + 1);
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (int i = 0; i < d; ++i) u[i] = static_cast<double>(idx[i]) / resolution;
        if (copula_value(q1, u, max_expansion_dim) >
            copula_value(q2, u, max_expansion_dim) + tol)
            cmp.lo_dominated = false;
        if (survival_value(q1, u, max_expansion_dim) >
            survival_value(q2, u, max_expansion_dim) + tol)
            cmp.uo_dominated = false;
        if (!cmp.lo_dominated && !cmp.uo_dominated) break;
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[i] <= resolution) break;
            idx[i] = 0;
        }
    }
    return cmp;
}

}  // namespace copula_bounds
