// Improved Frechet-Hoeffding bounds from partial dependence information:
// prescriptions on finite point sets, on functionals, and on lower-dimensional
// margins, plus a certifier that detects when a bound fails d-increasingness.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>

#include "copula_bounds/core.hpp"

namespace copula_bounds {

enum class PrescriptionSide { copula_scale, survival_scale };
enum class BoundSide { lower, upper };

inline const char* to_string(PrescriptionSide s) {
    return s == PrescriptionSide::copula_scale ? "copula-scale" : "survival-scale";
}

inline PrescriptionSide prescription_side_from_string(const std::string& s) {
    if (s == "copula-scale") return PrescriptionSide::copula_scale;
    if (s == "survival-scale") return PrescriptionSide::survival_scale;
    throw invalid_input("unknown prescription side '" + s + "'");
}

// Values of an (unknown) dependence function prescribed on a finite point set.
// Copula-scale rows prescribe Q(x) = v, survival-scale rows prescribe Qhat(x) = v.
class Prescription {
  public:
    Prescription(int dim, PrescriptionSide side) : dim_(dim), side_(side) {
        check_dimension(dim_);
    }

    void add(Point x, double value, double tol = kPropertyTol) {
        check_unit_point(x, dim_, "prescription point");
        double lo, hi;
        if (side_ == PrescriptionSide::copula_scale) {
            lo = frechet_lower(x);
            hi = frechet_upper(x);
        } else {
            Point w(dim_);
            for (int i = 0; i < dim_; ++i) w[i] = 1.0 - x[i];
            lo = frechet_lower(w);
            hi = frechet_upper(w);
        }
        if (value < lo - tol || value > hi + tol) {
            std::ostringstream os;
            os << "prescribed value " << value << " outside the envelope [" << lo << ", " << hi
               << "]";
            throw invalid_input(os.str());
        }
        for (const auto& [y, v] : points_) {
            bool same = true;
            for (int i = 0; i < dim_; ++i) same &= std::abs(y[i] - x[i]) <= tol;
            if (same && std::abs(v - value) > tol)
                throw invalid_input("conflicting values prescribed at the same point");
        }
        points_.emplace_back(std::move(x), value);
    }

    int dimension() const { return dim_; }
    PrescriptionSide side() const { return side_; }
    const std::vector<std::pair<Point, double>>& points() const { return points_; }
    bool empty() const { return points_.empty(); }

    // Same points, coordinates reflected through 1 - x, values kept.  Maps a
    // survival-scale prescription onto the survival copula's scale and back.
    Prescription reflected() const {
        Prescription out(dim_, side_ == PrescriptionSide::copula_scale
                                   ? PrescriptionSide::survival_scale
                                   : PrescriptionSide::copula_scale);
        for (const auto& [x, v] : points_) {
            Point w(dim_);
            for (int i = 0; i < dim_; ++i) w[i] = 1.0 - x[i];
            out.points_.emplace_back(std::move(w), v);
        }
        return out;
    }

    void write_csv(std::ostream& os) const {
        os << "d,side\n" << dim_ << ',' << to_string(side_) << '\n';
        os.precision(17);
        for (const auto& [x, v] : points_) {
            for (double c : x) os << c << ',';
            os << v << '\n';
        }
    }

    static Prescription read_csv(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line.rfind("d,side", 0) != 0)
            throw invalid_input("prescription csv: missing 'd,side' header");
        if (!std::getline(is, line)) throw invalid_input("prescription csv: missing meta row");
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw invalid_input("prescription csv: malformed meta row '" + line + "'");
        const int d = std::stoi(line.substr(0, comma));
        Prescription p(d, prescription_side_from_string(line.substr(comma + 1)));
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string cell;
            std::vector<double> vals;
            while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
            if (static_cast<int>(vals.size()) != d + 1)
                throw invalid_input("prescription csv: row with wrong arity '" + line + "'");
            Point x(vals.begin(), vals.end() - 1);
            p.add(std::move(x), vals.back());
        }
        return p;
    }

  private:
    int dim_;
    PrescriptionSide side_;
    std::vector<std::pair<Point, double>> points_;
};

// ---- point-set bounds --------------------------------------------------------

// Largest quasi-copula value at u consistent with the prescription from below:
// max(W_d(u), max_k { v_k - sum_i (x_ki - u_i)^+ }).
inline DependenceFunction lower_bound_subset(const Prescription& p) {
    if (p.side() != PrescriptionSide::copula_scale)
        throw invalid_input("lower_bound_subset expects a copula-scale prescription");
    const int d = p.dimension();
    auto pts = std::make_shared<std::vector<std::pair<Point, double>>>(p.points());
    return DependenceFunction(d, FunctionKind::quasi_copula,
                              [pts, d](std::span<const double> u) {
                                  double best = frechet_lower(u);
                                  for (const auto& [x, v] : *pts) {
                                      double t = v;
                                      for (int i = 0; i < d; ++i)
                                          t -= std::max(0.0, x[i] - u[i]);
                                      best = std::max(best, t);
                                  }
                                  return std::max(0.0, best);
                              });
}

inline DependenceFunction upper_bound_subset(const Prescription& p) {
    if (p.side() != PrescriptionSide::copula_scale)
        throw invalid_input("upper_bound_subset expects a copula-scale prescription");
    const int d = p.dimension();
    auto pts = std::make_shared<std::vector<std::pair<Point, double>>>(p.points());
    return DependenceFunction(d, FunctionKind::quasi_copula,
                              [pts, d](std::span<const double> u) {
                                  double best = frechet_upper(u);
                                  for (const auto& [x, v] : *pts) {
                                      double t = v;
                                      for (int i = 0; i < d; ++i)
                                          t += std::max(0.0, u[i] - x[i]);
                                      best = std::min(best, t);
                                  }
                                  return best;
                              });
}

// Bounds on survival functions from a survival-scale prescription: reflect the
// prescription onto the survival copula's scale, bound there, reflect back.
inline DependenceFunction survival_bound_subset(const Prescription& p, BoundSide side) {
    if (p.side() != PrescriptionSide::survival_scale)
        throw invalid_input("survival_bound_subset expects a survival-scale prescription");
    const int d = p.dimension();
    auto base = side == BoundSide::lower ? lower_bound_subset(p.reflected())
                                         : upper_bound_subset(p.reflected());
    return DependenceFunction(d, FunctionKind::quasi_survival,
                              [base, d](std::span<const double> u) {
                                  Point w(d);
                                  for (int i = 0; i < d; ++i) w[i] = 1.0 - u[i];
                                  return base(w);
                              });
}

// Prescription sampling the diagonal track {(t,...,t) : t in one of the given
// closed intervals} of qstar.  Segment endpoints are always included.
inline Prescription diagonal_track_prescription(
    const DependenceFunction& qstar, const std::vector<std::pair<double, double>>& segments,
    int points_per_segment) {
    if (points_per_segment < 2) throw invalid_input("need at least two points per segment");
    const int d = qstar.dimension();
    Prescription p(d, PrescriptionSide::copula_scale);
    for (auto [a, b] : segments) {
        if (!(a >= 0.0 && b <= 1.0 && a <= b))
            throw invalid_input("track segment outside [0,1] or reversed");
        for (int k = 0; k < points_per_segment; ++k) {
            const double t = a + (b - a) * static_cast<double>(k) / (points_per_segment - 1);
            Point x(d, t);
            p.add(std::move(x), qstar(Point(d, t)));
        }
    }
    return p;
}

// ---- functional prescriptions -----------------------------------------------

// rho(Q) = theta for an orthant-order increasing, continuous functional.
class FunctionalPrescription {
  public:
    using Functional = std::function<double(const DependenceFunction&)>;

    FunctionalPrescription(int dim, PrescriptionSide scale, Functional rho, double theta)
        : dim_(dim), scale_(scale), rho_(std::move(rho)), theta_(theta) {
        check_dimension(dim_);
        if (!rho_) throw invalid_input("functional prescription requires a functional");
        const double lo = rho_(scale_ == PrescriptionSide::copula_scale
                                   ? frechet_lower_function(dim_)
                                   : survival_frechet_lower_function(dim_));
        const double hi = rho_(scale_ == PrescriptionSide::copula_scale
                                   ? frechet_upper_function(dim_)
                                   : survival_frechet_upper_function(dim_));
        if (!(theta_ >= lo - kPropertyTol && theta_ <= hi + kPropertyTol)) {
            std::ostringstream os;
            os << "target " << theta_ << " outside the attainable range [" << lo << ", " << hi
               << "]";
            throw infeasible_target(os.str());
        }
        rho_lo_ = lo;
        rho_hi_ = hi;
    }

    int dimension() const { return dim_; }
    PrescriptionSide scale() const { return scale_; }
    double theta() const { return theta_; }
    double rho(const DependenceFunction& q) const { return rho_(q); }
    double rho_at_envelope_lower() const { return rho_lo_; }
    double rho_at_envelope_upper() const { return rho_hi_; }

  private:
    int dim_;
    PrescriptionSide scale_;
    Functional rho_;
    double theta_;
    double rho_lo_ = 0.0, rho_hi_ = 0.0;
};

namespace detail {

inline DependenceFunction single_point_bound(int d, PrescriptionSide scale,
                                             std::span<const double> u, double r,
                                             BoundSide side) {
    Prescription p(d, scale);
    p.add(Point(u.begin(), u.end()), r, 1e-9);
    if (scale == PrescriptionSide::copula_scale)
        return side == BoundSide::lower ? lower_bound_subset(p) : upper_bound_subset(p);
    return survival_bound_subset(p, side);
}

// The one-parameter families r -> rho(bound with Q(u) = r) must be increasing;
// a coarse scan guards against functionals that break the contract.
inline void check_functional_monotone(const std::function<double(double)>& g, double lo,
                                      double hi) {
    constexpr int kScan = 16;
    double prev = g(lo);
    for (int i = 1; i <= kScan; ++i) {
        const double r = lo + (hi - lo) * static_cast<double>(i) / kScan;
        const double cur = g(r);
        if (cur < prev - 1e-9)
            throw contract_violation("functional is not increasing along the bound family");
        prev = cur;
    }
}

inline double bisect_sup(const std::function<double(double)>& g, double theta, double lo,
                         double hi, double tol, int max_iter) {
    // sup { r : g(r) <= theta } for increasing g with g(lo) <= theta
    if (g(hi) <= theta) return hi;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) <= theta ? lo : hi) = mid;
    }
    return lo;
}

inline double bisect_inf(const std::function<double(double)>& g, double theta, double lo,
                         double hi, double tol, int max_iter) {
    // inf { r : g(r) >= theta } for increasing g with g(hi) >= theta
    if (g(lo) >= theta) return lo;
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) >= theta ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace detail

inline constexpr double kFunctionalTol = 1e-10;
inline constexpr int kFunctionalMaxIter = 200;

// Pointwise bounds at u implied by rho(Q) = theta.  Returns {lower, upper}.
inline std::pair<double, double> functional_bounds(const FunctionalPrescription& fp,
                                                   std::span<const double> u,
                                                   double tol = kFunctionalTol,
                                                   int max_iter = kFunctionalMaxIter) {
    const int d = fp.dimension();
    check_unit_point(u, d);
    const bool copula_scale = fp.scale() == PrescriptionSide::copula_scale;
    Point w(d);
    for (int i = 0; i < d; ++i) w[i] = 1.0 - u[i];
    const double r_lo = copula_scale ? frechet_lower(u) : frechet_lower(w);
    const double r_hi = copula_scale ? frechet_upper(u) : frechet_upper(w);
    const double theta = fp.theta();

    auto g_lower = [&](double r) {  // r -> rho of the lower bound prescribing Q(u) = r
        return fp.rho(detail::single_point_bound(d, fp.scale(), u, r, BoundSide::lower));
    };
    auto g_upper = [&](double r) {
        return fp.rho(detail::single_point_bound(d, fp.scale(), u, r, BoundSide::upper));
    };
    detail::check_functional_monotone(g_lower, r_lo, r_hi);
    detail::check_functional_monotone(g_upper, r_lo, r_hi);

    // upper: largest r whose lower-bound family still reaches theta
    double upper = r_hi;
    if (theta <= g_lower(r_hi) + kPropertyTol)
        upper = detail::bisect_sup(g_lower, theta, r_lo, r_hi, tol, max_iter);

    // lower: smallest r whose upper-bound family already reaches theta
    double lower = r_lo;
    if (theta >= g_upper(r_lo) - kPropertyTol)
        lower = detail::bisect_inf(g_upper, theta, r_lo, r_hi, tol, max_iter);

    if (lower > upper + 1e-8)
        throw contract_violation("functional bounds crossed; functional violates its contract");
    return {std::min(lower, upper), std::max(lower, upper)};
}

inline std::pair<double, double> survival_functional_bounds(const FunctionalPrescription& fp,
                                                            std::span<const double> u,
                                                            double tol = kFunctionalTol,
                                                            int max_iter = kFunctionalMaxIter) {
    if (fp.scale() != PrescriptionSide::survival_scale)
        throw invalid_input("survival_functional_bounds expects a survival-scale functional");
    return functional_bounds(fp, u, tol, max_iter);
}

// ---- marginal prescriptions --------------------------------------------------

struct MarginalBlock {
    std::vector<int> indices;  // sorted coordinate subset, |I| >= 2
    DependenceFunction lower;
    DependenceFunction upper;
};

class MarginalPrescription {
  public:
    MarginalPrescription(int dim, std::vector<MarginalBlock> blocks)
        : dim_(dim), blocks_(std::move(blocks)) {
        check_dimension(dim_);
        if (blocks_.empty()) throw invalid_input("marginal prescription requires blocks");
        for (auto& b : blocks_) {
            if (b.indices.size() < 2)
                throw invalid_input("marginal block needs at least two coordinates");
            if (!std::is_sorted(b.indices.begin(), b.indices.end()) ||
                std::adjacent_find(b.indices.begin(), b.indices.end()) != b.indices.end())
                throw invalid_input("marginal block indices must be sorted and distinct");
            if (b.indices.front() < 0 || b.indices.back() >= dim_)
                throw invalid_input("marginal block index out of range");
            const int m = static_cast<int>(b.indices.size());
            if (b.lower.dimension() != m || b.upper.dimension() != m)
                throw invalid_input("marginal block bound dimension mismatch");
        }
        for (std::size_t a = 0; a + 1 < blocks_.size(); ++a)
            for (std::size_t b = a + 1; b < blocks_.size(); ++b) {
                std::vector<int> common;
                std::set_intersection(blocks_[a].indices.begin(), blocks_[a].indices.end(),
                                      blocks_[b].indices.begin(), blocks_[b].indices.end(),
                                      std::back_inserter(common));
                if (common.size() > 1)
                    throw invalid_input("marginal blocks may share at most one coordinate");
            }
        for (auto& b : blocks_) validate_block_order(b);
    }

    int dimension() const { return dim_; }
    const std::vector<MarginalBlock>& blocks() const { return blocks_; }

  private:
    static void validate_block_order(const MarginalBlock& b) {
        const int m = b.lower.dimension();
        auto g_lo = GridFunction::sample(b.lower, 4);
        auto g_hi = GridFunction::sample(b.upper, 4);
        for (std::size_t i = 0; i < g_lo.values().size(); ++i)
            if (g_lo.values()[i] > g_hi.values()[i] + 1e-9)
                throw invalid_input("marginal block has lower bound above upper bound (dim " +
                                    std::to_string(m) + ")");
    }

    int dim_;
    std::vector<MarginalBlock> blocks_;
};

// Bounds on copulas whose I_j-margins sit between the block bounds (lower
// orthant order blockwise).  Returns {lower, upper}, both quasi-copulas.
inline std::pair<DependenceFunction, DependenceFunction> marginal_bounds(
    const MarginalPrescription& mp) {
    const int d = mp.dimension();
    auto blocks = std::make_shared<std::vector<MarginalBlock>>(mp.blocks());
    DependenceFunction lower(
        d, FunctionKind::quasi_copula, [blocks, d](std::span<const double> u) {
            double best = frechet_lower(u);
            Point proj;
            for (const auto& b : *blocks) {
                proj.clear();
                double slack = 0.0;
                std::size_t next = 0;
                for (int i = 0; i < d; ++i) {
                    if (next < b.indices.size() && b.indices[next] == i) {
                        proj.push_back(u[i]);
                        ++next;
                    } else {
                        slack += u[i] - 1.0;
                    }
                }
                best = std::max(best, b.lower(proj) + slack);
            }
            return std::max(0.0, best);
        });
    DependenceFunction upper(
        d, FunctionKind::quasi_copula, [blocks, d](std::span<const double> u) {
            double best = frechet_upper(u);
            Point proj;
            for (const auto& b : *blocks) {
                proj.clear();
                std::size_t next = 0;
                for (int i = 0; i < d; ++i)
                    if (next < b.indices.size() && b.indices[next] == i) {
                        proj.push_back(u[i]);
                        ++next;
                    }
                best = std::min(best, b.upper(proj));
            }
            return best;
        });
    return {std::move(lower), std::move(upper)};
}

// Survival-side version: block bounds are read on the survival-copula scale and
// the assembled bounds are reflected back, so they bracket survival functions.
inline std::pair<DependenceFunction, DependenceFunction> survival_marginal_bounds(
    const MarginalPrescription& mp) {
    const int d = mp.dimension();
    auto [lo, hi] = marginal_bounds(mp);
    auto make = [d](DependenceFunction f) {
        return DependenceFunction(d, FunctionKind::quasi_survival,
                                  [f, d](std::span<const double> u) {
                                      Point w(d);
                                      for (int i = 0; i < d; ++i) w[i] = 1.0 - u[i];
                                      return f(w);
                                  });
    };
    return {make(std::move(lo)), make(std::move(hi))};
}

// ---- properness certifier ------------------------------------------------------

// Product set leaving a gap (s_i, s_i + eps_i) on three distinguished axes; the
// remaining coordinates are unconstrained.
struct GapBoxSet {
    int dim = 3;
    std::array<int, 3> axes{0, 1, 2};
    std::array<double, 3> s{};
    std::array<double, 3> eps{};

    void validate() const {
        check_dimension(dim);
        if (dim < 3) throw invalid_input("gap-box sets need dimension >= 3");
        std::array<int, 3> sorted = axes;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[0] < 0 || sorted[2] >= dim || sorted[0] == sorted[1] || sorted[1] == sorted[2])
            throw invalid_input("gap-box axes must be three distinct coordinates");
        for (int k = 0; k < 3; ++k) {
            if (!(s[k] >= 0.0 && eps[k] > 0.0 && s[k] + eps[k] <= 1.0))
                throw invalid_input("gap-box requires 0 <= s, eps > 0, s + eps <= 1");
        }
    }
};

struct Certificate {
    Box witness;   // box with negative mass under the bound
    Point u;       // interior point used to build the witness
    double volume; // box volume of the bound over the witness box
};

// Finite sampling of the gap-box set (distinguished axes sampled on both sides
// of the gap, remaining coordinates pinned at 1), valued through cstar.
inline Prescription gap_box_prescription(const GapBoxSet& gap, const DependenceFunction& cstar,
                                         int points_per_segment = 4) {
    gap.validate();
    if (cstar.dimension() != gap.dim)
        throw invalid_input("gap-box certifier: candidate dimension mismatch");
    std::array<std::vector<double>, 3> axis_samples;
    for (int k = 0; k < 3; ++k) {
        auto& xs = axis_samples[k];
        for (int j = 0; j < points_per_segment; ++j)
            xs.push_back(gap.s[k] * static_cast<double>(j) / (points_per_segment - 1));
        for (int j = 0; j < points_per_segment; ++j)
            xs.push_back(std::min(1.0, gap.s[k] + gap.eps[k] +
                                           (1.0 - gap.s[k] - gap.eps[k]) *
                                               static_cast<double>(j) /
                                               (points_per_segment - 1)));
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }
    Prescription p(gap.dim, PrescriptionSide::copula_scale);
    for (double x0 : axis_samples[0])
        for (double x1 : axis_samples[1])
            for (double x2 : axis_samples[2]) {
                Point x(gap.dim, 1.0);
                x[gap.axes[0]] = x0;
                x[gap.axes[1]] = x1;
                x[gap.axes[2]] = x2;
                const double v = copula_value(cstar, x);
                p.add(std::move(x), v);
            }
    return p;
}

namespace detail {

inline Point lift_three(int dim, const std::array<int, 3>& axes, const std::array<double, 3>& v,
                        double fill) {
    Point x(dim, fill);
    for (int k = 0; k < 3; ++k) x[axes[k]] = v[k];
    return x;
}

}  // namespace detail

inline constexpr double kCertifierMargin = 1e-9;

// Checks the gap conditions for the requested bound of the prescription
// (S, cstar) and, when they hold, produces a box with negative volume.
inline std::optional<Certificate> certify_proper_quasi_copula(const GapBoxSet& gap,
                                                              const DependenceFunction& cstar,
                                                              BoundSide which,
                                                              double margin = kCertifierMargin) {
    gap.validate();
    const int d = gap.dim;
    if (cstar.dimension() != d)
        throw invalid_input("gap-box certifier: candidate dimension mismatch");

    std::array<double, 3> se{};
    for (int k = 0; k < 3; ++k) se[k] = gap.s[k] + gap.eps[k];

    // Values of the candidate at the eight corners of the gap region; bit k of
    // the mask selects s_k + eps_k over s_k.
    std::array<double, 8> g{};
    for (int mask = 0; mask < 8; ++mask) {
        std::array<double, 3> v{};
        for (int k = 0; k < 3; ++k) v[k] = (mask >> k) & 1 ? se[k] : gap.s[k];
        g[mask] = copula_value(cstar, detail::lift_three(d, gap.axes, v, 1.0));
    }
    const double D = g[7] - g[0];
    const double E = gap.eps[0] + gap.eps[1] + gap.eps[2];

    if (!(D > 0.0 && D < E)) return std::nullopt;
    if (which == BoundSide::lower) {
        if (!(g[0] >= frechet_lower(detail::lift_three(d, gap.axes, se, 1.0))))
            return std::nullopt;
    } else {
        if (!(g[7] <= frechet_upper(detail::lift_three(d, gap.axes, gap.s, 1.0))))
            return std::nullopt;
    }

    // Witness offsets: delta_k = s_k + eps_k - u_k (lower) or u_k - s_k (upper).
    // Over the prescription set the bound's value at a witness-box corner is an
    // extremum over the gap corners g, which makes the region where the
    // closed-form volume D - sum(delta) is exact a polytope in delta.  Maximize
    // the smallest slack over its inequalities.
    auto sum_over = [](int mask, const std::array<double, 3>& x) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
            if ((mask >> k) & 1) s += x[k];
        return s;
    };
    auto margin_of = [&](const std::array<double, 3>& del) {
        double m = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) m = std::min({m, del[k], gap.eps[k] - del[k]});
        if (which == BoundSide::lower) {
            for (int K = 1; K < 8; ++K) m = std::min(m, sum_over(K, del) - (g[K] - g[0]));
            for (int K = 1; K < 7; ++K) m = std::min(m, (g[7] - g[K]) - sum_over(7 ^ K, del));
            for (int K : {3, 5, 6}) m = std::min(m, D - sum_over(K, del));
            for (int J = 1; J < 7; ++J) {  // claimed corner value above the W floor
                double wsum = 0.0;
                for (int k = 0; k < 3; ++k) wsum += (J >> k) & 1 ? se[k] - del[k] : se[k];
                m = std::min(m, (g[7] - sum_over(J, del)) - std::max(0.0, wsum - 2.0));
            }
        } else {
            for (int K = 0; K < 7; ++K) m = std::min(m, sum_over(7 ^ K, del) - (g[7] - g[K]));
            for (int K = 1; K < 7; ++K) m = std::min(m, (g[K] - g[0]) - sum_over(K, del));
            for (int K : {3, 5, 6}) m = std::min(m, D - sum_over(K, del));
            for (int J = 1; J < 7; ++J) {  // claimed corner value below the M cap
                double cap = 1.0;
                for (int k = 0; k < 3; ++k)
                    cap = std::min(cap, (J >> k) & 1 ? gap.s[k] + del[k] : gap.s[k]);
                m = std::min(m, cap - (g[0] + sum_over(J, del)));
            }
        }
        return m;
    };

    // deterministic refinement scan for the max-margin offset
    std::array<double, 3> win_lo{0.0, 0.0, 0.0};
    std::array<double, 3> win_hi = gap.eps;
    std::array<double, 3> best_del{};
    double best = -std::numeric_limits<double>::infinity();
    constexpr int kGrid = 24;
    for (int round = 0; round < 3; ++round) {
        std::array<double, 3> step{};
        for (int k = 0; k < 3; ++k) step[k] = (win_hi[k] - win_lo[k]) / kGrid;
        for (int a = 0; a <= kGrid; ++a)
            for (int b = 0; b <= kGrid; ++b)
                for (int c = 0; c <= kGrid; ++c) {
                    const std::array<double, 3> del{win_lo[0] + step[0] * a,
                                                    win_lo[1] + step[1] * b,
                                                    win_lo[2] + step[2] * c};
                    const double m = margin_of(del);
                    if (m > best) {
                        best = m;
                        best_del = del;
                    }
                }
        for (int k = 0; k < 3; ++k) {
            win_lo[k] = std::max(0.0, best_del[k] - 1.5 * step[k]);
            win_hi[k] = std::min(gap.eps[k], best_del[k] + 1.5 * step[k]);
        }
    }
    if (!(best >= margin)) return std::nullopt;

    std::array<double, 3> uv{};
    for (int k = 0; k < 3; ++k)
        uv[k] = which == BoundSide::lower ? se[k] - best_del[k] : gap.s[k] + best_del[k];

    Box witness;
    if (which == BoundSide::lower) {
        witness.lower = detail::lift_three(d, gap.axes, uv, 0.0);
        witness.upper = detail::lift_three(d, gap.axes, se, 1.0);
    } else {
        witness.lower = detail::lift_three(d, gap.axes, gap.s, 0.0);
        witness.upper = detail::lift_three(d, gap.axes, uv, 1.0);
    }

    // Belt and braces: evaluate the witness volume on the sampled bound and
    // insist it reproduces the closed form before reporting anything.
    auto sampled = gap_box_prescription(gap, cstar);
    auto bound = which == BoundSide::lower ? lower_bound_subset(sampled)
                                           : upper_bound_subset(sampled);
    const double volume = box_volume(bound, witness);
    const double closed = D - (best_del[0] + best_del[1] + best_del[2]);
    if (!(volume < 0.0) || std::abs(volume - closed) > 1e-12) return std::nullopt;
    return Certificate{std::move(witness), detail::lift_three(d, gap.axes, uv, 1.0), volume};
}

}  // namespace copula_bounds
