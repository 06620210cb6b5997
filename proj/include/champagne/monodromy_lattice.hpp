#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "champagne/radial_spectrum.hpp"
#include "json.hpp"

namespace champagne::lattice {

struct Point {
    double E1 = 0;
    double E2 = 0;
};

using IntPoint = std::array<long, 2>;
using IntMatrix = std::array<std::array<long, 2>, 2>;

std::vector<Point> points_of(const radial::SpectrumTable& table);

/// Uniform-grid bucket index for disc queries in the (E1, E2) plane.
class PointIndex {
public:
    PointIndex(const std::vector<Point>& points, double cell);
    std::vector<std::size_t> within(Point center, double radius) const;
    const std::vector<Point>& points() const { return *points_; }

private:
    const std::vector<Point>* points_;
    double cell_;
    std::unordered_map<long long, std::vector<std::size_t>> buckets_;
    long long key(long i, long j) const { return (i << 32) ^ (j & 0xffffffffLL); }
};

/// Affine map P -> (linear P + offset) / h that sends the spectrum near `center`
/// close to integer pairs.
struct LatticeChart {
    Point center;
    std::array<std::array<double, 2>, 2> linear{};
    std::array<double, 2> offset{};
    double radius = 0;
    double h = 0;
    double residual = 0;  ///< max over the disc of the distance to the nearest integer pair

    std::array<double, 2> operator()(Point p) const;
    IntPoint label(Point p) const;
    bool covers(Point p) const;
};

/// Integer-affine change of chart: l -> matrix l + shift.
struct ChartTransition {
    IntMatrix matrix{{{1, 0}, {0, 1}}};
    IntPoint shift{0, 0};

    IntPoint operator()(IntPoint l) const;
    ChartTransition then(const ChartTransition& next) const;  ///< next o this
    ChartTransition inverse() const;
    bool is_identity() const;
};

long determinant(const IntMatrix& m);
long trace(const IntMatrix& m);
/// trace 2, det 1, (M - I)^2 = 0, M != I.
bool is_unipotent_nontrivial(const IntMatrix& m);

/// Fits a chart on the points of the disc: the two shortest independent difference vectors
/// at the point nearest the centre give a first basis, then labels are rounded and the map
/// refined by least squares. Throws FitError when fewer than 6 points are available, the
/// neighbour geometry is degenerate, or the residual exceeds `max_residual`.
LatticeChart fit_local_chart(const PointIndex& index, Point center, double radius, double h,
                             double max_residual = 0.05, double max_condition = 1e3);

/// Fits a chart at new_center and composes it with the integer-affine map that makes it
/// agree with `chart` on the overlap. Returns the corrected chart and the raw transition
/// (old labels = transition(new raw labels)). Throws GluingError when the transition does
/// not round to an integer-affine map with |det| = 1 within `rounding`.
std::pair<LatticeChart, ChartTransition> transport_chart(const LatticeChart& chart, Point new_center,
                                                         const PointIndex& index,
                                                         double rounding = 0.1,
                                                         double max_residual = 0.05);

/// Transition between two charts on their common points: labels of `b` = T(labels of `a`).
ChartTransition chart_transition(const LatticeChart& a, const LatticeChart& b,
                                 const PointIndex& index, double rounding = 0.1);

struct AtlasConfig {
    double h = 0;
    double rho_in = 0;        ///< inner radius of the charted annulus in the (E1, E2) plane
    double rho_out = 0;       ///< outer radius
    double chart_radius = 0;  ///< disc radius; 0 sizes discs to hold about 16 eigenvalues
    double cut_angle = 0;     ///< direction of the cut; sectors start here
    double rounding = 0.1;
    double max_residual = 0.05;
};

/// Charts covering an annulus around the critical value, glued along a polar grid of
/// centres. Labels are single-valued on the annulus cut along `cut_angle`; going once
/// around counter-clockwise changes them by `monodromy`.
class Atlas {
public:
    Atlas(std::vector<Point> points, AtlasConfig config);

    const AtlasConfig& config() const { return config_; }
    const std::vector<Point>& points() const { return points_; }
    const std::vector<LatticeChart>& charts() const { return charts_; }
    const std::vector<ChartTransition>& transitions() const { return transitions_; }
    /// Labels after one counter-clockwise turn = monodromy(labels before).
    const ChartTransition& monodromy() const { return monodromy_; }

    bool in_annulus(Point p) const;
    double radius(Point p) const;
    /// Angle measured from the cut, in [0, 2 pi).
    double relative_angle(Point p) const;
    /// Label of a point in the sheet reached after `lap` counter-clockwise turns.
    IntPoint label(Point p, long lap = 0) const;

private:
    std::vector<Point> points_;
    AtlasConfig config_;
    PointIndex index_;
    int rings_ = 0, sectors_ = 0;
    std::vector<double> ring_radius_;
    std::vector<LatticeChart> charts_;  ///< ring-major: charts_[ring * sectors_ + sector]
    std::vector<ChartTransition> transitions_;
    ChartTransition monodromy_;

    const LatticeChart& chart_for(Point p) const;
};

/// Closed polygonal line through joint eigenvalues (indices into Atlas::points()); the
/// last vertex connects back to the first.
struct SpectrumPolygon {
    std::vector<std::size_t> vertices;
    bool starts_on_L0 = false;
};

struct Unwinding {
    std::vector<IntPoint> vertices;  ///< unwound vertices, plus the unwound return to vertex 0
    std::vector<double> unwrapped_angle;  ///< continuous angle of each vertex, from the cut
    ChartTransition monodromy;
    long turns = 0;                  ///< winding number around the critical value
    bool closed = false;
};

/// Unwinds a polygon: each vertex is labelled in the sheet reached by following the polygon
/// from vertex 0. Consecutive vertices must subtend less than pi at the critical value.
Unwinding unwind(const SpectrumPolygon& polygon, const Atlas& atlas);

/// Points of the annulus whose label is fixed by the monodromy.
std::vector<std::size_t> l0_line(const Atlas& atlas);

/// Pick's formula for a simple closed lattice polygon, boundary points included:
/// Area + B/2 + 1. Throws PreconditionError for degenerate or self-intersecting input.
long pick_count(std::vector<IntPoint> vertices);

/// Exact test with integer orientation predicates; boundary counts as inside.
bool contains(const std::vector<IntPoint>& polygon, IntPoint p);

struct Counts {
    long spec = 0;
    long pick = 0;
    long inner = 0;  ///< eigenvalues inside the inner radius, inside by construction
};

/// N_spec counts joint eigenvalues inside or on the polygon: annulus points by their
/// unwound labels, points inside the inner radius directly when the polygon winds around
/// the critical value. N_pick is Pick's count of the unwound polygon. Throws
/// PreconditionError if an enclosing polygon does not start on L0, or if an unwound edge
/// leaves the charted annulus.
Counts count_in_polygon(const SpectrumPolygon& polygon, const Atlas& atlas);

/// Random polygon winding once around the critical value: it starts at an L0 eigenvalue on
/// the cut ray and visits 9 to 13 further eigenvalues at increasing angles, with radii in the
/// middle of the annulus so that the unwound edges stay inside it.
SpectrumPolygon random_enclosing_polygon(const Atlas& atlas, std::mt19937_64& rng);

nlohmann::json to_json(const LatticeChart& chart);
nlohmann::json to_json(const ChartTransition& t);

}  // namespace champagne::lattice
