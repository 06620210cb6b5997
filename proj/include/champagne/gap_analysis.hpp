#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "champagne/bohr_sommerfeld.hpp"
#include "champagne/radial_spectrum.hpp"

namespace champagne::gaps {

struct GapRecord {
    double h = 0;
    int n = 0;
    double x_mid = 0;  ///< midpoint of the two eigenvalues defining the gap
    double gap_measured = 0;  ///< in x units
    double gap_pred_general = 0;
    double gap_pred_champagne = 0;
    double rel_err_general = 0;
    double rel_err_champagne = 0;
};

/// Consecutive gaps (in x = E1 / (sqrt(2) h)) of line n inside x_window, with both
/// predictions evaluated at the midpoint. `model` supplies B for the general variant.
/// An empty or single-point line yields an empty list and a warning.
std::vector<GapRecord> measure_gaps(const radial::SpectrumTable& spectrum, int n,
                                    std::pair<double, double> x_window,
                                    const bs::QuantizationModel& model,
                                    std::string* warning = nullptr);

struct VariantScore {
    double max_rel_general = 0;
    double max_rel_champagne = 0;
    bs::GapVariant winner = bs::GapVariant::general;
    /// c in the x = 0, n = 0 denominator |ln h| + c ln 2 + gamma of the winning variant.
    double ln2_coefficient = 0;
};

VariantScore score_variants(const std::vector<GapRecord>& records, const bs::QuantizationModel& model);

/// Grid resolution used for gap measurements: k_delta = 0.05 down to h = 1e-4 and 0.025
/// below. At h = 1e-5 the coarser grid leaves about 0.3% error in individual gaps, which
/// is larger than the semiclassical error being measured.
double gap_k_delta(double h);

/// Spectrum of a single line restricted to an x-window, on a grid resolved to k_delta
/// (0 selects gap_k_delta(h)).
radial::SpectrumTable line_spectrum(double h, int n, std::pair<double, double> x_window,
                                    double k_delta = 0, bool richardson = true,
                                    unsigned workers = 1);

struct Regression {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

/// Ordinary least squares y = slope x + intercept. Needs two distinct x values.
Regression linear_regression(const std::vector<double>& x, const std::vector<double>& y);

struct SmallestGapRow {
    double h = 0;
    double abs_ln_h = 0;
    double gap_min_measured = 0;  ///< Delta E / h = sqrt(2) Delta x
    double x_at_min = 0;
    double gap_min_general = 0;   ///< formula at x = 0, n = 0, same units
    double gap_min_champagne = 0;
};

struct SmallestGapScan {
    std::vector<SmallestGapRow> rows;  ///< in the order of h_list
    Regression inverse_gap_vs_log;     ///< 1 / gap_min_measured against |ln h|
};

struct ScanOptions {
    double x_half_width = 4.0;  ///< the n = 0 line is searched on |x| <= this
    double k_delta = 0;  ///< 0 selects gap_k_delta(h)
    bool richardson = true;
    unsigned workers = 0;  ///< 0 = default_workers(); the scan is parallel over h
};

SmallestGapScan smallest_gap_scan(const std::vector<double>& h_list, const bs::QuantizationModel& model,
                                  const ScanOptions& options = {});

/// Convex polygon in the scaled plane (E1 / h, E2 / h); vertices counter-clockwise.
struct Window {
    std::vector<std::array<double, 2>> vertices;

    static Window rectangle(double u_min, double u_max, double v_min, double v_max);
    /// Throws ConfigError unless the polygon is convex, counter-clockwise and non-degenerate.
    void validate() const;
    double area() const;
    /// Bounds of the polygon, {u_min, u_max, v_min, v_max}.
    std::array<double, 4> bounds() const;
    /// Intersection with the horizontal line v = const, if any.
    std::optional<std::pair<double, double>> slice(double v) const;
    /// The image diag(1/sqrt 2, 1) K, i.e. the window in (x, n) coordinates.
    Window in_xn() const;
};

struct WeylResult {
    double h = 0;
    long N = 0;
    double predicted = 0;
    double residual = 0;  ///< N - predicted
};

/// N counts eigenvalues with (E1/h, E2/h) in K; predicted = (|ln h| / 2pi) times the sum over
/// integers n of the x-length of the slice of K in (x, n) coordinates. Throws
/// PreconditionError if hK is not inside the computed window of the table.
WeylResult weyl_count(const radial::SpectrumTable& spectrum, const Window& K);

/// Joint spectrum covering hK with a small margin, on a grid resolved to k_delta.
radial::SpectrumTable spectrum_for_window(double h, const Window& K, double k_delta = 0.1,
                                          unsigned workers = 0);

struct DHOptions {
    std::uint64_t samples = 10'000'000;
    unsigned shards = 16;
    std::uint64_t seed = 20240601;
    unsigned workers = 0;
    double max_rel_error = 0.05;  ///< SampleSizeError above this relative standard error
};

struct DHResult {
    double h = 0;
    double mu_over_norm = 0;  ///< mu(hK) / (2 pi h)^2
    double std_error = 0;     ///< standard error of mu_over_norm
    double asymptotic = 0;    ///< (|ln h| / 2pi) |K0~|, the logarithmic leading term
    std::uint64_t samples = 0;
    double ratio() const { return mu_over_norm / asymptotic; }
};

/// Liouville volume of {(H, I) in hK} for the Champagne bottle. In polar coordinates the
/// angle integrates to 2 pi and the radial momentum in closed form, leaving a Monte Carlo
/// integral over (r, L) with a uniform plus log-uniform mixture in r that resolves the
/// 1/r behaviour near the pinched torus. Shards use fixed seeds and are reduced in order.
DHResult dh_volume(const Window& K, double h, const DHOptions& options = {});

void write_gaps_csv(const std::vector<GapRecord>& records, std::ostream& out);
void write_weyl_csv(const std::vector<WeylResult>& rows, std::ostream& out);
/// Two whitespace-separated columns, one pair per line.
void write_plot_data(const std::vector<std::pair<double, double>>& xy, std::ostream& out);

}  // namespace champagne::gaps
