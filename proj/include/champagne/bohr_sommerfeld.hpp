#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "champagne/radial_spectrum.hpp"
#include "json.hpp"

namespace champagne::bs {

/// Constants of the phase function
///   g_n(x) = (1/2pi) (|n| pi/2 - x ln(2h) - Psi_n(x) + x B + n C) + offset / 2pi
/// whose integer level sets are the joint eigenvalues of line n near the focus-focus value.
struct QuantizationModel {
    std::optional<double> A;     ///< critical action, informational only
    double B = 0;                ///< x-slope
    double C = 0;                ///< n-slope (defined modulo 2pi)
    double D = 0;                ///< phase constant, equal to offset_mod_2pi when A is unknown
    double h = 0;                ///< the h this offset was calibrated at
    double offset_mod_2pi = 0;   ///< A/h + D + Maslov term, reduced to [0, 2pi)
    double residual = 0;         ///< RMS fit residual in g-units
    bool warning = false;        ///< residual above the model-mismatch threshold
    std::string source = "manual";
};

/// B = (5/2) ln 2, the value quoted for the Champagne bottle.
double champagne_reference_B();

/// The model the reference gap law is evaluated with: given B, C = 0, offset 0.
QuantizationModel reference_model(double h, double B);

double g_n(double x, int n, double h, const QuantizationModel& model);

/// d g_n / dx = (B - ln(2h) - Psi_n'(x)) / 2pi.
double g_n_slope(double x, int n, double h, const QuantizationModel& model);

struct LineRoot {
    int k = 0;
    double x = 0;
};

/// All solutions of g_n(x) = k in [x_lo, x_hi], k ascending, polished to |g_n - k| < 1e-12.
/// Throws ModelRangeError if g_n is not increasing on the window.
std::vector<LineRoot> predict_line(int n, double h, const QuantizationModel& model,
                                   std::pair<double, double> x_window);

/// Least-squares calibration of (B, C, offset) from computed eigenvalues.
/// Each line needs at least 3 eigenvalues in the window; C is fitted only with two or
/// more lines. Labels are consecutive integers per line; the per-line integer shift is
/// recovered from the fitted n-slope. Throws FitError when the data are insufficient.
QuantizationModel fit_model(const radial::SpectrumTable& spectrum, const std::vector<int>& n_set,
                            std::pair<double, double> x_window,
                            std::optional<double> fix_B = std::nullopt);

/// Same fit on raw (n, x) lines; used by fit_model and by synthetic round-trip tests.
QuantizationModel fit_lines(const std::vector<std::pair<int, std::vector<double>>>& lines,
                            double h, std::optional<double> fix_B = std::nullopt);

enum class GapVariant { general, champagne };

struct GapPrediction {
    int n = 0;
    double x = 0;
    double h = 0;
    double gap_x = 0;
    double gap_E_over_h = 0;  ///< sqrt(2) gap_x
    GapVariant variant = GapVariant::general;
};

/// general: gap_x = 2pi / (|ln h| + B - ln 2 - Psi_n'(x)) with the model's B.
/// champagne: the same curve with the constant fixed so that at x = 0, n = 0 the
/// denominator is |ln h| + (9/2) ln 2 + gamma, i.e. B replaced by (7/2) ln 2.
/// Throws ModelRangeError if the denominator is not positive.
GapPrediction predicted_gap(double x, int n, double h, const QuantizationModel& model,
                            GapVariant variant);

std::string to_string(GapVariant v);

nlohmann::json to_json(const QuantizationModel& model);
QuantizationModel model_from_json(const nlohmann::json& j);

}  // namespace champagne::bs
