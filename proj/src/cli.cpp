#include "champagne/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "champagne/bohr_sommerfeld.hpp"
#include "champagne/classical_actions.hpp"
#include "champagne/errors.hpp"
#include "champagne/gap_analysis.hpp"
#include "champagne/monodromy_lattice.hpp"
#include "champagne/radial_spectrum.hpp"
#include "champagne/special_functions.hpp"

namespace champagne::cli {

namespace {

using json = nlohmann::json;
constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v, int digits = 17) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

/// Shared state of one invocation: streams, the command path and its resolved options.
struct Context {
    std::ostream& out;
    std::ostream& err;
    std::string command;
    json config = json::object();

    /// Writes `content` to `path` (or to `out` when empty). Files get a JSON sidecar with
    /// the resolved configuration, the version and an optional summary.
    void emit(const std::string& path, const std::string& content, const json& summary = nullptr) const {
        if (path.empty()) {
            out << content;
            return;
        }
        write_file(path, content);
        json side = {{"command", command}, {"config", config}, {"version", CHAMPAGNE_VERSION}};
        if (!summary.is_null()) side["summary"] = summary;
        write_file(path + ".json", side.dump(2) + "\n");
    }

    static void write_file(const std::string& path, const std::string& content) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file " + path);
        f << content;
        if (!f) throw std::runtime_error("failed writing " + path);
    }
};

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

json resolved_options(const CLI::App& app) {
    json j = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        if (opt == app.get_help_ptr() || opt->get_lnames().empty()) continue;
        const std::string key = opt->get_lnames().front();
        // Scalar options keep the last occurrence; list options keep every element.
        std::string value = opt->get_default_str();
        if (opt->count() > 0)
            value = opt->get_expected_max() > 1 ? join(opt->results()) : opt->results().back();
        j[key] = value;
    }
    return j;
}

/// Reads flat key=value lines ('#' starts a comment) into --key=value tokens.
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path);
    std::vector<std::string> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        for (char& c : key)
            if (c == '_') c = '-';
        tokens.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    return tokens;
}

radial::DiscretizationConfig discretization(const radial::PotentialSpec& pot, std::pair<double, double> window,
                                            double h, int grid_points, double r_max, double k_delta,
                                            bool richardson) {
    auto cfg = radial::resolved_config(pot, window, h, k_delta, richardson);
    if (r_max > 0) {
        cfg.r_max = r_max;
        cfg.grid_points = radial::resolved_grid_points(pot, window.second, h, r_max, k_delta);
    }
    if (grid_points > 0) cfg.grid_points = grid_points;
    cfg.validate();
    return cfg;
}

bs::QuantizationModel general_model(double h, double B) {
    return bs::reference_model(h, std::isnan(B) ? bs::champagne_reference_B() : B);
}

std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

// ---------------------------------------------------------------------------------------
// Figure pipelines

struct ReproduceOptions {
    double h = kNaN;
    std::vector<double> h_list;
    double x_max = 10.0;
    double B = kNaN;
    std::string out_dir = ".";
};

std::string path_in(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string plot_text(const std::vector<std::pair<double, double>>& xy) {
    std::ostringstream s;
    gaps::write_plot_data(xy, s);
    return s.str();
}

/// Gap-versus-x comparison on the n = 0 line; shared by the cusp and cusp-z figures.
int reproduce_cusp(const Context& ctx, const ReproduceOptions& o, const std::string& prefix, double default_h) {
    const double h = std::isnan(o.h) ? default_h : o.h;
    const double X = o.x_max;
    const auto model = general_model(h, o.B);
    const auto table = gaps::line_spectrum(h, 0, {-X - 1.0, X + 1.0}, 0, true, 0);
    const auto records = gaps::measure_gaps(table, 0, {-X, X}, model);
    if (records.empty()) throw ModelRangeError("reproduce: no gaps measured");
    const auto score = gaps::score_variants(records, model);

    std::vector<std::pair<double, double>> measured, general, champagne;
    for (const auto& r : records) measured.emplace_back(r.x_mid, kSqrt2 * r.gap_measured);
    for (int i = 0; i <= 2000; ++i) {
        const double x = -X + 2.0 * X * i / 2000.0;
        general.emplace_back(x, bs::predicted_gap(x, 0, h, model, bs::GapVariant::general).gap_E_over_h);
        champagne.emplace_back(x, bs::predicted_gap(x, 0, h, model, bs::GapVariant::champagne).gap_E_over_h);
    }
    const double best = std::min(score.max_rel_general, score.max_rel_champagne);
    const bool ok = best <= 0.15;
    const json summary = {{"h", h},
                          {"gaps", records.size()},
                          {"max_rel_err_general", score.max_rel_general},
                          {"max_rel_err_champagne", score.max_rel_champagne},
                          {"winner", bs::to_string(score.winner)},
                          {"winner_constant", num(score.ln2_coefficient, 6) + " ln2 + gamma"},
                          {"tolerance", 0.15},
                          {"pass", ok}};
    std::ostringstream csv;
    gaps::write_gaps_csv(records, csv);
    ctx.emit(path_in(o.out_dir, prefix + "_gaps.csv"), csv.str(), summary);
    ctx.emit(path_in(o.out_dir, prefix + "_measured.dat"), plot_text(measured));
    ctx.emit(path_in(o.out_dir, prefix + "_general.dat"), plot_text(general));
    ctx.emit(path_in(o.out_dir, prefix + "_champagne.dat"), plot_text(champagne));
    ctx.out << prefix << ": h=" << num(h, 6) << " gaps=" << records.size()
            << " max_rel_err general=" << num(score.max_rel_general, 6)
            << " champagne=" << num(score.max_rel_champagne, 6) << " winner=" << bs::to_string(score.winner)
            << " (" << num(score.ln2_coefficient, 6) << " ln2 + gamma) tolerance=0.15 " << pass_fail(ok) << "\n";
    return ok ? 0 : 1;
}

int reproduce_gaps_formule(const Context& ctx, const ReproduceOptions& o) {
    const std::vector<double> hs = o.h_list.empty() ? std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5} : o.h_list;
    const auto model = general_model(hs.front(), o.B);
    const auto scan = gaps::smallest_gap_scan(hs, model);
    const double target = 1.0 / (2 * kPi * kSqrt2);
    const double slope_err = std::abs(scan.inverse_gap_vs_log.slope - target) / target;

    std::ostringstream csv;
    csv << "h,lnh_abs,gap_min_measured,x_at_min,gap_min_general,gap_min_champagne\n";
    std::vector<std::pair<double, double>> measured, general, champagne;
    for (const auto& r : scan.rows) {
        csv << num(r.h) << ',' << num(r.abs_ln_h) << ',' << num(r.gap_min_measured) << ',' << num(r.x_at_min)
            << ',' << num(r.gap_min_general) << ',' << num(r.gap_min_champagne) << '\n';
        measured.emplace_back(r.abs_ln_h, 1.0 / r.gap_min_measured);
    }
    for (int i = 0; i <= 200; ++i) {
        const double L = 2.0 + 12.0 * i / 200.0, h = std::exp(-L);
        general.emplace_back(L, 1.0 / bs::predicted_gap(0, 0, h, model, bs::GapVariant::general).gap_E_over_h);
        champagne.emplace_back(L, 1.0 / bs::predicted_gap(0, 0, h, model, bs::GapVariant::champagne).gap_E_over_h);
    }
    // The winner is the variant closest to the measured minimum at the smallest h.
    const auto& last = scan.rows.back();
    const double err_general = std::abs(last.gap_min_general - last.gap_min_measured) / last.gap_min_measured;
    const double err_champagne = std::abs(last.gap_min_champagne - last.gap_min_measured) / last.gap_min_measured;
    const bool ok = slope_err <= 0.05 && scan.inverse_gap_vs_log.r2 >= 0.995 &&
                    std::min(err_general, err_champagne) <= 0.10;
    const json summary = {{"slope", scan.inverse_gap_vs_log.slope},
                          {"slope_expected", target},
                          {"slope_rel_err", slope_err},
                          {"r2", scan.inverse_gap_vs_log.r2},
                          {"rel_err_general_at_smallest_h", err_general},
                          {"rel_err_champagne_at_smallest_h", err_champagne},
                          {"pass", ok}};
    ctx.emit(path_in(o.out_dir, "gaps_formule.csv"), csv.str(), summary);
    ctx.emit(path_in(o.out_dir, "gaps_formule_measured.dat"), plot_text(measured));
    ctx.emit(path_in(o.out_dir, "gaps_formule_general.dat"), plot_text(general));
    ctx.emit(path_in(o.out_dir, "gaps_formule_champagne.dat"), plot_text(champagne));
    ctx.out << "gaps-formule: slope=" << num(scan.inverse_gap_vs_log.slope, 6) << " (expected " << num(target, 6)
            << ", rel err " << num(slope_err, 3) << ") R2=" << num(scan.inverse_gap_vs_log.r2, 6)
            << " smallest-h rel err general=" << num(err_general, 4) << " champagne=" << num(err_champagne, 4)
            << " " << pass_fail(ok) << "\n";
    return ok ? 0 : 1;
}

gaps::Window xn_window(double x_min, double x_max, double n_min, double n_max) {
    return gaps::Window::rectangle(kSqrt2 * x_min, kSqrt2 * x_max, n_min, n_max);
}

int reproduce_weyl(const Context& ctx, const ReproduceOptions& o) {
    const std::vector<double> hs = o.h_list.empty() ? std::vector<double>{1e-2, 1e-3, 1e-4} : o.h_list;
    const auto K = xn_window(-o.x_max, o.x_max, -5.5, 5.5);
    std::vector<gaps::WeylResult> rows;
    for (double h : hs) rows.push_back(gaps::weyl_count(gaps::spectrum_for_window(h, K), K));
    double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
    bool ratios_ok = true;
    std::vector<std::pair<double, double>> counted, predicted;
    for (const auto& r : rows) {
        rmin = std::min(rmin, std::abs(r.residual));
        rmax = std::max(rmax, std::abs(r.residual));
        if (r.h <= 1e-3 && std::abs(static_cast<double>(r.N) / r.predicted - 1.0) > 0.20) ratios_ok = false;
        counted.emplace_back(std::abs(std::log(r.h)), static_cast<double>(r.N));
        predicted.emplace_back(std::abs(std::log(r.h)), r.predicted);
    }
    const bool bounded = rmax <= 2 * rmin + 5;
    const bool ok = ratios_ok && bounded;
    const json summary = {{"residual_min", rmin}, {"residual_max", rmax}, {"ratios_within_20pct", ratios_ok},
                          {"residual_bounded", bounded}, {"pass", ok}};
    std::ostringstream csv;
    gaps::write_weyl_csv(rows, csv);
    ctx.emit(path_in(o.out_dir, "weyl.csv"), csv.str(), summary);
    ctx.emit(path_in(o.out_dir, "weyl_N.dat"), plot_text(counted));
    ctx.emit(path_in(o.out_dir, "weyl_predicted.dat"), plot_text(predicted));
    for (const auto& r : rows)
        ctx.out << "weyl: h=" << num(r.h, 6) << " N=" << r.N << " predicted=" << num(r.predicted, 6)
                << " ratio=" << num(static_cast<double>(r.N) / r.predicted, 4) << "\n";
    ctx.out << "weyl: residual range [" << num(rmin, 4) << ", " << num(rmax, 4) << "] " << pass_fail(ok) << "\n";
    return ok ? 0 : 1;
}

struct AtlasSetup {
    radial::SpectrumTable table;
    std::unique_ptr<lattice::Atlas> atlas;
};

AtlasSetup build_atlas(double h, double rho_in, double rho_out) {
    if (!(h > 0) || h > 0.05) throw ConfigError("atlas: h must lie in (0, 0.05]");
    if (rho_in == 0) rho_in = 24 * h;
    if (rho_out == 0) rho_out = 36 * h;
    if (!(rho_out > rho_in)) throw ConfigError("atlas: need rho_out > rho_in");
    const int nmax = static_cast<int>(std::ceil(1.05 * rho_out / h));
    const std::pair<double, double> window{-1.05 * rho_out, 1.05 * rho_out};
    const auto pot = radial::PotentialSpec::champagne_bottle();
    AtlasSetup s;
    s.table = radial::joint_spectrum(h, {-nmax, nmax}, window, radial::resolved_config(pot, window, h, 0.1, false), pot);
    lattice::AtlasConfig cfg;
    cfg.h = h;
    cfg.rho_in = rho_in;
    cfg.rho_out = rho_out;
    s.atlas = std::make_unique<lattice::Atlas>(lattice::points_of(s.table), cfg);
    return s;
}

int reproduce_unwinding(const Context& ctx, const ReproduceOptions& o) {
    const double h = std::isnan(o.h) ? 5e-3 : o.h;
    const auto s = build_atlas(h, 0, 0);
    const auto& atlas = *s.atlas;
    std::vector<std::pair<double, double>> spectrum, labels;
    for (std::size_t i = 0; i < atlas.points().size(); ++i) {
        const auto& p = atlas.points()[i];
        if (!atlas.in_annulus(p)) continue;
        spectrum.emplace_back(p.E1, p.E2);
        const auto l = atlas.label(p);
        labels.emplace_back(static_cast<double>(l[0]), static_cast<double>(l[1]));
    }
    const auto l0 = lattice::l0_line(atlas);
    bool l0_is_n0 = !l0.empty();
    std::size_t n0 = 0;
    for (const auto& e : s.table.eigenvalues)
        if (e.n == 0 && atlas.in_annulus({e.E1, e.E2})) ++n0;
    for (std::size_t i : l0)
        if (s.table.eigenvalues[i].n != 0) l0_is_n0 = false;
    l0_is_n0 = l0_is_n0 && l0.size() == n0;
    const auto& mu = atlas.monodromy();
    const bool ok = lattice::is_unipotent_nontrivial(mu.matrix) && l0_is_n0;
    const json summary = {{"h", h},
                          {"monodromy", lattice::to_json(mu)},
                          {"trace", lattice::trace(mu.matrix)},
                          {"det", lattice::determinant(mu.matrix)},
                          {"charts", atlas.charts().size()},
                          {"L0_points", l0.size()},
                          {"L0_is_n0_line", l0_is_n0},
                          {"pass", ok}};
    ctx.emit(path_in(o.out_dir, "unwinding_spectrum.dat"), plot_text(spectrum), summary);
    ctx.emit(path_in(o.out_dir, "unwinding_labels.dat"), plot_text(labels), summary);
    ctx.out << "unwinding: h=" << num(h, 6) << " monodromy=" << lattice::to_json(mu).dump()
            << " trace=" << lattice::trace(mu.matrix) << " det=" << lattice::determinant(mu.matrix)
            << " L0=n0:" << (l0_is_n0 ? "yes" : "no") << " " << pass_fail(ok) << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Joint spectrum, semiclassical gap laws and monodromy of the Champagne bottle", "champagne"};
    app.set_version_flag("--version", std::string(CHAMPAGNE_VERSION));
    // "-h" stays free for the semiclassical parameter; help is long-form only.
    app.set_help_flag("--help", "print this help and exit");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
    app.add_option("--config", "flat key=value file; command-line flags take precedence");

    Context ctx{out, err, "", json::object()};
    std::function<int()> action;

    // spectrum ---------------------------------------------------------------------------
    struct {
        double h = 1e-2, e_min = -0.24, e_max = 0.3, r_max = 0, k_delta = 0.1;
        int n_min = -5, n_max = 5, grid_points = 0;
        bool richardson = false;
        unsigned workers = 0;
        std::string out;
    } sp;
    auto* spectrum = app.add_subcommand("spectrum", "joint eigenvalues (E1, E2) as CSV");
    spectrum->add_option("--h", sp.h, "semiclassical parameter");
    spectrum->add_option("--n-min", sp.n_min);
    spectrum->add_option("--n-max", sp.n_max);
    spectrum->add_option("--e-min", sp.e_min);
    spectrum->add_option("--e-max", sp.e_max);
    spectrum->add_option("--grid-points", sp.grid_points, "0 resolves the grid from --k-delta");
    spectrum->add_option("--r-max", sp.r_max, "0 chooses the truncation radius automatically");
    spectrum->add_option("--k-delta", sp.k_delta, "wave number times grid spacing");
    spectrum->add_flag("--richardson", sp.richardson, "extrapolate from two grids");
    spectrum->add_option("--workers", sp.workers);
    spectrum->add_option("--out", sp.out, "output CSV (stdout if empty)");
    spectrum->callback([&] {
        action = [&] {
            const auto pot = radial::PotentialSpec::champagne_bottle();
            const auto cfg = discretization(pot, {sp.e_min, sp.e_max}, sp.h, sp.grid_points, sp.r_max,
                                            sp.k_delta, sp.richardson);
            const auto table = radial::joint_spectrum(sp.h, {sp.n_min, sp.n_max}, {sp.e_min, sp.e_max}, cfg, pot,
                                                      sp.workers);
            std::ostringstream csv;
            radial::write_spectrum_csv(table, csv);
            ctx.emit(sp.out, csv.str(),
                     {{"eigenvalues", table.eigenvalues.size()}, {"grid_points", cfg.grid_points},
                      {"r_max", cfg.r_max}, {"empty_lines", table.empty_lines}});
            return 0;
        };
    });

    // bs fit | predict -------------------------------------------------------------------
    auto* bs_cmd = app.add_subcommand("bs", "singular Bohr-Sommerfeld model");
    bs_cmd->require_subcommand(1);
    struct {
        std::string spectrum, out;
        double h = 1e-3, x_min = -8, x_max = 8, fix_B = kNaN;
        int n_min = -2, n_max = 2;
    } fit;
    auto* bs_fit = bs_cmd->add_subcommand("fit", "calibrate B, C and the offset on a computed spectrum");
    bs_fit->add_option("--spectrum", fit.spectrum, "CSV from the spectrum command; computed if empty");
    bs_fit->add_option("--h", fit.h, "used when no spectrum file is given");
    bs_fit->add_option("--n-min", fit.n_min);
    bs_fit->add_option("--n-max", fit.n_max);
    bs_fit->add_option("--x-min", fit.x_min);
    bs_fit->add_option("--x-max", fit.x_max);
    bs_fit->add_option("--fix-B", fit.fix_B, "keep B fixed at this value");
    bs_fit->add_option("--out", fit.out, "model JSON (stdout if empty)");
    bs_fit->callback([&] {
        action = [&] {
            radial::SpectrumTable table;
            if (!fit.spectrum.empty()) {
                std::ifstream f(fit.spectrum);
                if (!f) throw ConfigError("cannot read spectrum file " + fit.spectrum);
                table = radial::read_spectrum_csv(f);
            } else {
                const auto pot = radial::PotentialSpec::champagne_bottle();
                const std::pair<double, double> w{kSqrt2 * fit.h * (fit.x_min - 1), kSqrt2 * fit.h * (fit.x_max + 1)};
                table = radial::joint_spectrum(fit.h, {fit.n_min, fit.n_max}, w,
                                               radial::resolved_config(pot, w, fit.h), pot);
            }
            std::vector<int> n_set;
            for (int n = fit.n_min; n <= fit.n_max; ++n) n_set.push_back(n);
            std::optional<double> fixed;
            if (!std::isnan(fit.fix_B)) fixed = fit.fix_B;
            const auto model = bs::fit_model(table, n_set, {fit.x_min, fit.x_max}, fixed);
            if (model.warning) err << "warning: fit residual " << num(model.residual, 4) << " above threshold\n";
            ctx.emit(fit.out, bs::to_json(model).dump(2) + "\n");
            return 0;
        };
    });
    struct {
        std::string model, out;
        double h = 1e-3, B = kNaN, x_min = -10, x_max = 10;
        int n = 0;
    } pred;
    auto* bs_predict = bs_cmd->add_subcommand("predict", "solve the quantization condition on one line");
    bs_predict->add_option("--model", pred.model, "model JSON; the reference model if empty");
    bs_predict->add_option("--h", pred.h);
    bs_predict->add_option("--B", pred.B, "B of the reference model (default (5/2) ln 2)");
    bs_predict->add_option("--n", pred.n);
    bs_predict->add_option("--x-min", pred.x_min);
    bs_predict->add_option("--x-max", pred.x_max);
    bs_predict->add_option("--out", pred.out);
    bs_predict->callback([&] {
        action = [&] {
            bs::QuantizationModel model = general_model(pred.h, pred.B);
            if (!pred.model.empty()) {
                std::ifstream f(pred.model);
                if (!f) throw ConfigError("cannot read model file " + pred.model);
                json j;
                try {
                    f >> j;
                } catch (const json::exception& e) {
                    throw ConfigError("model file is not valid JSON: " + std::string(e.what()));
                }
                model = bs::model_from_json(j);
            }
            std::ostringstream csv;
            csv << "n,k,x,E1\n";
            for (const auto& r : bs::predict_line(pred.n, pred.h, model, {pred.x_min, pred.x_max}))
                csv << pred.n << ',' << r.k << ',' << num(r.x) << ',' << num(kSqrt2 * pred.h * r.x) << '\n';
            ctx.emit(pred.out, csv.str());
            return 0;
        };
    });

    // gaps -------------------------------------------------------------------------------
    struct {
        double h = 1e-3, x_min = -10, x_max = 10, B = kNaN, k_delta = 0;
        int n = 0;
        bool no_richardson = false;
        std::string out, plot;
    } gp;
    auto* gaps_cmd = app.add_subcommand("gaps", "measured versus predicted gaps on one line");
    gaps_cmd->add_option("--h", gp.h);
    gaps_cmd->add_option("--n", gp.n);
    gaps_cmd->add_option("--x-min", gp.x_min);
    gaps_cmd->add_option("--x-max", gp.x_max);
    gaps_cmd->add_option("--B", gp.B, "B of the general variant (default (5/2) ln 2)");
    gaps_cmd->add_option("--k-delta", gp.k_delta, "0 picks the gap-measurement resolution for h");
    gaps_cmd->add_flag("--no-richardson", gp.no_richardson);
    gaps_cmd->add_option("--out", gp.out, "gaps CSV (stdout if empty)");
    gaps_cmd->add_option("--plot", gp.plot, "prefix for two-column plot files");
    gaps_cmd->callback([&] {
        action = [&] {
            const auto model = general_model(gp.h, gp.B);
            const auto table = gaps::line_spectrum(gp.h, gp.n, {gp.x_min - 1, gp.x_max + 1}, gp.k_delta,
                                                   !gp.no_richardson, 0);
            std::string warning;
            const auto records = gaps::measure_gaps(table, gp.n, {gp.x_min, gp.x_max}, model, &warning);
            if (!warning.empty()) err << "warning: " << warning << "\n";
            const auto score = gaps::score_variants(records, model);
            const json summary = {{"max_rel_err_general", score.max_rel_general},
                                  {"max_rel_err_champagne", score.max_rel_champagne},
                                  {"winner", bs::to_string(score.winner)},
                                  {"winner_ln2_coefficient", score.ln2_coefficient}};
            std::ostringstream csv;
            gaps::write_gaps_csv(records, csv);
            ctx.emit(gp.out, csv.str(), summary);
            if (!gp.plot.empty()) {
                std::vector<std::pair<double, double>> m, g, c;
                for (const auto& r : records) {
                    m.emplace_back(r.x_mid, r.gap_measured);
                    g.emplace_back(r.x_mid, r.gap_pred_general);
                    c.emplace_back(r.x_mid, r.gap_pred_champagne);
                }
                ctx.emit(gp.plot + "_measured.dat", plot_text(m));
                ctx.emit(gp.plot + "_general.dat", plot_text(g));
                ctx.emit(gp.plot + "_champagne.dat", plot_text(c));
            }
            err << "# winner " << bs::to_string(score.winner) << " max rel err general "
                << num(score.max_rel_general, 6) << " champagne " << num(score.max_rel_champagne, 6) << "\n";
            return 0;
        };
    });

    // smallest-gap -----------------------------------------------------------------------
    struct {
        std::vector<double> h_list{1e-2, 1e-3, 1e-4};
        double x_half_width = 4, B = kNaN;
        std::string out;
    } sg;
    auto* smallest = app.add_subcommand("smallest-gap", "smallest n = 0 gap against |ln h|");
    smallest->add_option("--h-list", sg.h_list)->delimiter(',');
    smallest->add_option("--x-half-width", sg.x_half_width);
    smallest->add_option("--B", sg.B);
    smallest->add_option("--out", sg.out);
    smallest->callback([&] {
        action = [&] {
            gaps::ScanOptions opt;
            opt.x_half_width = sg.x_half_width;
            const auto scan = gaps::smallest_gap_scan(sg.h_list, general_model(sg.h_list.front(), sg.B), opt);
            std::ostringstream csv;
            csv << "h,lnh_abs,gap_min_measured,x_at_min,gap_min_general,gap_min_champagne\n";
            for (const auto& r : scan.rows)
                csv << num(r.h) << ',' << num(r.abs_ln_h) << ',' << num(r.gap_min_measured) << ','
                    << num(r.x_at_min) << ',' << num(r.gap_min_general) << ',' << num(r.gap_min_champagne) << '\n';
            const json summary = {{"slope", scan.inverse_gap_vs_log.slope},
                                  {"intercept", scan.inverse_gap_vs_log.intercept},
                                  {"r2", scan.inverse_gap_vs_log.r2}};
            ctx.emit(sg.out, csv.str(), summary);
            err << "# 1/gap_min = " << num(scan.inverse_gap_vs_log.slope, 6) << " |ln h| + "
                << num(scan.inverse_gap_vs_log.intercept, 6) << "  (R2 " << num(scan.inverse_gap_vs_log.r2, 6) << ")\n";
            return 0;
        };
    });

    // weyl -------------------------------------------------------------------------------
    struct {
        std::vector<double> h_list{1e-2, 1e-3, 1e-4};
        double x_min = -10, x_max = 10, n_min = -5.5, n_max = 5.5;
        std::string out;
    } wy;
    auto* weyl = app.add_subcommand("weyl", "eigenvalue counts in a fixed (x, n) window");
    weyl->add_option("--h-list", wy.h_list)->delimiter(',');
    weyl->add_option("--x-min", wy.x_min);
    weyl->add_option("--x-max", wy.x_max);
    weyl->add_option("--n-min", wy.n_min);
    weyl->add_option("--n-max", wy.n_max);
    weyl->add_option("--out", wy.out);
    weyl->callback([&] {
        action = [&] {
            const auto K = xn_window(wy.x_min, wy.x_max, wy.n_min, wy.n_max);
            std::vector<gaps::WeylResult> rows;
            for (double h : wy.h_list) rows.push_back(gaps::weyl_count(gaps::spectrum_for_window(h, K), K));
            std::ostringstream csv;
            gaps::write_weyl_csv(rows, csv);
            ctx.emit(wy.out, csv.str());
            return 0;
        };
    });

    // dh-volume --------------------------------------------------------------------------
    struct {
        double h = 1e-3, k1_min = -10, k1_max = 10, k2_min = -10, k2_max = 10;
        gaps::DHOptions opt;
        std::string out;
    } dh;
    auto* dh_cmd = app.add_subcommand("dh-volume", "Liouville volume of {(H, I) in hK} by Monte Carlo");
    dh_cmd->add_option("--h", dh.h);
    dh_cmd->add_option("--k1-min", dh.k1_min, "window in E1 / h");
    dh_cmd->add_option("--k1-max", dh.k1_max);
    dh_cmd->add_option("--k2-min", dh.k2_min, "window in E2 / h");
    dh_cmd->add_option("--k2-max", dh.k2_max);
    dh_cmd->add_option("--samples", dh.opt.samples);
    dh_cmd->add_option("--shards", dh.opt.shards);
    dh_cmd->add_option("--seed", dh.opt.seed);
    dh_cmd->add_option("--workers", dh.opt.workers);
    dh_cmd->add_option("--out", dh.out, "result JSON (stdout if empty)");
    dh_cmd->callback([&] {
        action = [&] {
            const auto K = gaps::Window::rectangle(dh.k1_min, dh.k1_max, dh.k2_min, dh.k2_max);
            const auto r = gaps::dh_volume(K, dh.h, dh.opt);
            const json j = {{"h", r.h},
                            {"mu_over_norm", r.mu_over_norm},
                            {"std_error", r.std_error},
                            {"asymptotic", r.asymptotic},
                            {"ratio", r.ratio()},
                            {"samples", r.samples}};
            ctx.emit(dh.out, j.dump(2) + "\n");
            return 0;
        };
    });

    // actions ----------------------------------------------------------------------------
    struct {
        double e_min = -0.2, e_max = 0.2, l_min = -0.2, l_max = 0.2;
        int e_steps = 9, l_steps = 9;
        std::string out;
    } ac;
    auto* actions = app.add_subcommand("actions", "classical actions, periods and rotation numbers on a grid");
    actions->add_option("--e-min", ac.e_min);
    actions->add_option("--e-max", ac.e_max);
    actions->add_option("--e-steps", ac.e_steps);
    actions->add_option("--l-min", ac.l_min);
    actions->add_option("--l-max", ac.l_max);
    actions->add_option("--l-steps", ac.l_steps);
    actions->add_option("--out", ac.out);
    actions->callback([&] {
        action = [&] {
            if (ac.e_steps < 1 || ac.l_steps < 1) throw ConfigError("actions: step counts must be positive");
            std::vector<classical::ActionSample> samples;
            for (int i = 0; i < ac.e_steps; ++i)
                for (int j = 0; j < ac.l_steps; ++j) {
                    const double E = ac.e_steps == 1 ? ac.e_min : ac.e_min + (ac.e_max - ac.e_min) * i / (ac.e_steps - 1);
                    const double L = ac.l_steps == 1 ? ac.l_min : ac.l_min + (ac.l_max - ac.l_min) * j / (ac.l_steps - 1);
                    if (E == 0 && L == 0) continue;  // the critical value itself
                    try {
                        samples.push_back(classical::sample(E, L));
                    } catch (const DomainError&) {
                        // outside the image of the momentum map
                    }
                }
            std::ostringstream csv;
            classical::write_actions_csv(samples, csv);
            ctx.emit(ac.out, csv.str());
            return 0;
        };
    });

    // monodromy (classical) --------------------------------------------------------------
    struct {
        double e0 = 0, l0 = 0, radius = 0.05;
        int vertices = 64;
        std::string out;
    } mo;
    auto* monodromy = app.add_subcommand("monodromy", "rotation-number winding and classical monodromy on a circle");
    monodromy->add_option("--e0", mo.e0);
    monodromy->add_option("--l0", mo.l0);
    monodromy->add_option("--radius", mo.radius);
    monodromy->add_option("--vertices", mo.vertices);
    monodromy->add_option("--out", mo.out);
    monodromy->callback([&] {
        action = [&] {
            const auto loop = classical::circle_loop(mo.e0, mo.l0, mo.radius, mo.vertices);
            const double w = classical::rotation_winding(loop);
            const auto m = classical::classical_monodromy(loop);
            const json j = {{"winding", w},
                            {"winding_over_2pi", w / (2 * kPi)},
                            {"matrix", {{m[0][0], m[0][1]}, {m[1][0], m[1][1]}}},
                            {"unipotent", lattice::is_unipotent_nontrivial(m)}};
            ctx.emit(mo.out, j.dump(2) + "\n");
            return 0;
        };
    });

    // unwind (quantum) -------------------------------------------------------------------
    struct {
        double h = 5e-3, rho_in = 0, rho_out = 0;
        std::string out, labels;
    } uw;
    auto* unwind = app.add_subcommand("unwind", "lattice charts around the critical value and quantum monodromy");
    unwind->add_option("--h", uw.h);
    unwind->add_option("--rho-in", uw.rho_in, "inner radius of the annulus (0 = 24 h)");
    unwind->add_option("--rho-out", uw.rho_out, "outer radius (0 = 36 h)");
    unwind->add_option("--out", uw.out, "summary JSON (stdout if empty)");
    unwind->add_option("--labels", uw.labels, "write E1 E2 l1 l2 for every annulus eigenvalue");
    unwind->callback([&] {
        action = [&] {
            const auto s = build_atlas(uw.h, uw.rho_in, uw.rho_out);
            const auto& atlas = *s.atlas;
            double residual = 0;
            for (const auto& c : atlas.charts()) residual = std::max(residual, c.residual);
            const auto& mu = atlas.monodromy();
            json l0 = json::array();
            for (std::size_t i : lattice::l0_line(atlas))
                l0.push_back({{"n", s.table.eigenvalues[i].n}, {"k", s.table.eigenvalues[i].k}});
            const json j = {{"h", uw.h},
                            {"rho_in", atlas.config().rho_in},
                            {"rho_out", atlas.config().rho_out},
                            {"chart_radius", atlas.config().chart_radius},
                            {"charts", atlas.charts().size()},
                            {"max_chart_residual", residual},
                            {"monodromy", lattice::to_json(mu)},
                            {"unipotent", lattice::is_unipotent_nontrivial(mu.matrix)},
                            {"L0", l0}};
            ctx.emit(uw.out, j.dump(2) + "\n");
            if (!uw.labels.empty()) {
                std::ostringstream d;
                for (const auto& p : atlas.points()) {
                    if (!atlas.in_annulus(p)) continue;
                    const auto l = atlas.label(p);
                    d << num(p.E1) << ' ' << num(p.E2) << ' ' << l[0] << ' ' << l[1] << '\n';
                }
                ctx.emit(uw.labels, d.str());
            }
            return 0;
        };
    });

    // count ------------------------------------------------------------------------------
    struct {
        double h = 5e-3, rho_in = 0, rho_out = 0;
        int polygons = 10;
        std::uint64_t seed = 1;
        std::string out;
    } ct;
    auto* count = app.add_subcommand("count", "eigenvalue counts against Pick's formula on random enclosing polygons");
    count->add_option("--h", ct.h);
    count->add_option("--rho-in", ct.rho_in);
    count->add_option("--rho-out", ct.rho_out);
    count->add_option("--polygons", ct.polygons);
    count->add_option("--seed", ct.seed);
    count->add_option("--out", ct.out);
    count->callback([&] {
        action = [&] {
            const auto s = build_atlas(ct.h, ct.rho_in, ct.rho_out);
            std::mt19937_64 rng(ct.seed);
            std::ostringstream csv;
            csv << "polygon,vertices,n_spec,n_pick,inner,equal\n";
            int equal = 0;
            for (int i = 0; i < ct.polygons; ++i) {
                const auto poly = lattice::random_enclosing_polygon(*s.atlas, rng);
                const auto c = lattice::count_in_polygon(poly, *s.atlas);
                equal += c.spec == c.pick;
                csv << i << ',' << poly.vertices.size() << ',' << c.spec << ',' << c.pick << ',' << c.inner << ','
                    << (c.spec == c.pick ? "true" : "false") << '\n';
            }
            ctx.emit(ct.out, csv.str(), {{"polygons", ct.polygons}, {"equal", equal}});
            return equal == ct.polygons ? 0 : 1;
        };
    });

    // special ----------------------------------------------------------------------------
    struct {
        std::string op = "C";
        double eps = 0, x = 0, re = 1, im = 0;
        int n = 0;
    } sf;
    auto* special_cmd = app.add_subcommand("special", "special functions, printed to 15 significant digits");
    special_cmd->add_option("--op", sf.op, "C | psi | psi-prime | loggamma | digamma | mellin-check")
        ->check(CLI::IsMember({"C", "psi", "psi-prime", "loggamma", "digamma", "mellin-check"}));
    special_cmd->add_option("--eps", sf.eps);
    special_cmd->add_option("--n", sf.n);
    special_cmd->add_option("--x", sf.x);
    special_cmd->add_option("--re", sf.re);
    special_cmd->add_option("--im", sf.im);
    special_cmd->callback([&] {
        action = [&] {
            auto p = [](double v) {
                char buf[48];
                std::snprintf(buf, sizeof buf, "%#.15g", v);
                return std::string(buf);
            };
            if (sf.op == "C") {
                const auto c = special::fourier_constant({sf.eps, sf.n});
                out << "re " << p(c.real()) << "\nim " << p(c.imag()) << "\nmodulus " << p(std::abs(c)) << "\n";
            } else if (sf.op == "psi") {
                out << p(special::psi_n(sf.x, sf.n)) << "\n";
            } else if (sf.op == "psi-prime") {
                out << p(special::psi_n_prime(sf.x, sf.n)) << "\n";
            } else if (sf.op == "loggamma" || sf.op == "digamma") {
                const special::Complex z{sf.re, sf.im};
                const auto v = sf.op == "loggamma" ? special::log_gamma(z) : special::digamma(z);
                out << "re " << p(v.real()) << "\nim " << p(v.imag()) << "\n";
            } else {
                out << "residual " << p(special::verify_mellin_hankel(sf.eps, sf.n)) << "\n";
            }
            return 0;
        };
    });

    // reproduce --------------------------------------------------------------------------
    ReproduceOptions ro;
    auto* reproduce = app.add_subcommand("reproduce", "regenerate figure data with a pass/fail summary");
    reproduce->require_subcommand(1);
    auto add_common = [&](CLI::App* c, bool with_list) {
        c->add_option("--h", ro.h);
        if (with_list) c->add_option("--h-list", ro.h_list)->delimiter(',');
        c->add_option("--x-max", ro.x_max, "half-width of the x window");
        c->add_option("--B", ro.B, "B of the general variant (default (5/2) ln 2)");
        c->add_option("--out-dir", ro.out_dir);
    };
    auto* r_cusp = reproduce->add_subcommand("cusp", "n = 0 gaps against x at h = 1e-4");
    add_common(r_cusp, false);
    r_cusp->callback([&] { action = [&] { return reproduce_cusp(ctx, ro, "cusp", 1e-4); }; });
    auto* r_cusp_z = reproduce->add_subcommand("cusp-z", "the same comparison at h = 1e-5");
    add_common(r_cusp_z, false);
    r_cusp_z->callback([&] { action = [&] { return reproduce_cusp(ctx, ro, "cusp_z", 1e-5); }; });
    auto* r_formule = reproduce->add_subcommand("gaps-formule", "smallest gap against |ln h|");
    add_common(r_formule, true);
    r_formule->callback([&] { action = [&] { return reproduce_gaps_formule(ctx, ro); }; });
    auto* r_weyl = reproduce->add_subcommand("weyl", "counting function against |ln h|");
    add_common(r_weyl, true);
    r_weyl->callback([&] { action = [&] { return reproduce_weyl(ctx, ro); }; });
    auto* r_unwinding = reproduce->add_subcommand("unwinding", "unwound lattice labels and quantum monodromy");
    add_common(r_unwinding, false);
    r_unwinding->callback([&] { action = [&] { return reproduce_unwinding(ctx, ro); }; });

    try {
        // Config-file entries are inserted right after the command path so that later
        // command-line flags override them.
        std::vector<std::string> args;
        std::string config_path;
        for (std::size_t i = 0; i < args_in.size(); ++i) {
            if (args_in[i] == "--config" && i + 1 < args_in.size()) {
                config_path = args_in[++i];
            } else if (args_in[i].rfind("--config=", 0) == 0) {
                config_path = args_in[i].substr(9);
            } else {
                args.push_back(args_in[i]);
            }
        }
        if (!config_path.empty()) {
            std::size_t pos = 0;
            while (pos < args.size() && pos < 2 && !args[pos].empty() && args[pos][0] != '-') ++pos;
            const auto tokens = config_tokens(config_path);
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), tokens.begin(), tokens.end());
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << CHAMPAGNE_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    // Resolve the command path and echo its configuration.
    const CLI::App* leaf = &app;
    std::string path;
    while (!leaf->get_subcommands().empty()) {
        leaf = leaf->get_subcommands().front();
        path += (path.empty() ? "" : " ") + leaf->get_name();
    }
    ctx.command = path;
    ctx.config = resolved_options(*leaf);
    err << "# champagne " << CHAMPAGNE_VERSION << " " << path << "\n";
    for (const auto& [k, v] : ctx.config.items()) err << "# " << k << " = " << v.get<std::string>() << "\n";

    try {
        return action ? action() : 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace champagne::cli
