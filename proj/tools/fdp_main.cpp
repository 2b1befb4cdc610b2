// fdp: lognormal-mixture forward-density toolkit CLI.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fdp/black.hpp"
#include "fdp/calibration.hpp"
#include "fdp/dynamics.hpp"
#include "fdp/io.hpp"
#include "fdp/simulation.hpp"
#include "fdp/tracking.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
};

struct Workspace {
    fdp::RunConfig config;
    fdp::IngestResult ingest;
    json manifest;
    fs::path out;

    void note(const std::string& key, const json& value) { manifest[key] = value; }

    void finish() const {
        std::ofstream m(out / "run_manifest.json");
        m << manifest.dump(2) << "\n";
    }
};

Workspace open_workspace(const CommonArgs& args, const std::vector<std::string>& argv_tail) {
    Workspace ws;
    ws.config = fdp::RunConfig::load(args.config_path);
    ws.ingest = fdp::ingest_quotes(args.data_path, ws.config);
    ws.out = args.out_dir;
    fs::create_directories(ws.out);
    ws.manifest["schema_version"] = 1;
    ws.manifest["command"] = argv_tail;
    ws.manifest["config"] = args.config_path;
    ws.manifest["data"] = args.data_path;
    ws.manifest["warnings"] = ws.ingest.warnings;
    ws.manifest["seed"] = ws.config.seed;
    if (ws.ingest.snapshots.empty()) throw std::runtime_error("no usable quote dates");
    return ws;
}

std::vector<double> mixture_grid(const fdp::RunConfig& cfg) {
    std::vector<double> grid{cfg.x1};
    grid.insert(grid.end(), cfg.strikes.begin(), cfg.strikes.end());
    grid.push_back(cfg.x_top);
    return grid;
}

fdp::CalibrationResult calibrate_first_date(const Workspace& ws) {
    const auto snap = ws.ingest.snapshots.front().with_strikes(ws.config.strikes);
    auto result = fdp::calibrate_mixture(snap, mixture_grid(ws.config), ws.config.sigma,
                                         ws.config.model_maturity);
    if (result.out_of_range) {
        json offending = result.negative_components;
        throw fdp::InfeasiblePricesError("calibration out of range; negative components " +
                                         offending.dump());
    }
    return result;
}

void write_csv(const fs::path& file, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(file);
    out << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << fdp::format_full(row[i]);
        out << "\n";
    }
}

std::vector<double> parse_list(const std::string& csv_list) {
    std::vector<double> out;
    std::stringstream ss(csv_list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

double clamp_time(const Workspace& ws, double t, Workspace& mutable_ws) {
    const double limit = ws.config.model_maturity - 1e-6;
    if (t > limit) {
        mutable_ws.manifest["warnings"].push_back("time " + fdp::format_full(t) +
                                                  " clamped to maturity - 1e-6");
        return limit;
    }
    return t;
}

int run_calibrate(const CommonArgs& args, const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto snap = ws.ingest.snapshots.front().with_strikes(ws.config.strikes);
    const auto result = calibrate_first_date(ws);
    const auto bounds = fdp::grid_bounds(snap);
    const double sigma_star =
        fdp::max_uniform_sigma(snap, mixture_grid(ws.config), ws.config.model_maturity);

    std::ofstream spec_file(ws.out / "spec.json");
    spec_file << fdp::spec_to_json(result.spec, &result) << "\n";
    std::ofstream snap_file(ws.out / "snapshots.json");
    snap_file << fdp::snapshots_to_json(ws.ingest.snapshots) << "\n";

    ws.note("diagnostics", {{"x1_max", bounds.first},
                            {"x_top_min", bounds.second},
                            {"max_uniform_sigma", sigma_star},
                            {"condition_number", result.condition_number},
                            {"date", snap.date}});
    ws.note("strike_universe", ws.ingest.all_strikes);
    const auto arb = fdp::check_static_no_arbitrage(snap);
    json conds = json::array();
    for (const auto& c : arb.conditions)
        conds.push_back({{"label", c.label}, {"slack", c.slack}, {"pass", c.pass}});
    ws.note("no_arbitrage", {{"pass", arb.pass}, {"conditions", conds}});
    ws.finish();
    return 0;
}

int run_range(const CommonArgs& args, const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto grid = mixture_grid(ws.config);
    const auto A = fdp::build_extended_system(grid, ws.config.sigma, ws.config.strikes,
                                              ws.config.model_maturity);
    const auto range = fdp::price_range_extremes(A);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < range.extremes.size(); ++k) {
        std::vector<double> row{static_cast<double>(k + 1)};
        for (Eigen::Index i = 0; i < range.extremes[k].size(); ++i)
            row.push_back(range.extremes[k](i));
        rows.push_back(row);
    }
    std::string header = "vertex,g0";
    for (std::size_t j = 1; j <= ws.config.strikes.size(); ++j)
        header += ",g" + std::to_string(j);
    write_csv(ws.out / "price_range.csv", header, rows);
    ws.finish();
    return 0;
}

int run_simulate(const CommonArgs& args, std::size_t emit_paths,
                 const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto spec = calibrate_first_date(ws).spec;
    const double life_days = static_cast<double>(
        fdp::days_between(ws.ingest.snapshots.front().date, ws.config.maturity_date));
    const double dt = ws.config.sim_dt > 0.0 ? ws.config.sim_dt
                                             : ws.config.model_maturity / life_days;
    ws.note("simulation", {{"paths", ws.config.sim_paths},
                           {"steps", ws.config.sim_steps},
                           {"dt", dt},
                           {"seed", ws.config.seed}});

    const auto drivers =
        fdp::simulate_driver(ws.config.sim_paths, ws.config.sim_steps, dt, ws.config.seed);
    const auto paths = fdp::simulate_prices(spec, drivers, dt);
    const auto stats = fdp::stylized_correlations(spec, paths);

    for (std::size_t i = 0; i < std::min(emit_paths, paths.size()); ++i) {
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < paths[i].times.size(); ++k) {
            std::vector<double> row{paths[i].times[k]};
            for (Eigen::Index c = 0; c < paths[i].prices[k].size(); ++c)
                row.push_back(paths[i].prices[k](c));
            for (int c = 0; c < 3; ++c) row.push_back(paths[i].driver[k](c));
            rows.push_back(row);
        }
        write_csv(ws.out / ("path_" + std::to_string(i) + ".csv"),
                  "t,g0,g1,g2,w1,w2,b", rows);
    }

    {
        std::vector<std::vector<double>> rows;
        const std::size_t kept = stats.correlations.front().size();
        for (std::size_t p = 0; p < kept; ++p) {
            std::vector<double> row{static_cast<double>(p)};
            for (std::size_t s = 0; s < stats.correlations.size(); ++s)
                row.push_back(stats.correlations[s][p]);
            rows.push_back(row);
        }
        std::string header = "path";
        for (double k : stats.strikes) header += ",corr_" + std::to_string(static_cast<int>(k));
        write_csv(ws.out / "correlations.csv", header, rows);
    }
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t b = 0; b < stats.histogram_counts.front().size(); ++b) {
            std::vector<double> row{stats.histogram_edges[b], stats.histogram_edges[b + 1]};
            for (std::size_t s = 0; s < stats.histogram_counts.size(); ++s)
                row.push_back(static_cast<double>(stats.histogram_counts[s][b]));
            rows.push_back(row);
        }
        std::string header = "lo,hi";
        for (double k : stats.strikes) header += ",count_" + std::to_string(static_cast<int>(k));
        write_csv(ws.out / "correlation_histogram.csv", header, rows);
    }
    ws.note("stylized", {{"means", stats.means}, {"dropped_paths", stats.dropped_paths}});
    ws.finish();
    return 0;
}

int run_track(const CommonArgs& args, const std::string& method, std::uint64_t seed_override,
              bool have_seed, const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto spec = calibrate_first_date(ws).spec;
    const auto series = fdp::series_from_snapshots(ws.ingest.snapshots, ws.config);

    fdp::TrackResult track;
    json extra;
    if (method == "linear") {
        track = fdp::linearized_track(spec, series);
    } else {
        fdp::FilterSettings settings;
        settings.particles = ws.config.filter_particles;
        settings.seed = have_seed ? seed_override : ws.config.seed;
        settings.sigma1_policy = ws.config.sigma1_policy == "simulated-increments"
                                     ? fdp::CovariancePolicy::kSimulatedIncrements
                                     : fdp::CovariancePolicy::kObservedIncrements;
        const auto run = fdp::apf_run(spec, series, settings);
        track = run.track;
        extra["particles"] = settings.particles;
        extra["seed"] = settings.seed;
        std::vector<double> s1(run.sigma1.data(), run.sigma1.data() + 9);
        extra["sigma1"] = s1;
    }

    std::vector<std::vector<double>> rows;
    for (const auto& step : track.steps) {
        std::vector<double> row{step.t,
                                step.estimate(0),
                                step.estimate(1),
                                step.estimate(2),
                                step.spread(0),
                                step.spread(1),
                                step.spread(2)};
        for (Eigen::Index c = 0; c < step.prices.size(); ++c) row.push_back(step.prices(c));
        row.push_back(step.condition_number);
        row.push_back(step.ess);
        row.push_back(step.flagged_singular ? 1.0 : 0.0);
        rows.push_back(row);
    }
    std::string header = "t,w1,w2,b,sd_w1,sd_w2,sd_b";
    for (std::size_t j = 0; j <= ws.config.strikes.size(); ++j)
        header += ",g" + std::to_string(j);
    header += ",condition,ess,flagged";
    write_csv(ws.out / "track.csv", header, rows);

    extra["method"] = method;
    extra["mean_abs_error_vs_forward"] = track.mean_abs_error_vs_forward;
    extra["rmse_vs_forward"] = track.rmse_vs_forward;
    ws.note("track", extra);
    ws.finish();
    return 0;
}

int run_smile(const CommonArgs& args, const std::string& days_list, const std::string& grid_expr,
              const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto spec = calibrate_first_date(ws).spec;
    const auto series = fdp::series_from_snapshots(ws.ingest.snapshots, ws.config);

    fdp::FilterSettings settings;
    settings.particles = ws.config.filter_particles;
    settings.seed = ws.config.seed;
    const auto run = fdp::apf_run(spec, series, settings);

    const auto grid = parse_list(grid_expr);
    const double life_days = static_cast<double>(
        fdp::days_between(ws.ingest.snapshots.front().date, ws.config.maturity_date));
    const double annualize = std::sqrt(ws.config.model_maturity * 365.0 / life_days);

    json produced = json::array();
    for (double day : parse_list(days_list)) {
        // nearest observation to the requested calendar-day offset
        std::size_t idx = 0;
        double best = 1e18;
        for (std::size_t k = 0; k < ws.ingest.snapshots.size(); ++k) {
            const double offset = static_cast<double>(fdp::days_between(
                ws.ingest.snapshots.front().date, ws.ingest.snapshots[k].date));
            if (std::abs(offset - day) < best) {
                best = std::abs(offset - day);
                idx = k;
            }
        }
        const auto smile = fdp::filtered_smile(spec, run.posterior[idx], grid);
        std::vector<std::vector<double>> rows;
        for (const auto& pt : smile)
            rows.push_back({pt.strike, pt.vol, pt.vol * annualize, pt.inverted ? 1.0 : 0.0});
        const std::string name = "smile_day" + std::to_string(static_cast<int>(day)) + ".csv";
        write_csv(ws.out / name, "strike,vol,vol_annualized,inverted", rows);
        produced.push_back({{"day", day}, {"observation", idx}, {"file", name}});
    }
    ws.note("smiles", produced);
    ws.finish();
    return 0;
}

int run_density(const CommonArgs& args, const std::string& times_list, const std::string& state_expr,
                const std::string& grid_expr, const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto spec = calibrate_first_date(ws).spec;
    const auto state_v = parse_list(state_expr);
    if (state_v.size() != 3) throw std::invalid_argument("--state expects w1,w2,b");
    const auto grid = parse_list(grid_expr);

    int index = 0;
    for (double t_raw : parse_list(times_list)) {
        const double t = clamp_time(ws, t_raw, ws);
        const fdp::DriverState state{state_v[0], state_v[1], state_v[2], t};
        std::vector<std::vector<double>> rows;
        for (double x : grid) rows.push_back({x, fdp::forward_density(spec, state, x)});
        write_csv(ws.out / ("density_" + std::to_string(index++) + ".csv"), "x,f", rows);
    }
    ws.finish();
    return 0;
}

int run_detscan(const CommonArgs& args, double t_raw, double b, double lo, double hi,
                std::size_t n, const std::vector<std::string>& argv) {
    auto ws = open_workspace(args, argv);
    const auto spec = calibrate_first_date(ws).spec;
    const double t = clamp_time(ws, t_raw, ws);
    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i)
        axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto scan = fdp::jacobian_det_scan(spec, t, b, axis, axis);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            rows.push_back({axis[i], axis[j],
                            scan.det(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    write_csv(ws.out / "detscan.csv", "w1,w2,det", rows);
    ws.note("detscan",
            {{"t", t}, {"b", b}, {"sign_change_cells", scan.sign_changes.size()}});
    ws.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lognormal-mixture forward density toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    std::vector<std::string> argv_copy(argv, argv + argc);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "run configuration JSON")->required();
        cmd->add_option("--data", common.data_path, "quotes CSV")->required();
        cmd->add_option("--out", common.out_dir, "output directory")->required();
    };

    auto* calibrate = app.add_subcommand("calibrate", "calibrate the mixture to the first date");
    add_common(calibrate);

    auto* range = app.add_subcommand("range", "emit the reachable price-range vertices");
    add_common(range);

    auto* simulate = app.add_subcommand("simulate", "simulate driver paths and stylized stats");
    add_common(simulate);
    std::size_t emit_paths = 5;
    simulate->add_option("--emit-paths", emit_paths, "number of price paths to write");

    auto* track = app.add_subcommand("track", "recover the driver from the price series");
    add_common(track);
    std::string method = "filter";
    track->add_option("--method", method, "linear or filter")
        ->check(CLI::IsMember({"linear", "filter"}));
    std::uint64_t seed_override = 0;
    auto* seed_opt = track->add_option("--seed", seed_override, "filter seed override");

    auto* smile = app.add_subcommand("smile", "filtered volatility smiles at given days");
    add_common(smile);
    std::string days_list = "0";
    smile->add_option("--times", days_list, "comma list of day offsets");
    std::string smile_grid = "1100,1125,1150,1175,1200,1225,1250,1275,1300";
    smile->add_option("--grid", smile_grid, "comma list of strikes");

    auto* density = app.add_subcommand("density", "forward density on a grid");
    add_common(density);
    std::string times_list = "0";
    density->add_option("--times", times_list, "comma list of model times");
    std::string state_expr = "0,0,0";
    density->add_option("--state", state_expr, "driver state w1,w2,b");
    std::string density_grid;
    density->add_option("--grid", density_grid, "comma list of asset levels")->required();

    auto* detscan = app.add_subcommand("detscan", "Jacobian determinant field");
    add_common(detscan);
    double scan_t = 0.0, scan_b = 0.0, scan_lo = -2.0, scan_hi = 2.0;
    std::size_t scan_n = 41;
    detscan->add_option("--time", scan_t, "model time");
    detscan->add_option("--b", scan_b, "driver b coordinate");
    detscan->add_option("--lo", scan_lo, "grid lower bound");
    detscan->add_option("--hi", scan_hi, "grid upper bound");
    detscan->add_option("--n", scan_n, "grid points per axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (calibrate->parsed()) return run_calibrate(common, argv_copy);
        if (range->parsed()) return run_range(common, argv_copy);
        if (simulate->parsed()) return run_simulate(common, emit_paths, argv_copy);
        if (track->parsed())
            return run_track(common, method, seed_override, seed_opt->count() > 0, argv_copy);
        if (smile->parsed()) return run_smile(common, days_list, smile_grid, argv_copy);
        if (density->parsed())
            return run_density(common, times_list, state_expr, density_grid, argv_copy);
        if (detscan->parsed())
            return run_detscan(common, scan_t, scan_b, scan_lo, scan_hi, scan_n, argv_copy);
    } catch (const std::exception& e) {
        json err = {{"error", {{"type", typeid(e).name()}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 2;
}
