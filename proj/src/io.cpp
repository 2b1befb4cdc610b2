#include "fdp/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fdp/black.hpp"

namespace fdp {

using nlohmann::json;

namespace {

std::chrono::sys_days parse_date(const std::string& iso) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw std::invalid_argument("bad ISO date: " + iso);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) throw std::invalid_argument("bad ISO date: " + iso);
    return std::chrono::sys_days{ymd};
}

double parse_number(const std::string& field, std::size_t line) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw MalformedRowError(line, "bad number '" + field + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace

long days_between(const std::string& from, const std::string& to) {
    return (parse_date(to) - parse_date(from)).count();
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config " + file.string());
    json j = json::parse(in);

    RunConfig cfg;
    cfg.maturity_date = j.at("maturity_date").get<std::string>();
    cfg.rate = j.at("rate").get<double>();
    cfg.strikes = j.at("strikes").get<std::vector<double>>();
    cfg.x1 = j.at("x1").get<double>();
    cfg.x_top = j.at("x_top").get<double>();
    cfg.sigma = j.at("sigma").get<std::vector<double>>();
    if (j.contains("model_maturity")) cfg.model_maturity = j["model_maturity"].get<double>();
    if (j.contains("filter")) {
        const auto& f = j["filter"];
        if (f.contains("particles")) cfg.filter_particles = f["particles"].get<std::size_t>();
        if (f.contains("sigma1_policy")) cfg.sigma1_policy = f["sigma1_policy"].get<std::string>();
        if (f.contains("seed")) cfg.seed = f["seed"].get<std::uint64_t>();
    }
    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        if (s.contains("paths")) cfg.sim_paths = s["paths"].get<std::size_t>();
        if (s.contains("steps")) cfg.sim_steps = s["steps"].get<std::size_t>();
        if (s.contains("dt")) cfg.sim_dt = s["dt"].get<double>();
    }
    if (j.contains("volume_threshold")) cfg.volume_threshold = j["volume_threshold"].get<long>();
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (strikes.size() < 2) throw std::invalid_argument("config: need >= 2 strikes");
    if (!std::is_sorted(strikes.begin(), strikes.end()))
        throw std::invalid_argument("config: strikes must be increasing");
    if (sigma.size() != strikes.size() + 2)
        throw std::invalid_argument("config: sigma length must be n+2");
    if (!(x1 < strikes.front()) || !(x_top > strikes.back()))
        throw std::invalid_argument("config: need x1 < K_1 and x_top > K_n");
    if (!(model_maturity > 0.0)) throw std::invalid_argument("config: model_maturity <= 0");
    parse_date(maturity_date);
}

IngestResult ingest_quotes(const std::filesystem::path& csv, const RunConfig& config) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open quotes file " + csv.string());

    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw MalformedRowError(1, "empty file");
    if (line.ends_with('\r')) line.pop_back();
    if (line != "date,strike,type,close,volume")
        throw MalformedRowError(1, "expected header date,strike,type,close,volume");

    std::map<std::string, std::vector<QuoteRecord>> by_date;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.ends_with('\r')) line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 5) throw MalformedRowError(line_no, "expected 5 fields");
        QuoteRecord q;
        q.date = fields[0];
        parse_date(q.date);
        q.strike = parse_number(fields[1], line_no);
        if (fields[2] == "call")
            q.is_call = true;
        else if (fields[2] == "put")
            q.is_call = false;
        else
            throw MalformedRowError(line_no, "type must be 'call' or 'put'");
        q.close = parse_number(fields[3], line_no);
        q.volume = static_cast<long>(parse_number(fields[4], line_no));
        if (q.close < 0.0) throw MalformedRowError(line_no, "negative close");
        if (q.volume < 0) throw MalformedRowError(line_no, "negative volume");
        by_date[q.date].push_back(q);
    }

    IngestResult out;
    std::vector<double> strike_union;
    for (const auto& [date, quotes] : by_date) {
        const double tau = static_cast<double>(days_between(date, config.maturity_date)) / 365.0;
        if (tau <= 0.0) {
            out.warnings.push_back(date + ": at or past maturity, skipped");
            continue;
        }

        // pick the parity pair: strike with maximal combined put+call volume
        std::map<double, std::pair<const QuoteRecord*, const QuoteRecord*>> pairs;
        for (const auto& q : quotes) {
            auto& slot = pairs[q.strike];
            (q.is_call ? slot.first : slot.second) = &q;
        }
        const QuoteRecord* best_call = nullptr;
        const QuoteRecord* best_put = nullptr;
        long best_volume = -1;
        for (const auto& [strike, pair] : pairs) {
            if (!pair.first || !pair.second) continue;
            const long combined = pair.first->volume + pair.second->volume;
            if (combined > best_volume && combined > 0) {
                best_volume = combined;
                best_call = pair.first;
                best_put = pair.second;
            }
        }
        if (!best_call) {
            out.warnings.push_back(date + ": no usable put/call pair, skipped");
            continue;
        }

        MarketSnapshot snap;
        snap.date = date;
        snap.source = csv.filename().string();
        snap.tau = tau;
        snap.rate = config.rate;
        snap.forward = forward_from_parity(best_call->close, best_put->close, best_call->strike,
                                           {config.rate, tau});

        const double scale = std::exp(config.rate * tau);
        for (const auto& q : quotes) {
            if (!q.is_call) continue;
            if (q.volume < config.volume_threshold) {
                out.warnings.push_back(date + ": strike " + format_full(q.strike) + " volume " +
                                       std::to_string(q.volume) + " below threshold, excluded");
                continue;
            }
            snap.strikes.push_back(q.strike);
            snap.option_forwards.push_back(q.close * scale);
            if (std::find(strike_union.begin(), strike_union.end(), q.strike) ==
                strike_union.end())
                strike_union.push_back(q.strike);
        }
        std::vector<std::size_t> order(snap.strikes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return snap.strikes[a] < snap.strikes[b]; });
        MarketSnapshot sorted = snap;
        for (std::size_t i = 0; i < order.size(); ++i) {
            sorted.strikes[i] = snap.strikes[order[i]];
            sorted.option_forwards[i] = snap.option_forwards[order[i]];
        }
        out.snapshots.push_back(std::move(sorted));
    }
    std::sort(out.snapshots.begin(), out.snapshots.end(),
              [](const MarketSnapshot& a, const MarketSnapshot& b) { return a.date < b.date; });
    std::sort(strike_union.begin(), strike_union.end());
    out.all_strikes = std::move(strike_union);
    return out;
}

PricePath series_from_snapshots(const std::vector<MarketSnapshot>& snaps,
                                const RunConfig& config) {
    if (snaps.empty()) throw std::invalid_argument("series_from_snapshots: no snapshots");
    PricePath path;
    const double life_days =
        static_cast<double>(days_between(snaps.front().date, config.maturity_date));
    for (const auto& snap : snaps) {
        const auto sub = snap.with_strikes(config.strikes);
        Eigen::VectorXd y(static_cast<Eigen::Index>(config.strikes.size()) + 1);
        y(0) = sub.forward;
        for (std::size_t j = 0; j < sub.option_forwards.size(); ++j)
            y(static_cast<Eigen::Index>(j) + 1) = sub.option_forwards[j];
        const double elapsed_days =
            static_cast<double>(days_between(snaps.front().date, snap.date));
        path.times.push_back(config.model_maturity * elapsed_days / life_days);
        path.prices.push_back(std::move(y));
    }
    return path;
}

std::string snapshots_to_json(const std::vector<MarketSnapshot>& snaps) {
    json arr = json::array();
    for (const auto& s : snaps) {
        arr.push_back({{"date", s.date},
                       {"source", s.source},
                       {"tau", s.tau},
                       {"rate", s.rate},
                       {"forward", s.forward},
                       {"strikes", s.strikes},
                       {"option_forwards", s.option_forwards}});
    }
    json root = {{"schema_version", 1}, {"snapshots", arr}};
    return root.dump(2);
}

std::vector<MarketSnapshot> snapshots_from_json(const std::string& json_text) {
    const json root = json::parse(json_text);
    std::vector<MarketSnapshot> out;
    for (const auto& s : root.at("snapshots")) {
        MarketSnapshot snap;
        snap.date = s.at("date").get<std::string>();
        snap.source = s.at("source").get<std::string>();
        snap.tau = s.at("tau").get<double>();
        snap.rate = s.at("rate").get<double>();
        snap.forward = s.at("forward").get<double>();
        snap.strikes = s.at("strikes").get<std::vector<double>>();
        snap.option_forwards = s.at("option_forwards").get<std::vector<double>>();
        out.push_back(std::move(snap));
    }
    return out;
}

std::string spec_to_json(const MixtureSpec& spec, const CalibrationResult* diag) {
    json j = {{"schema_version", 1},
              {"n", spec.n},
              {"strikes", spec.strikes},
              {"grid", spec.grid},
              {"sigma", spec.sigma},
              {"p0", spec.p0},
              {"maturity", spec.maturity}};
    if (!spec.cones.widths.empty())
        j["cones"] = {{"base_angles", spec.cones.base_angles}, {"widths", spec.cones.widths}};
    if (diag) {
        j["diagnostics"] = {{"condition_number", diag->condition_number},
                            {"out_of_range", diag->out_of_range},
                            {"negative_components", diag->negative_components}};
    }
    return j.dump(2);
}

MixtureSpec spec_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    MixtureSpec spec;
    spec.n = j.at("n").get<int>();
    spec.strikes = j.at("strikes").get<std::vector<double>>();
    spec.grid = j.at("grid").get<std::vector<double>>();
    spec.sigma = j.at("sigma").get<std::vector<double>>();
    spec.p0 = j.at("p0").get<std::vector<double>>();
    spec.maturity = j.at("maturity").get<double>();
    if (j.contains("cones")) {
        spec.cones.base_angles = j["cones"].at("base_angles").get<std::vector<double>>();
        spec.cones.widths = j["cones"].at("widths").get<std::vector<double>>();
    }
    spec.validate();
    return spec;
}

}  // namespace fdp
