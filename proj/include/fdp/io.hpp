#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fdp/calibration.hpp"
#include "fdp/tracking.hpp"

namespace fdp {

struct QuoteRecord {
    std::string date;  // ISO-8601
    double strike = 0.0;
    bool is_call = true;
    double close = 0.0;
    long volume = 0;
};

/// Run configuration; sample files under configs/ mirror the published
/// parameter sets for two and five options.
struct RunConfig {
    std::string maturity_date;     // ISO-8601
    double rate = 0.0;
    std::vector<double> strikes;   // calibration strike set K_1..K_n
    double x1 = 0.0;               // outer grid points
    double x_top = 0.0;
    std::vector<double> sigma;     // length n+2
    double model_maturity = 1.0;   // T on the model clock (life-normalized: 1)

    std::size_t filter_particles = 250;
    std::string sigma1_policy = "observed-increments";
    std::uint64_t seed = 0;

    std::size_t sim_paths = 5000;
    std::size_t sim_steps = 50;
    double sim_dt = 0.0;           // 0 = one observation day on the model clock

    long volume_threshold = 100;

    static RunConfig load(const std::filesystem::path& file);
    void validate() const;
};

struct IngestResult {
    std::vector<MarketSnapshot> snapshots;      // one per usable date, ascending
    std::vector<std::string> warnings;          // skipped dates, exclusions
    std::vector<double> all_strikes;            // union of above-threshold strikes
};

/// Days between two ISO dates (actual/365 when divided by 365).
long days_between(const std::string& from, const std::string& to);

/// Reads a quote CSV (header: date,strike,type,close,volume), selects per date
/// the put/call pair with maximal combined volume for the parity forward,
/// converts call closes to option forwards, and drops strikes under the
/// volume threshold. Throws MalformedRowError with the offending line number.
IngestResult ingest_quotes(const std::filesystem::path& csv, const RunConfig& config);

/// Price series (forward + config strikes) on the model clock, t = days/life.
PricePath series_from_snapshots(const std::vector<MarketSnapshot>& snaps,
                                const RunConfig& config);

std::string snapshots_to_json(const std::vector<MarketSnapshot>& snaps);
std::vector<MarketSnapshot> snapshots_from_json(const std::string& json_text);

std::string spec_to_json(const MixtureSpec& spec, const CalibrationResult* diag = nullptr);
MixtureSpec spec_from_json(const std::string& json_text);

/// Full round-trip decimal formatting (17 significant digits).
std::string format_full(double v);

}  // namespace fdp
