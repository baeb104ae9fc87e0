#pragma once

#include <string>
#include <vector>

#include "dualbound/diagnostics.hpp"

namespace dualbound {

// ============================================================================
// Experiment runner: config ingestion, the per-cell pipeline
// (solve dual -> simulate -> bounds -> welfare cost), and CSV artifacts.
// ============================================================================

struct ExperimentConfig {
    enum class Mode { inject_dual, optimize_primal };

    MarketParams market;
    std::vector<Preferences> profiles; // at least one
    std::vector<double> horizons;      // at least one
    SimConfig sim;                     // horizon field set per cell at run time
    Mode mode = Mode::inject_dual;
    std::string out_dir;        // optional; CLI flag and env var can override
    bool parallel_cells = false;
    // When the config does not pin bond maturities, each cell defaults to
    // horizon + 5 and horizon + 15.
    bool maturities_given = false;

    void validate() const; // throws ConfigError
};

// Flat key = value text, '#' comments, unknown or duplicate keys rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct CellResult {
    Preferences prefs;
    double horizon = 0.0;
    bool failed = false;
    std::string fail_reason;
    BoundsReport report;
};

// One pipeline pass per (profile, horizon) cell, in config order.
std::vector<CellResult> run_bounds(const ExperimentConfig& config);

// Compute and write <out_dir>/bounds.csv. Returns 0, or 3 when at least one
// cell failed to converge (failed rows carry nan values).
int run_bounds_to_dir(const ExperimentConfig& config, const std::string& out_dir);

// figure1_utility.csv, figure2_allocation.csv, figure3_kde.csv, one series
// column per profile. Returns 0 or 3 as above.
int run_figures_to_dir(const ExperimentConfig& config, const std::string& out_dir);

// Raw state export (debug): paths.csv with one row per (path, grid time).
int run_paths_to_dir(const ExperimentConfig& config, const std::string& out_dir);

// Locale-free rendering at 6 significant digits, used for all CSV output.
std::string format_sig6(double v);

// Short cell label such as "10-2" or "10-2-K1.5" (kink shown when not 1).
std::string profile_tag(const Preferences& prefs);

} // namespace dualbound
