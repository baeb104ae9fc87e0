#include "dualbound/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "dualbound/errors.hpp"

namespace dualbound {

std::string format_sig6(double v) {
    if (v == 0.0) v = 0.0; // strip the sign off negative zero
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string profile_tag(const Preferences& prefs) {
    std::string tag = format_sig6(prefs.gamma_d) + "-" + format_sig6(prefs.gamma_u);
    if (prefs.kink != 1.0) tag += "-K" + format_sig6(prefs.kink);
    return tag;
}

void ExperimentConfig::validate() const {
    if (profiles.empty()) throw ConfigError("at least one preference profile is required");
    if (horizons.empty()) throw ConfigError("at least one horizon is required");
    for (const auto& p : profiles) p.validate();
    for (double T : horizons) {
        if (!(T > 0.0)) throw ConfigError("horizons must be positive");
        MarketParams cell = market;
        if (!maturities_given) {
            cell.bond_maturity_1 = T + 5.0;
            cell.bond_maturity_2 = T + 15.0;
        }
        cell.validate(T);
    }
    if (sim.n_paths <= 0) throw ConfigError("n_paths must be positive");
    if (!(sim.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(sim.x0 > 0.0)) throw ConfigError("x0 must be positive");
}

namespace {

double parse_double(const std::string& key, const std::string& raw) {
    const char* first = raw.data();
    const char* last = raw.data() + raw.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("key '" + key + "': cannot parse number '" + raw + "'");
    return value;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
    const char* first = raw.data();
    const char* last = raw.data() + raw.size();
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("key '" + key + "': cannot parse unsigned integer '" + raw + "'");
    return value;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

std::vector<Preferences> parse_profiles(const std::string& raw) {
    std::vector<Preferences> out;
    for (const std::string& item : split(raw, ';')) {
        if (item.empty()) continue;
        std::vector<std::string> f = split(item, ',');
        if (f.size() != 2 && f.size() != 3)
            throw ConfigError("profile '" + item + "' must be gamma_d,gamma_u[,kink]");
        Preferences p;
        p.gamma_d = parse_double("profiles", f[0]);
        p.gamma_u = parse_double("profiles", f[1]);
        p.kink = f.size() == 3 ? parse_double("profiles", f[2]) : 1.0;
        out.push_back(p);
    }
    return out;
}

std::vector<double> parse_horizons(const std::string& raw) {
    std::vector<double> out;
    for (const std::string& item : split(raw, ','))
        if (!item.empty()) out.push_back(parse_double("horizons", item));
    return out;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    cfg.profiles = {Preferences{5.0, 5.0, 1.0}, Preferences{10.0, 2.0, 1.0},
                    Preferences{15.0, 3.0, 1.0}};
    cfg.horizons = {5.0, 10.0};

    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key))
            throw ConfigError("duplicate key '" + key + "'");
        kv[key] = value;
    }

    MarketParams& mk = cfg.market;
    std::map<std::string, double*> market_keys = {
        {"sigma_s", &mk.sigma_s},       {"lambda_s", &mk.lambda_s},
        {"lambda_r", &mk.lambda_r},     {"lambda_pi", &mk.lambda_pi},
        {"lambda_u", &mk.lambda_u},     {"rho_sr", &mk.rho_sr},
        {"rho_spi", &mk.rho_spi},       {"rho_rpi", &mk.rho_rpi},
        {"phi_s", &mk.phi[0]},          {"phi_r", &mk.phi[1]},
        {"phi_pi", &mk.phi[2]},         {"phi_u", &mk.phi_u},
        {"xi_s", &mk.xi[0]},            {"xi_r", &mk.xi[1]},
        {"xi_pi", &mk.xi[2]},           {"xi_u", &mk.xi_u},
        {"r_bar", &mk.r_bar},           {"kappa", &mk.kappa},
        {"sigma_r", &mk.sigma_r},       {"pi_bar", &mk.pi_bar},
        {"alpha", &mk.alpha},           {"sigma_pi", &mk.sigma_pi},
        {"r0", &mk.r0},                 {"pi0", &mk.pi0},
        {"bond_maturity_1", &mk.bond_maturity_1},
        {"bond_maturity_2", &mk.bond_maturity_2},
        {"dt", &cfg.sim.dt},            {"x0", &cfg.sim.x0},
    };

    for (const auto& [key, value] : kv) {
        auto it = market_keys.find(key);
        if (it != market_keys.end()) {
            *it->second = parse_double(key, value);
            if (key == "bond_maturity_1" || key == "bond_maturity_2")
                cfg.maturities_given = true;
        } else if (key == "profiles") {
            cfg.profiles = parse_profiles(value);
        } else if (key == "horizons") {
            cfg.horizons = parse_horizons(value);
        } else if (key == "n_paths") {
            cfg.sim.n_paths = static_cast<int>(parse_u64(key, value));
        } else if (key == "seed") {
            cfg.sim.seed = parse_u64(key, value);
        } else if (key == "mode") {
            if (value == "inject-dual")
                cfg.mode = ExperimentConfig::Mode::inject_dual;
            else if (value == "optimize-primal")
                cfg.mode = ExperimentConfig::Mode::optimize_primal;
            else
                throw ConfigError("mode must be inject-dual or optimize-primal");
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else if (key == "parallel_cells") {
            if (value == "true" || value == "1")
                cfg.parallel_cells = true;
            else if (value == "false" || value == "0")
                cfg.parallel_cells = false;
            else
                throw ConfigError("parallel_cells must be true or false");
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

CellResult run_cell(const ExperimentConfig& config, const Preferences& prefs, double T,
                    WealthSample* keep_sample = nullptr) {
    CellResult cell;
    cell.prefs = prefs;
    cell.horizon = T;

    MarketParams params = config.market;
    if (!config.maturities_given) {
        params.bond_maturity_1 = T + 5.0;
        params.bond_maturity_2 = T + 15.0;
    }
    params.validate(T);

    SimConfig sim = config.sim;
    sim.horizon = T;
    double x0 = sim.x0;

    try {
        Controls dual = solve_dual(params, prefs, x0, T);
        double ub = upper_bound(dual, params, prefs, x0, T);
        PathSet paths = simulate_states(params, sim, dual.lambda_u_hat);

        Controls primal{dual.eta, dual.lambda_u_hat, Controls::Side::primal};
        if (config.mode == ExperimentConfig::Mode::optimize_primal)
            primal = optimize_primal(paths, params, prefs, sim, primal).controls;

        WealthSample ws = simulate_wealth(paths, primal, params, prefs, x0);
        LowerBoundEstimate lb = lower_bound(ws, prefs);
        if (keep_sample) *keep_sample = ws;

        BoundsReport& rep = cell.report;
        rep.lower = lb.value;
        rep.upper = ub;
        rep.gap = duality_gap(ub, lb.value);
        rep.cv = compensating_variation(ws, prefs, ub, x0);
        rep.al_bp = annual_loss(rep.cv, x0, T);
        rep.lower_estimate = lb;
        rep.controls_primal = primal;
        rep.controls_dual = dual;
        if (rep.gap < -2.0 * lb.std_error)
            std::fprintf(stderr, "warning: cell %s T=%s violates weak duality (gap %g)\n",
                         profile_tag(prefs).c_str(), format_sig6(T).c_str(), rep.gap);
    } catch (const NoConvergence& e) {
        cell.failed = true;
        cell.fail_reason = e.what();
    } catch (const BracketError& e) {
        cell.failed = true;
        cell.fail_reason = e.what();
    }
    return cell;
}

} // namespace

std::vector<CellResult> run_bounds(const ExperimentConfig& config) {
    config.validate();
    std::vector<std::pair<Preferences, double>> cells;
    for (double T : config.horizons)
        for (const auto& p : config.profiles) cells.emplace_back(p, T);

    std::vector<CellResult> results(cells.size());
    if (config.parallel_cells && cells.size() > 1) {
        unsigned hw = std::thread::hardware_concurrency();
        std::size_t n_threads = std::min<std::size_t>(hw == 0 ? 1 : hw, cells.size());
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_threads; ++w) {
            workers.emplace_back([&, w]() {
                for (std::size_t i = w; i < cells.size(); i += n_threads)
                    results[i] = run_cell(config, cells[i].first, cells[i].second);
            });
        }
        for (auto& t : workers) t.join();
    } else {
        for (std::size_t i = 0; i < cells.size(); ++i)
            results[i] = run_cell(config, cells[i].first, cells[i].second);
    }
    return results;
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

const double qnan = std::nan("");

} // namespace

int run_bounds_to_dir(const ExperimentConfig& config, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<CellResult> results = run_bounds(config);

    std::ostringstream csv;
    csv << "profile,T,LB,CI_lo,CI_hi,UB,gap,CV,AL_bp,lambda_u_L,eta_L,lambda_u_U,eta_U\n";
    bool any_failed = false;
    for (const auto& cell : results) {
        const BoundsReport& r = cell.report;
        double row[12] = {cell.horizon, r.lower, r.lower_estimate.ci_lo, r.lower_estimate.ci_hi,
                          r.upper, r.gap, r.cv, r.al_bp,
                          r.controls_primal.lambda_u_hat, r.controls_primal.eta,
                          r.controls_dual.lambda_u_hat, r.controls_dual.eta};
        if (cell.failed) {
            any_failed = true;
            for (int i = 1; i < 12; ++i) row[i] = qnan;
            std::fprintf(stderr, "cell %s T=%s failed: %s\n", profile_tag(cell.prefs).c_str(),
                         format_sig6(cell.horizon).c_str(), cell.fail_reason.c_str());
        }
        csv << profile_tag(cell.prefs);
        for (double v : row) csv << "," << format_sig6(v);
        csv << "\n";
    }
    write_file(out_dir + "/bounds.csv", csv.str());

    for (const auto& cell : results) {
        if (cell.failed) continue;
        std::printf("%s T=%s: LB %s UB %s gap %s AL %s bp\n", profile_tag(cell.prefs).c_str(),
                    format_sig6(cell.horizon).c_str(), format_sig6(cell.report.lower).c_str(),
                    format_sig6(cell.report.upper).c_str(), format_sig6(cell.report.gap).c_str(),
                    format_sig6(cell.report.al_bp).c_str());
    }
    return any_failed ? 3 : 0;
}

int run_figures_to_dir(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    bool any_failed = false;

    { // utility curves on a grid through the kink
        std::ostringstream csv;
        csv << "x";
        for (const auto& p : config.profiles) csv << ",u_" << profile_tag(p);
        csv << "\n";
        for (int i = 0; i <= 250; ++i) {
            double x = 0.25 + i * 0.015;
            csv << format_sig6(x);
            for (const auto& p : config.profiles) csv << "," << format_sig6(utility(x, 1.0, p));
            csv << "\n";
        }
        write_file(out_dir + "/figure1_utility.csv", csv.str());
    }

    { // reduced-economy allocation curve per profile
        std::vector<double> grid;
        for (int i = 0; i <= 256; ++i) grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 256.0));
        std::vector<std::vector<std::pair<double, double>>> curves;
        for (const auto& p : config.profiles)
            curves.push_back(allocation_curve(p, config.market.lambda_s, config.market.sigma_s,
                                              1.0, grid));
        std::ostringstream csv;
        csv << "wealth";
        for (const auto& p : config.profiles) csv << ",w_" << profile_tag(p);
        csv << "\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            csv << format_sig6(grid[i]);
            for (const auto& curve : curves) csv << "," << format_sig6(curve[i].second);
            csv << "\n";
        }
        write_file(out_dir + "/figure2_allocation.csv", csv.str());
    }

    { // real terminal wealth densities at the first horizon, common grid
        double T = config.horizons.front();
        const double bandwidth = 0.15;
        std::vector<std::vector<double>> samples(config.profiles.size());
        for (std::size_t pi = 0; pi < config.profiles.size(); ++pi) {
            WealthSample ws;
            CellResult cell = run_cell(config, config.profiles[pi], T, &ws);
            if (cell.failed) {
                any_failed = true;
                std::fprintf(stderr, "figure 3 cell %s failed: %s\n",
                             profile_tag(config.profiles[pi]).c_str(), cell.fail_reason.c_str());
                continue;
            }
            samples[pi].resize(ws.terminal_wealth.size());
            for (std::size_t i = 0; i < samples[pi].size(); ++i)
                samples[pi][i] = ws.terminal_wealth[i] / ws.terminal_price_index[i];
        }

        double lo = 1e300, hi = -1e300;
        for (const auto& s : samples)
            for (double v : s) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        if (hi < lo) {
            lo = 0.0;
            hi = 1.0;
        }
        lo -= 3.0 * bandwidth;
        hi += 3.0 * bandwidth;

        std::ostringstream csv;
        csv << "x";
        for (const auto& p : config.profiles) csv << ",density_" << profile_tag(p);
        csv << "\n";
        const int n_grid = 512;
        for (int i = 0; i < n_grid; ++i) {
            double x = lo + (hi - lo) * i / (n_grid - 1);
            csv << format_sig6(x);
            for (const auto& s : samples) {
                if (s.empty()) {
                    csv << "," << format_sig6(qnan);
                    continue;
                }
                double acc = 0.0;
                for (double v : s) acc += norm_pdf((x - v) / bandwidth);
                csv << "," << format_sig6(acc / (bandwidth * static_cast<double>(s.size())));
            }
            csv << "\n";
        }
        write_file(out_dir + "/figure3_kde.csv", csv.str());
    }

    return any_failed ? 3 : 0;
}

int run_paths_to_dir(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir);

    double T = config.horizons.front();
    MarketParams params = config.market;
    if (!config.maturities_given) {
        params.bond_maturity_1 = T + 5.0;
        params.bond_maturity_2 = T + 15.0;
    }
    SimConfig sim = config.sim;
    sim.horizon = T;
    PathSet paths = simulate_states(params, sim, params.risk_premium_u());

    std::ostringstream csv;
    csv << "path,time,r,pi,log_Pi,log_M,log_B\n";
    for (int p = 0; p < paths.n_paths; ++p) {
        for (int k = 0; k <= paths.n_steps; ++k) {
            std::size_t i = paths.idx(p, k);
            csv << p << "," << format_sig6(paths.grid[k]) << "," << format_sig6(paths.r[i])
                << "," << format_sig6(paths.pi[i]) << ","
                << format_sig6(paths.log_price_index[i]) << ","
                << format_sig6(paths.log_kernel[i]) << ","
                << format_sig6(paths.log_money_market[i]) << "\n";
        }
    }
    write_file(out_dir + "/paths.csv", csv.str());

    // strategy trajectories for the first profile under injected controls
    const Preferences& prefs = config.profiles.front();
    try {
        Controls dual = solve_dual(params, prefs, sim.x0, T);
        PathSet strat_paths = simulate_states(params, sim, dual.lambda_u_hat);
        Controls primal{dual.eta, dual.lambda_u_hat, Controls::Side::primal};
        WealthOptions options;
        options.record_trajectories = true;
        WealthSample ws = simulate_wealth(strat_paths, primal, params, prefs, sim.x0, options);

        std::ostringstream traj;
        traj << "path,time,weight_stock,weight_bond1,weight_bond2,wealth\n";
        for (int p = 0; p < ws.n_paths; ++p) {
            for (int k = 0; k <= ws.n_steps; ++k) {
                // the last grid point repeats the final rebalance weights
                std::size_t wb =
                    (static_cast<std::size_t>(p) * ws.n_steps + std::min(k, ws.n_steps - 1)) * 3;
                traj << p << "," << format_sig6(strat_paths.grid[k]) << ","
                     << format_sig6(ws.weight_paths[wb + 0]) << ","
                     << format_sig6(ws.weight_paths[wb + 1]) << ","
                     << format_sig6(ws.weight_paths[wb + 2]) << ","
                     << format_sig6(ws.wealth_paths[strat_paths.idx(p, k)]) << "\n";
            }
        }
        write_file(out_dir + "/trajectories.csv", traj.str());
    } catch (const NoConvergence& e) {
        std::fprintf(stderr, "trajectory export failed: %s\n", e.what());
        return 3;
    } catch (const BracketError& e) {
        std::fprintf(stderr, "trajectory export failed: %s\n", e.what());
        return 3;
    }
    return 0;
}

} // namespace dualbound
