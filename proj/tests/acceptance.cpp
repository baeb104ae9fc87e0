// Release gates for the bound pipeline. Each gate prints one PASS/FAIL line;
// the process exits nonzero if any gate fails. Tolerances are pinned here.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dualbound/errors.hpp"
#include "dualbound/experiment.hpp"

using namespace dualbound;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int index = 0;
    std::string label;
    bool ok = true;
    std::vector<std::string> notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes.push_back(what);
        }
    }
    void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
    return buf;
}

// Reference results for the benchmark market, N=10,000 paths, dt=0.05, x0=1.
// theta = (-lambda_u_hat, eta); _l is the primal side, _u the dual side.
struct ReferenceCell {
    double gamma_d, gamma_u, T;
    double lb, ci_lo, ci_hi, ub, al;
    double theta_l[2];
    double theta_u[2];
};

const ReferenceCell kReference[] = {
    {5.0, 5.0, 5.0, 0.135, 0.133, 0.137, 0.136, 1.664, {0.052, 0.458}, {0.052, 0.458}},
    {10.0, 2.0, 5.0, 0.234, 0.229, 0.239, 0.235, 2.314, {0.034, 0.965}, {0.030, 0.950}},
    {15.0, 3.0, 5.0, 0.178, 0.175, 0.181, 0.181, 4.308, {0.052, 0.778}, {0.046, 0.754}},
    {5.0, 5.0, 10.0, 0.193, 0.192, 0.195, 0.194, 1.885, {0.052, 0.225}, {0.052, 0.225}},
    {10.0, 2.0, 10.0, 0.416, 0.410, 0.422, 0.419, 4.600, {0.031, 0.745}, {0.026, 0.720}},
    {15.0, 3.0, 10.0, 0.292, 0.289, 0.295, 0.295, 4.219, {0.048, 0.495}, {0.041, 0.478}},
};

struct CsvRow {
    std::string tag;
    double T = 0.0, lb = 0.0, ci_lo = 0.0, ci_hi = 0.0, ub = 0.0, gap = 0.0;
    double cv = 0.0, al = 0.0, lu_l = 0.0, eta_l = 0.0, lu_u = 0.0, eta_u = 0.0;
};

std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string field;
    while (std::getline(in, field, ',')) out.push_back(field);
    return out;
}

std::vector<CsvRow> parse_bounds_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<CsvRow> rows;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = fields_of(line);
        if (f.size() != 13) throw std::runtime_error("bad row: " + line);
        CsvRow r;
        r.tag = f[0];
        double* slots[12] = {&r.T,  &r.lb, &r.ci_lo, &r.ci_hi, &r.ub,    &r.gap,
                             &r.cv, &r.al, &r.lu_l,  &r.eta_l, &r.lu_u, &r.eta_u};
        for (int i = 0; i < 12; ++i) *slots[i] = std::strtod(f[i + 1].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

const CsvRow* find_row(const std::vector<CsvRow>& rows, const std::string& tag, double T) {
    for (const auto& r : rows)
        if (r.tag == tag && std::fabs(r.T - T) < 1e-9) return &r;
    return nullptr;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::string& args) {
    std::string cmd = "\"" BOUNDS_CLI_PATH "\" " + args + " > /dev/null";
    int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= (n - 1.0);
    return {m, std::sqrt(s2 / n)};
}

MarketParams params_for(double T) {
    MarketParams p;
    p.bond_maturity_1 = T + 5.0;
    p.bond_maturity_2 = T + 15.0;
    return p;
}

struct InjectRun {
    Controls dual;
    double ub = 0.0;
    PathSet paths;
    WealthSample ws;
    LowerBoundEstimate lb;
};

InjectRun run_inject(const MarketParams& params, const Preferences& prefs, double T,
                     int n_paths, std::uint64_t seed) {
    InjectRun out;
    out.dual = solve_dual(params, prefs, 1.0, T);
    out.ub = upper_bound(out.dual, params, prefs, 1.0, T);
    SimConfig sim;
    sim.n_paths = n_paths;
    sim.horizon = T;
    sim.seed = seed;
    out.paths = simulate_states(params, sim, out.dual.lambda_u_hat);
    Controls inject{out.dual.eta, out.dual.lambda_u_hat, Controls::Side::primal};
    out.ws = simulate_wealth(out.paths, inject, params, prefs, 1.0);
    out.lb = lower_bound(out.ws, prefs);
    return out;
}

} // namespace

int main() {
    const std::uint64_t master_seed = SimConfig{}.seed;
    const Preferences profiles[3] = {{5.0, 5.0, 1.0}, {10.0, 2.0, 1.0}, {15.0, 3.0, 1.0}};
    const char* tags[3] = {"5-5", "10-2", "15-3"};

    fs::path work = fs::temp_directory_path() / ("acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    std::vector<Criterion> gates;

    // ---- gate 8 runs first: its artifacts also feed gates 1, 2 and 7 ------
    Criterion g8{8, "same seed, byte-identical artifacts"};
    std::vector<CsvRow> rows;
    try {
        fs::path run_a = work / "run_a", run_b = work / "run_b";
        std::string base = "bounds --config \"" BENCHMARK_CONFIG_PATH "\" --out ";
        int rc_a = run_cli(base + "\"" + run_a.string() + "\"");
        int rc_b = run_cli(base + "\"" + run_b.string() + "\"");
        g8.expect(rc_a == 0, fmt("first run exited with %g", rc_a));
        g8.expect(rc_b == 0, fmt("second run exited with %g", rc_b));
        if (rc_a == 0 && rc_b == 0) {
            std::string csv_a = read_text(run_a / "bounds.csv");
            g8.expect(!csv_a.empty(), "first run produced an empty bounds.csv");
            g8.expect(csv_a == read_text(run_b / "bounds.csv"),
                      "bounds.csv differs between identically seeded runs");
            rows = parse_bounds_csv(run_a / "bounds.csv");
        }
    } catch (const std::exception& e) {
        g8.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 1: replicate the reference grid of bounds and controls ------
    Criterion g1{1, "reference bounds and controls replicated"};
    try {
        for (const auto& ref : kReference) {
            const Preferences* prefs = nullptr;
            const char* tag = nullptr;
            for (int i = 0; i < 3; ++i)
                if (profiles[i].gamma_d == ref.gamma_d && profiles[i].gamma_u == ref.gamma_u) {
                    prefs = &profiles[i];
                    tag = tags[i];
                }
            const CsvRow* row = tag ? find_row(rows, tag, ref.T) : nullptr;
            if (!row) {
                g1.expect(false, std::string("missing row ") + (tag ? tag : "?"));
                continue;
            }
            std::string cell = std::string(tag) + fmt(" T=%g", ref.T);
            g1.expect(std::fabs(row->lb - ref.lb) <= 0.01,
                      cell + fmt(": LB %.4f vs %.4f", row->lb, ref.lb));
            bool overlap = std::max(row->ci_lo, ref.ci_lo) <= std::min(row->ci_hi, ref.ci_hi);
            g1.expect(overlap, cell + fmt(": CI (%.4f,%.4f) misses the reference band",
                                          row->ci_lo, row->ci_hi));
            g1.expect(std::fabs(row->ub - ref.ub) <= 0.005,
                      cell + fmt(": UB %.4f vs %.4f", row->ub, ref.ub));
            double ref_gap = ref.ub - ref.lb;
            g1.expect(std::fabs(row->gap - ref_gap) <= 0.002,
                      cell + fmt(": gap %.4f vs %.4f", row->gap, ref_gap));
            g1.expect(std::fabs(-row->lu_u - ref.theta_u[0]) <= 0.005,
                      cell + fmt(": dual shadow price %.4f vs %.4f", -row->lu_u, ref.theta_u[0]));
            g1.expect(std::fabs(row->eta_u - ref.theta_u[1]) <= 0.005,
                      cell + fmt(": dual eta %.4f vs %.4f", row->eta_u, ref.theta_u[1]));
            g1.expect(std::fabs(-row->lu_l - ref.theta_l[0]) <= 0.015,
                      cell + fmt(": primal shadow price %.4f vs %.4f", -row->lu_l, ref.theta_l[0]));
            g1.expect(std::fabs(row->eta_l - ref.theta_l[1]) <= 0.015,
                      cell + fmt(": primal eta %.4f vs %.4f", row->eta_l, ref.theta_l[1]));
        }
        if (rows.empty()) g1.expect(false, "no artifact rows to compare");
    } catch (const std::exception& e) {
        g1.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 2: a single curvature collapses the two sides ---------------
    Criterion g2{2, "single-curvature exactness"};
    try {
        for (double T : {5.0, 10.0}) {
            Controls dual = solve_dual(params_for(T), profiles[0], 1.0, T);
            g2.expect(std::fabs(dual.lambda_u_hat + 0.052) < 1e-12,
                      fmt("T=%g: shadow price %.15f is not -0.052", T, dual.lambda_u_hat));
            const CsvRow* row = find_row(rows, "5-5", T);
            if (!row) {
                g2.expect(false, fmt("missing 5-5 row at T=%g", T));
                continue;
            }
            double se = (row->ci_hi - row->ci_lo) / (2.0 * 1.959963984540054);
            g2.expect(std::fabs(row->gap) < 2.0 * se,
                      fmt("T=%g: gap %.5f exceeds 2 standard errors %.5f", T, row->gap, 2.0 * se));
        }
    } catch (const std::exception& e) {
        g2.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 3: closed forms against brute-force Monte Carlo -------------
    Criterion g3{3, "closed forms match Monte Carlo oracles"};
    try {
        const double T = 5.0;
        MarketParams params = params_for(T);
        for (int i = 0; i < 3; ++i) {
            const Preferences& prefs = profiles[i];
            Controls dual = solve_dual(params, prefs, 1.0, T);
            double ub = upper_bound(dual, params, prefs, 1.0, T);
            KernelMoments km = kernel_moments(0.0, T, params.r0, params, prefs,
                                              dual.lambda_u_hat);
            double m = kernel_mean(km, prefs);
            double s2 = km.sigma_M * km.sigma_M;

            SimConfig sim;
            sim.horizon = T;
            sim.seed = master_seed;
            PathSet paths = simulate_states(params, sim, dual.lambda_u_hat);
            int last = paths.n_steps;
            std::vector<double> lm(paths.n_paths), dual_obj(paths.n_paths);
            std::vector<double> xg_d(paths.n_paths), xg_u(paths.n_paths);
            for (int p = 0; p < paths.n_paths; ++p) {
                std::size_t idx = paths.idx(p, last);
                lm[p] = paths.log_kernel[idx];
                double pi_T = std::exp(paths.log_price_index[idx]);
                double y = dual.eta * std::exp(lm[p]) / pi_T;
                dual_obj[p] = conjugate(y, pi_T, prefs) + dual.eta;
                double le = std::log(dual.eta) + lm[p];
                xg_d[p] = std::exp(-le / prefs.gamma_d + lm[p]);
                xg_u[p] = std::exp(-le / prefs.gamma_u + lm[p]);
            }

            std::string cell(tags[i]);
            MeanSe obj = mean_se(dual_obj);
            g3.expect(std::fabs(ub - obj.mean) < 3.0 * obj.se,
                      cell + fmt(": bound %.5f vs sampled %.5f (se %.5f)", ub, obj.mean, obj.se));

            MeanSe mlm = mean_se(lm);
            g3.expect(std::fabs(mlm.mean - m) < 3.0 * mlm.se,
                      cell + fmt(": kernel mean %.5f vs %.5f", mlm.mean, m));
            double var = 0.0;
            for (double x : lm) var += (x - mlm.mean) * (x - mlm.mean);
            var /= (lm.size() - 1.0);
            double se_var = var * std::sqrt(2.0 / (lm.size() - 1.0));
            g3.expect(std::fabs(var - s2) < 3.0 * se_var,
                      cell + fmt(": kernel variance %.5f vs %.5f", var, s2));

            MeanSe md = mean_se(xg_d), mu = mean_se(xg_u);
            double xd = x_gamma(prefs.gamma_d, dual.eta, m, s2);
            double xu = x_gamma(prefs.gamma_u, dual.eta, m, s2);
            g3.expect(std::fabs(md.mean - xd) < 3.0 * md.se,
                      cell + fmt(": down branch wealth %.5f vs %.5f", md.mean, xd));
            g3.expect(std::fabs(mu.mean - xu) < 3.0 * mu.se,
                      cell + fmt(": up branch wealth %.5f vs %.5f", mu.mean, xu));
        }
    } catch (const std::exception& e) {
        g3.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 4: simulated strategies price back to the endowment ---------
    Criterion g4{4, "budget feasibility under injected controls"};
    try {
        for (double T : {5.0, 10.0}) {
            MarketParams params = params_for(T);
            for (int i = 0; i < 3; ++i) {
                InjectRun run = run_inject(params, profiles[i], T, 10000, master_seed);
                int last = run.paths.n_steps;
                std::vector<double> priced(run.paths.n_paths);
                for (int p = 0; p < run.paths.n_paths; ++p) {
                    std::size_t idx = run.paths.idx(p, last);
                    priced[p] = run.ws.terminal_wealth[p] *
                                std::exp(run.paths.log_kernel[idx] -
                                         run.paths.log_price_index[idx]);
                }
                MeanSe ms = mean_se(priced);
                g4.expect(std::fabs(ms.mean - 1.0) < 3.0 * ms.se,
                          std::string(tags[i]) +
                              fmt(" T=%g: priced wealth %.5f (se %.5f)", T, ms.mean, ms.se));
            }
        }
    } catch (const std::exception& e) {
        g4.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 5: ordering survives random parameter perturbations ---------
    Criterion g5{5, "weak duality under random perturbations"};
    try {
        std::mt19937_64 gen(524287ULL);
        std::uniform_real_distribution<double> u(-0.2, 0.2);
        auto jitter = [&](double v) { return v * (1.0 + u(gen)); };
        const double T = 5.0;
        for (int run_i = 0; run_i < 50; ++run_i) {
            MarketParams p;
            Preferences prefs{10.0, 2.0, 1.0};
            bool admissible = false;
            for (int attempt = 0; attempt < 100 && !admissible; ++attempt) {
                p = MarketParams{};
                p.sigma_s = jitter(p.sigma_s);
                p.lambda_s = jitter(p.lambda_s);
                p.lambda_r = jitter(p.lambda_r);
                p.lambda_pi = jitter(p.lambda_pi);
                p.lambda_u = jitter(p.lambda_u);
                p.rho_sr = jitter(p.rho_sr);
                p.rho_spi = jitter(p.rho_spi);
                p.rho_rpi = jitter(p.rho_rpi);
                for (double& f : p.phi) f = jitter(f);
                p.phi_u = jitter(p.phi_u);
                p.xi_u = jitter(p.xi_u);
                p.r_bar = jitter(p.r_bar);
                p.kappa = jitter(p.kappa);
                p.sigma_r = jitter(p.sigma_r);
                p.pi_bar = jitter(p.pi_bar);
                p.alpha = jitter(p.alpha);
                p.sigma_pi = jitter(p.sigma_pi);
                p.r0 = jitter(p.r0);
                p.pi0 = jitter(p.pi0);
                prefs.gamma_d = jitter(10.0);
                prefs.gamma_u = jitter(2.0);
                try {
                    p.validate(T);
                    prefs.validate();
                    admissible = true;
                } catch (const std::exception&) {
                }
            }
            if (!admissible) {
                g5.expect(false, fmt("run %g: no admissible draw in 100 attempts",
                                     static_cast<double>(run_i)));
                continue;
            }
            try {
                InjectRun run = run_inject(p, prefs, T, 4000, master_seed);
                double slack = run.ub - run.lb.value + 2.0 * run.lb.std_error;
                g5.expect(slack >= 0.0,
                          fmt("run %.0f: bound %.5f under sampled %.5f (se %.5f)",
                              static_cast<double>(run_i), run.ub, run.lb.value,
                              run.lb.std_error));
            } catch (const std::exception& e) {
                g5.expect(false, fmt("run %.0f: ", static_cast<double>(run_i)) + e.what());
            }
        }
    } catch (const std::exception& e) {
        g5.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 6: allocation fraction interpolates its two flat limits -----
    Criterion g6{6, "allocation curve limits"};
    try {
        MarketParams p;
        std::vector<double> grid;
        for (int i = 0; i <= 256; ++i) grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 256.0));
        auto curve = allocation_curve(Preferences{10.0, 2.0, 1.0}, p.lambda_s, p.sigma_s,
                                      1.0, grid);
        double floor_w = curve.front().second, cap_w = curve.back().second;
        g6.expect(std::fabs(floor_w - 0.21709) < 1e-3,
                  fmt("low-wealth limit %.5f vs 0.21709", floor_w));
        g6.expect(std::fabs(cap_w - 1.08544) < 1e-3,
                  fmt("high-wealth limit %.5f vs 1.08544", cap_w));
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (curve[i].second < curve[i - 1].second - 1e-9) {
                g6.expect(false, fmt("curve decreases near wealth %.5g", curve[i].first));
                break;
            }
    } catch (const std::exception& e) {
        g6.expect(false, std::string("exception: ") + e.what());
    }

    // ---- gate 7: annualized losses stay in the expected band ---------------
    Criterion g7{7, "annual loss magnitudes"};
    try {
        if (rows.empty()) g7.expect(false, "no artifact rows to check");
        for (const auto& row : rows)
            g7.expect(row.al >= 0.5 && row.al <= 8.0,
                      row.tag + fmt(" T=%g: annual loss %.3f bp outside [0.5, 8]", row.T, row.al));
    } catch (const std::exception& e) {
        g7.expect(false, std::string("exception: ") + e.what());
    }

    gates = {g1, g2, g3, g4, g5, g6, g7, g8};
    int failed = 0;
    for (const auto& g : gates) {
        std::printf("%s  %d. %s\n", g.ok ? "PASS" : "FAIL", g.index, g.label.c_str());
        for (const auto& n : g.notes) std::printf("      %s\n", n.c_str());
        if (!g.ok) ++failed;
    }
    std::printf("%d/8 criteria passed\n", 8 - failed);
    fs::remove_all(work);
    return failed == 0 ? 0 : 1;
}
