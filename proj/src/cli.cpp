#include "hdlp/cli.hpp"
#include "hdlp/core.hpp"
#include "hdlp/dgp.hpp"
#include "hdlp/errors.hpp"
#include "hdlp/inference.hpp"
#include "hdlp/lp.hpp"
#include "hdlp/montecarlo.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace hdlp::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

std::size_t default_workers()
{
    if (const char* env = std::getenv(kWorkersEnv)) {
        try {
            const long v = std::stol(env);
            if (v >= 1)
                return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return 1;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
}

ordered_json config_json(const solver::PenaltyConfig& c)
{
    return {{"gamma_scale", c.gamma_scale}, {"zeta", c.zeta},         {"xi_scale", c.xi_scale},
            {"eta_scale", c.eta_scale},     {"j_moment", c.j_moment}, {"max_iter", c.max_iter},
            {"tol", c.tol}};
}

struct Manifest
{
    std::string command;
    std::vector<std::string> argv;
    ordered_json config = ordered_json::object();
    ordered_json seeds = ordered_json::array();
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
};

void write_manifest(const Manifest& m, const fs::path& path, double wall_seconds)
{
    ordered_json j;
    j["command"] = m.command;
    j["version"] = kVersion;
    j["argv"] = m.argv;
    j["config"] = m.config;
    j["seeds"] = m.seeds;
    j["wall_seconds"] = wall_seconds;
    ordered_json inputs = ordered_json::object();
    for (const auto& p : m.inputs)
        inputs[p.string()] = file_digest(p);
    j["inputs"] = inputs;
    ordered_json outputs = ordered_json::object();
    for (const auto& p : m.outputs)
        outputs[p.string()] = file_digest(p);
    j["outputs"] = outputs;
    write_text(path, j.dump(2) + "\n");
}

void add_penalty_options(CLI::App* app, solver::PenaltyConfig& c)
{
    app->add_option("--gamma-scale", c.gamma_scale, "c_gamma in gamma = c h^{1/5} sqrt(log N / T)")
        ->capture_default_str();
    app->add_option("--zeta", c.zeta, "adaptive weight exponent")->capture_default_str();
    app->add_option("--xi-scale", c.xi_scale, "lag-selection penalty scale")->capture_default_str();
    app->add_option("--eta-scale", c.eta_scale, "covariance threshold scale")->capture_default_str();
    app->add_option("--max-iter", c.max_iter, "coordinate descent sweep limit")->capture_default_str();
    app->add_option("--tol", c.tol, "coordinate descent tolerance")->capture_default_str();
}

std::string blank_or(double v, bool present)
{
    return present ? format_real(v) : std::string();
}

// ---------------------------------------------------------------------------

struct SimulateArgs
{
    std::size_t n = 20;
    std::size_t t = 300;
    std::uint64_t seed = 1;
    std::size_t burn_in = dgp::kDefaultBurnIn;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, Manifest m, std::ostream& out)
{
    if (a.n < 2 || a.n % 2 != 0)
        throw UsageError(fmt::format("--n must be even (sparse two-lag design), got {}", a.n));
    if (a.t < 2)
        throw UsageError("--t must be at least 2");
    const auto start = std::chrono::steady_clock::now();
    const PanelSeries series = dgp::simulate_var(dgp::table1_dgp(a.n), a.t, a.burn_in, a.seed);
    const fs::path path(a.out);
    write_text(path, to_csv(series));

    m.config = {{"n", a.n}, {"t", a.t}, {"burn_in", a.burn_in}, {"pad_rows", series.pad()}};
    m.seeds = {a.seed};
    m.outputs = {path};
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(m, fs::path(a.out + ".manifest.json"), wall);
    out << fmt::format("wrote {} rows x {} columns to {}\n", series.total_rows(), series.n_vars(), a.out);
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct ReplicateArgs
{
    montecarlo::McScenario scenario;
    bool paper_scale = false;
    std::string out_dir = ".";
};

std::string pair_key(std::size_t ell) { return fmt::format("p{}", ell); }

ordered_json summary_json(const montecarlo::McSummary& s)
{
    const auto& sc = s.scenario;
    ordered_json j;
    j["scenario"] = {{"N", sc.n_vars},        {"T", sc.n_obs},        {"R", sc.replications},
                     {"horizons", sc.horizons}, {"p_true", sc.p_true}, {"p_max", sc.p_max},
                     {"h_select", sc.h_select}, {"base_seed", sc.base_seed}, {"burn_in", sc.burn_in},
                     {"tol_zero", sc.tol_zero}, {"config", config_json(sc.config)}};
    j["replications_used"] = s.replications_used;
    j["failures"] = s.failures;
    ordered_json sel = ordered_json::array();
    for (const auto& [ell, r] : s.selection)
        sel.push_back({{"ell", ell}, {"s_minus", r.s_minus}, {"s", r.s_correct}, {"s_plus", r.s_plus}});
    j["selection"] = sel;
    ordered_json metrics = ordered_json::array();
    auto emit = [&](const char* name, const auto& table) {
        for (const auto& [key, st] : table)
            metrics.push_back({{"metric", name},
                               {"ell", key.first},
                               {"h", key.second},
                               {"mean", st.mean},
                               {"mc_se", st.se},
                               {"count", st.count}});
    };
    emit("SL", s.sl);
    emit("AD_a", s.ad_a);
    emit("AD_d", s.ad_d);
    j["metrics"] = metrics;
    j["failure_messages"] = s.failure_messages;
    return j;
}

std::string summary_csv(const montecarlo::McSummary& s)
{
    const auto n = s.scenario.n_vars;
    const auto t = s.scenario.n_obs;
    std::string csv = "N,T,metric,h,value\n";
    for (const auto& [ell, r] : s.selection) {
        csv += fmt::format("{},{},S_minus,{},{}\n", n, t, ell, format_real(r.s_minus));
        csv += fmt::format("{},{},S,{},{}\n", n, t, ell, format_real(r.s_correct));
        csv += fmt::format("{},{},S_plus,{},{}\n", n, t, ell, format_real(r.s_plus));
    }
    auto emit = [&](const char* name, const auto& table) {
        for (const auto& [key, st] : table)
            csv += fmt::format("{},{},{}_{},{},{}\n", n, t, name, pair_key(key.first), key.second,
                               format_real(st.mean));
    };
    emit("SL", s.sl);
    emit("AD_a", s.ad_a);
    emit("AD_d", s.ad_d);
    return csv;
}

int cmd_replicate(ReplicateArgs a, Manifest m, std::ostream& out, std::ostream& err)
{
    if (a.paper_scale)
        a.scenario.replications = 500;
    try {
        a.scenario.validate();
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    const auto start = std::chrono::steady_clock::now();
    montecarlo::McSummary summary;
    try {
        summary = montecarlo::run_scenario(a.scenario);
    } catch (const ScenarioError& e) {
        err << fmt::format("error: {} ({} failures of {})\n", e.what(), e.failures(), e.total());
        return kFailure;
    }
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    const fs::path json_path = dir / "summary.json";
    const fs::path csv_path = dir / "table1.csv";
    write_text(json_path, summary_json(summary).dump(2) + "\n");
    write_text(csv_path, summary_csv(summary));

    m.config = summary_json(summary)["scenario"];
    m.config["workers"] = a.scenario.workers;
    for (std::size_t r = 0; r < a.scenario.replications; ++r)
        m.seeds.push_back(a.scenario.base_seed + r);
    m.outputs = {json_path, csv_path};
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(m, dir / "manifest.json", wall);

    out << summary_csv(summary);
    if (summary.failures)
        err << fmt::format("warning: {} replication(s) failed\n", summary.failures);
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct DataArgs
{
    std::string data;
    bool standardize = false;
    bool no_header = false;
    bool date_column = false;
};

PanelSeries load_data(const DataArgs& d)
{
    CsvOptions opts;
    opts.has_header = !d.no_header;
    opts.skip_first_column = d.date_column;
    PanelSeries s = load_csv(d.data, opts);
    return d.standardize ? standardize(s) : s;
}

void add_data_options(CLI::App* app, DataArgs& d)
{
    app->add_option("--data", d.data, "input panel CSV (rows = time)")->required()->check(CLI::ExistingFile);
    app->add_flag("--standardize", d.standardize, "z-score every column before estimation");
    app->add_flag("--no-header", d.no_header, "the CSV has no header row");
    app->add_flag("--date-column", d.date_column, "skip the first column (dates)");
}

ordered_json selection_json(const lp::LagSelection& sel)
{
    ordered_json j;
    j["p_hat"] = sel.p_hat;
    ordered_json per = ordered_json::array();
    for (const auto& [h, p] : sel.per_horizon)
        per.push_back({{"h", h}, {"p_hat", p}, {"ic", sel.criterion.at(h)}});
    j["per_horizon"] = per;
    return j;
}

struct SelectArgs
{
    DataArgs data;
    std::size_t p_max = 10;
    std::vector<std::size_t> h_select{1};
    std::string out;
    solver::PenaltyConfig config;
};

int cmd_select_lag(const SelectArgs& a, Manifest m, std::ostream& out)
{
    const auto start = std::chrono::steady_clock::now();
    const PanelSeries series = load_data(a.data);
    const auto sel = lp::select_lag(series, a.h_select, a.p_max, a.config);
    const std::string text = selection_json(sel).dump(2) + "\n";
    out << text;
    if (!a.out.empty()) {
        write_text(a.out, text);
        m.config = {{"p_max", a.p_max}, {"h_select", a.h_select}, {"standardize", a.data.standardize},
                    {"penalty", config_json(a.config)}};
        m.inputs = {a.data.data};
        m.outputs = {a.out};
        write_manifest(m, a.out + ".manifest.json",
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return kSuccess;
}

struct IrfArgs
{
    DataArgs data;
    std::size_t p = 0;
    bool select = false;
    std::size_t p_max = 10;
    std::vector<std::size_t> h_select{1};
    std::vector<std::size_t> horizons{1};
    double level = 0.90;
    bool adaptive_residuals = false;
    std::string out_dir = ".";
    solver::PenaltyConfig config;
};

int cmd_irf(const IrfArgs& a, Manifest m, std::ostream& out)
{
    if (a.select == (a.p != 0))
        throw UsageError("give exactly one of --p or --select-lag");
    if (!(a.level > 0.0 && a.level < 1.0))
        throw UsageError("--level must lie in (0, 1)");
    const auto start = std::chrono::steady_clock::now();
    const PanelSeries series = load_data(a.data);

    ordered_json doc;
    std::size_t p = a.p;
    if (a.select) {
        const auto sel = lp::select_lag(series, a.h_select, a.p_max, a.config);
        p = sel.p_hat;
        doc["lag_selection"] = selection_json(sel);
    }
    inference::PipelineOptions opts;
    opts.adaptive_residuals = a.adaptive_residuals;
    const auto bands = inference::irf_with_bands(series, p, a.horizons, a.level, a.config, opts);

    const auto& labels = series.labels();
    std::string csv = "h,response_var,shock_var,estimate,se,lower,upper,selected\n";
    ordered_json jbands = ordered_json::array();
    for (const auto& band : bands) {
        const auto N = band.point.rows();
        ordered_json entries = ordered_json::array();
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < N; ++j) {
                const bool sel = band.selected(i, j);
                csv += fmt::format("{},{},{},{},{},{},{},{}\n", band.horizon, labels[static_cast<std::size_t>(i)],
                                   labels[static_cast<std::size_t>(j)], blank_or(band.point(i, j), sel),
                                   blank_or(band.se(i, j), sel), blank_or(band.lower(i, j), sel),
                                   blank_or(band.upper(i, j), sel), sel ? "true" : "false");
                if (sel)
                    entries.push_back({{"response_var", labels[static_cast<std::size_t>(i)]},
                                       {"shock_var", labels[static_cast<std::size_t>(j)]},
                                       {"estimate", band.point(i, j)},
                                       {"se", band.se(i, j)},
                                       {"lower", band.lower(i, j)},
                                       {"upper", band.upper(i, j)}});
            }
        jbands.push_back({{"h", band.horizon},
                          {"level", band.level},
                          {"selected_count", band.selected.count()},
                          {"clamped_variances", band.n_clamped},
                          {"entries", entries}});
    }
    doc["p"] = p;
    doc["variables"] = labels;
    doc["bands"] = jbands;

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    const fs::path csv_path = dir / "irf.csv";
    const fs::path json_path = dir / "irf.json";
    write_text(csv_path, csv);
    write_text(json_path, doc.dump(2) + "\n");

    m.config = {{"p", p},
                {"select_lag", a.select},
                {"p_max", a.p_max},
                {"h_select", a.h_select},
                {"horizons", a.horizons},
                {"level", a.level},
                {"standardize", a.data.standardize},
                {"adaptive_residuals", a.adaptive_residuals},
                {"penalty", config_json(a.config)}};
    m.inputs = {a.data.data};
    m.outputs = {csv_path, json_path};
    write_manifest(m, dir / "manifest.json",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    out << fmt::format("p = {}; wrote {} and {}\n", p, csv_path.string(), json_path.string());
    return kSuccess;
}

// ---------------------------------------------------------------------------

struct TruthArgs
{
    std::size_t n = 20;
    std::vector<std::size_t> horizons{1, 5, 10};
    std::string out;
};

int cmd_truth(const TruthArgs& a, std::ostream& out)
{
    if (a.n < 2 || a.n % 2 != 0)
        throw UsageError(fmt::format("--n must be even, got {}", a.n));
    std::size_t max_h = 0;
    for (auto h : a.horizons)
        max_h = std::max(max_h, h);
    const auto b = dgp::ma_coefficients(dgp::companion(dgp::table1_dgp(a.n)), max_h);
    std::string csv = "h,row,col,value,abs_value\n";
    for (auto h : a.horizons)
        for (Eigen::Index i = 0; i < b[h].rows(); ++i)
            for (Eigen::Index j = 0; j < b[h].cols(); ++j)
                csv += fmt::format("{},{},{},{},{}\n", h, i + 1, j + 1, format_real(b[h](i, j)),
                                   format_real(std::abs(b[h](i, j))));
    if (a.out.empty())
        out << csv;
    else
        write_text(a.out, csv);
    return kSuccess;
}

// ---------------------------------------------------------------------------

int cmd_rerun(const std::string& manifest_path, std::ostream& out, std::ostream& err)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw UsageError(fmt::format("cannot read manifest '{}'", manifest_path));
    const auto j = ordered_json::parse(in);
    const auto argv = j.at("argv").get<std::vector<std::string>>();
    const auto expected = j.at("outputs");
    std::ostringstream sink;
    const int code = run(argv, sink, err);
    if (code != kSuccess)
        return code;
    bool same = true;
    for (const auto& [path, digest] : expected.items()) {
        const std::string now = file_digest(path);
        const bool ok = now == digest.get<std::string>();
        out << fmt::format("{} {}\n", ok ? "identical" : "DIFFERS  ", path);
        same = same && ok;
    }
    return same ? kSuccess : kFailure;
}

} // namespace

std::string file_digest(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(fmt::format("cannot read '{}' for hashing", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", md[i]);
    return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"High-dimensional local projection: sparse impulse responses with debiased confidence bands"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "simulate the two-lag sparse VAR design to CSV");
    simulate->add_option("--n", sim.n, "number of variables (even)")->capture_default_str();
    simulate->add_option("--t", sim.t, "number of observations")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
    simulate->add_option("--burn-in", sim.burn_in, "discarded initial draws")->capture_default_str();
    simulate->add_option("--out", sim.out, "output CSV path")->required();

    ReplicateArgs rep;
    rep.scenario.workers = default_workers();
    auto* replicate = app.add_subcommand("replicate", "Monte Carlo replication of the selection/estimation table");
    replicate->add_option("--n", rep.scenario.n_vars, "number of variables (even)")->capture_default_str();
    replicate->add_option("--t", rep.scenario.n_obs, "number of observations")->capture_default_str();
    replicate->add_option("--r", rep.scenario.replications, "replications")->capture_default_str();
    replicate->add_option("--horizons", rep.scenario.horizons, "estimation horizons, e.g. 1,5,10")
        ->delimiter(',')
        ->capture_default_str();
    replicate->add_option("--h-select", rep.scenario.h_select, "lag-selection horizons")
        ->delimiter(',')
        ->capture_default_str();
    replicate->add_option("--p-max", rep.scenario.p_max, "largest candidate lag")->capture_default_str();
    replicate->add_option("--seed", rep.scenario.base_seed, "base seed; replication r uses seed + r")
        ->capture_default_str();
    replicate->add_option("--burn-in", rep.scenario.burn_in, "discarded initial draws")->capture_default_str();
    replicate->add_option("--tol-zero", rep.scenario.tol_zero, "|b| <= tol counts as a true zero")
        ->capture_default_str();
    replicate->add_option("--workers", rep.scenario.workers, std::string("worker threads (default $") + kWorkersEnv + ")")
        ->capture_default_str();
    replicate->add_flag("--paper-scale", rep.paper_scale, "use R = 500 replications");
    replicate->add_option("--out-dir", rep.out_dir, "output directory")->capture_default_str();
    add_penalty_options(replicate, rep.scenario.config);

    SelectArgs sel;
    auto* select = app.add_subcommand("select-lag", "information-criterion lag selection on a CSV panel");
    add_data_options(select, sel.data);
    select->add_option("--p-max", sel.p_max, "largest candidate lag")->capture_default_str();
    select->add_option("--h-select", sel.h_select, "selection horizons")->delimiter(',')->capture_default_str();
    select->add_option("--out", sel.out, "also write the JSON here");
    add_penalty_options(select, sel.config);

    IrfArgs irf;
    auto* irf_cmd = app.add_subcommand("irf", "impulse responses with debiased confidence bands from a CSV panel");
    add_data_options(irf_cmd, irf.data);
    irf_cmd->add_option("--p", irf.p, "lag order");
    irf_cmd->add_flag("--select-lag", irf.select, "choose the lag order by information criterion");
    irf_cmd->add_option("--p-max", irf.p_max, "largest candidate lag")->capture_default_str();
    irf_cmd->add_option("--h-select", irf.h_select, "selection horizons")->delimiter(',')->capture_default_str();
    irf_cmd->add_option("--horizons", irf.horizons, "estimation horizons")->delimiter(',')->capture_default_str();
    irf_cmd->add_option("--level", irf.level, "confidence level")->capture_default_str();
    irf_cmd->add_flag("--adaptive-residuals", irf.adaptive_residuals,
                      "build the long-run covariance from adaptive-stage residuals");
    irf_cmd->add_option("--out-dir", irf.out_dir, "output directory")->capture_default_str();
    add_penalty_options(irf_cmd, irf.config);

    TruthArgs truth;
    auto* truth_cmd = app.add_subcommand("truth", "true impulse responses B_h of the simulation design");
    truth_cmd->add_option("--n", truth.n, "number of variables (even)")->capture_default_str();
    truth_cmd->add_option("--horizons", truth.horizons, "horizons")->delimiter(',')->capture_default_str();
    truth_cmd->add_option("--out", truth.out, "output CSV (stdout when omitted)");

    std::string manifest_path;
    auto* rerun = app.add_subcommand("rerun", "re-execute a manifest and compare output digests");
    rerun->add_option("manifest", manifest_path, "manifest.json written by a previous run")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty())
        reversed.pop_back(); // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        err << "run with --help for usage\n";
        return kUsage;
    }

    Manifest manifest;
    manifest.argv = args;
    try {
        if (*simulate) {
            manifest.command = "simulate";
            return cmd_simulate(sim, manifest, out);
        }
        if (*replicate) {
            manifest.command = "replicate";
            return cmd_replicate(rep, manifest, out, err);
        }
        if (*select) {
            manifest.command = "select-lag";
            return cmd_select_lag(sel, manifest, out);
        }
        if (*irf_cmd) {
            manifest.command = "irf";
            return cmd_irf(irf, manifest, out);
        }
        if (*truth_cmd)
            return cmd_truth(truth, out);
        if (*rerun)
            return cmd_rerun(manifest_path, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

} // namespace hdlp::cli
