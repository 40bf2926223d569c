#include "hdlp/cli.hpp"
#include "hdlp/core.hpp"
#include "hdlp/dgp.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hdlp;

namespace {

struct Run
{
    int code;
    std::string out;
    std::string err;
};

Run hdlp_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "hdlp");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("hdlp_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("help, version and usage errors")
{
    CHECK(hdlp_cli({"--help"}).code == 0);
    CHECK(hdlp_cli({"--help"}).out.find("replicate") != std::string::npos);
    const auto v = hdlp_cli({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out == std::string(cli::kVersion) + "\n");
    CHECK(hdlp_cli({"simulate", "--bogus"}).code == 2);
    CHECK(hdlp_cli({}).code == 2);
    CHECK(hdlp_cli({"simulate", "--n", "7", "--out", "x.csv"}).code == 2);
    CHECK(hdlp_cli({"irf", "--data", "/nonexistent/panel.csv", "--p", "1"}).code == 2);
}

TEST_CASE("simulate writes a panel and a manifest")
{
    const auto dir = scratch("simulate");
    const auto csv = dir / "panel.csv";
    const auto r = hdlp_cli({"simulate", "--n", "6", "--t", "50", "--seed", "9", "--out", csv.string()});
    REQUIRE(r.code == 0);
    const auto panel = load_csv(csv);
    CHECK(panel.n_vars() == 6);
    CHECK(panel.total_rows() == 51);

    const auto direct = dgp::simulate_var(dgp::table1_dgp(6), 50, dgp::kDefaultBurnIn, 9);
    CHECK((panel.values().array() == direct.values().array()).all());

    const auto m = nlohmann::json::parse(slurp(csv.string() + ".manifest.json"));
    CHECK(m.at("command") == "simulate");
    CHECK(m.at("seeds")[0] == 9);
    CHECK(m.at("outputs").at(csv.string()) == cli::file_digest(csv));
    CHECK(cli::file_digest(csv).size() == 64);

    const auto again = hdlp_cli({"rerun", csv.string() + ".manifest.json"});
    CHECK(again.code == 0);
    CHECK(again.out.find("identical") != std::string::npos);
    CHECK(hdlp_cli({"rerun", (dir / "missing.json").string()}).code == 2);
}

TEST_CASE("irf output layout")
{
    const auto dir = scratch("irf");
    const auto csv = dir / "panel.csv";
    REQUIRE(hdlp_cli({"simulate", "--n", "4", "--t", "200", "--seed", "3", "--out", csv.string()}).code == 0);
    const auto out = dir / "out";
    const auto r = hdlp_cli(
        {"irf", "--data", csv.string(), "--p", "2", "--horizons", "1,3", "--out-dir", out.string()});
    REQUIRE(r.code == 0);

    const auto rows = lines(slurp(out / "irf.csv"));
    REQUIRE(rows.size() == 1 + 2 * 16);
    CHECK(rows[0] == "h,response_var,shock_var,estimate,se,lower,upper,selected");
    std::size_t selected = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto c = split(rows[k]);
        REQUIRE(c.size() == 8);
        CHECK((c[0] == "1" || c[0] == "3"));
        if (c[7] == "true") {
            ++selected;
            const double est = std::stod(c[3]), lo = std::stod(c[5]), hi = std::stod(c[6]);
            CHECK(lo <= est);
            CHECK(est <= hi);
            CHECK(std::stod(c[4]) >= 0.0);
        } else {
            CHECK(c[7] == "false");
            for (int j = 3; j <= 6; ++j)
                CHECK(c[static_cast<std::size_t>(j)].empty());
        }
    }
    CHECK(selected > 0);

    const auto doc = nlohmann::json::parse(slurp(out / "irf.json"));
    CHECK(doc.at("p") == 2);
    CHECK(doc.at("variables").size() == 4);
    CHECK(doc.at("bands").size() == 2);
    CHECK(fs::exists(out / "manifest.json"));

    CHECK(hdlp_cli({"irf", "--data", csv.string(), "--out-dir", out.string()}).code == 2);
    CHECK(hdlp_cli({"irf", "--data", csv.string(), "--p", "2", "--select-lag", "--out-dir", out.string()}).code == 2);
    CHECK(hdlp_cli({"irf", "--data", csv.string(), "--p", "2", "--level", "1.5", "--out-dir", out.string()}).code ==
          2);
    CHECK(hdlp_cli({"irf", "--data", csv.string(), "--p", "2", "--horizons", "150", "--out-dir", out.string()})
              .code == 1);
}

TEST_CASE("irf on white noise selects little")
{
    const auto dir = scratch("noise");
    const auto csv = dir / "noise.csv";
    write_csv(dgp::simulate_var(dgp::VarCoefficients({Matrix::Zero(6, 6)}), 400, 0, 21), csv);
    const auto r = hdlp_cli({"irf", "--data", csv.string(), "--select-lag", "--p-max", "3", "--standardize",
                             "--out-dir", (dir / "out").string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(dir / "out" / "irf.csv"));
    std::size_t sel = 0;
    for (std::size_t k = 1; k < rows.size(); ++k)
        sel += split(rows[k])[7] == "true" ? 1 : 0;
    CHECK(sel <= 4);
    const auto doc = nlohmann::json::parse(slurp(dir / "out" / "irf.json"));
    CHECK(doc.contains("lag_selection"));
}

TEST_CASE("select-lag and truth")
{
    const auto dir = scratch("select");
    const auto csv = dir / "panel.csv";
    REQUIRE(hdlp_cli({"simulate", "--n", "6", "--t", "300", "--seed", "5", "--out", csv.string()}).code == 0);
    const auto r = hdlp_cli({"select-lag", "--data", csv.string(), "--p-max", "4", "--h-select", "1,2"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("p_hat").get<int>() >= 1);
    CHECK(j.at("p_hat").get<int>() <= 4);
    CHECK(hdlp_cli({"select-lag", "--data", csv.string(), "--p-max", "200"}).code != 0);

    const auto t = hdlp_cli({"truth", "--n", "4", "--horizons", "1,2"});
    REQUIRE(t.code == 0);
    const auto rows = lines(t.out);
    REQUIRE(rows.size() == 1 + 2 * 16);
    CHECK(rows[0] == "h,row,col,value,abs_value");
    CHECK(rows[1] == "1,1,1,0.25,0.25");
    CHECK(rows[2] == "1,1,2,0,0");
    CHECK(hdlp_cli({"truth", "--n", "3"}).code == 2);
}

TEST_CASE("replicate writes summary files")
{
    const auto dir = scratch("replicate");
    const auto r = hdlp_cli({"replicate", "--n", "4", "--t", "100", "--r", "3", "--horizons", "1,2", "--h-select",
                             "1", "--p-max", "3", "--workers", "2", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(dir / "table1.csv"));
    CHECK(rows[0] == "N,T,metric,h,value");
    CHECK(rows[1].rfind("4,100,S_minus,1,", 0) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j.at("scenario").at("R") == 3);
    CHECK(j.at("replications_used") == 3);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m.at("seeds").size() == 3);
    CHECK(hdlp_cli({"replicate", "--n", "5", "--out-dir", dir.string()}).code == 2);
}
