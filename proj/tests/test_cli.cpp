#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "secrelay_cli_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path so = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path se = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd =
        std::string(SECRELAY_CLI_PATH) + " " + args + " > " + so.string() + " 2> " + se.string();
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

fs::path write_file(const std::string& name, const std::string& content) {
    const fs::path p = work_dir() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

// Symmetric eavesdropper and no relay links: every bound is exactly zero.
const char* symmetric_config = R"({
  "channel": {
    "subchannels": [
      {"sigma2_relay": 1.0, "sigma2_dest": 1.0, "sigma2_eve": 1.0, "rho1": 0.0, "rho2": 0.0},
      {"sigma2_relay": 0.5, "sigma2_dest": 2.0, "sigma2_eve": 2.0, "rho1": 0.0, "rho2": 0.0}
    ],
    "budget": {"p1": 4.0, "p2": 4.0}
  },
  "solver": {"n_starts": 4, "max_iters": 100}
})";

} // namespace

TEST_CASE("fig3 prints the deterministic coding example") {
    const CliResult r = run_cli("fig3");
    CHECK(r.exit_code == 0);
    CHECK(r.out == "across=4 separate=3\n");
    const CliResult again = run_cli("fig3");
    CHECK(again.out == r.out);
}

TEST_CASE("bounds reports zeros for a symmetric channel") {
    const fs::path cfg = write_file("symmetric.json", symmetric_config);
    const CliResult r = run_cli("bounds --config " + cfg.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["lower"]["value"].get<double>() == 0.0);
    CHECK(j["upper"]["value"].get<double>() == 0.0);
    CHECK(j["deaf"]["upper"]["value"].get<double>() == 0.0);
    CHECK(j.contains("config"));
}

TEST_CASE("bounds writes a report file when asked") {
    const fs::path cfg = write_file("symmetric2.json", symmetric_config);
    const fs::path out = work_dir() / "report.json";
    const CliResult r = run_cli("bounds --config " + cfg.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["lower"]["value"].get<double>() == 0.0);
}

TEST_CASE("malformed JSON exits with the config error code") {
    const fs::path bad = write_file("bad.json", "{ not json");
    const CliResult r = run_cli("bounds --config " + bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("config") != std::string::npos);
}

TEST_CASE("config errors name the offending field") {
    const fs::path cfg = write_file("badfield.json", R"({
      "channel": {"subchannels": [{"sigma2_relay": 1.0, "sigma2_dest": 0.0,
                                    "sigma2_eve": 1.0, "rho1": 0.0, "rho2": 0.0}],
                   "budget": {"p1": 1.0, "p2": 1.0}}
    })");
    const CliResult r = run_cli("bounds --config " + cfg.string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("sigma2_dest") != std::string::npos);
}

TEST_CASE("oversized oracle requests exit with the size error code") {
    const fs::path cfg = write_file("oracle.json", R"({
      "channel": {"subchannels": [
          {"sigma2_relay": 1.0, "sigma2_dest": 1.0, "sigma2_eve": 2.0, "rho1": 1.0, "rho2": 0.5},
          {"sigma2_relay": 1.0, "sigma2_dest": 1.0, "sigma2_eve": 2.0, "rho1": 1.0, "rho2": 0.5},
          {"sigma2_relay": 1.0, "sigma2_dest": 1.0, "sigma2_eve": 2.0, "rho1": 1.0, "rho2": 0.5}],
        "budget": {"p1": 2.0, "p2": 2.0}},
      "solver": {"grid_resolution": 101, "n_starts": 2, "max_iters": 50}
    })");
    const CliResult r = run_cli("oracle-check --config " + cfg.string());
    CHECK(r.exit_code == 3);
}

TEST_CASE("oracle-check agrees with itself on a small instance") {
    const fs::path cfg = write_file("oracle_small.json", R"({
      "channel": {"subchannels": [
          {"sigma2_relay": 1.0, "sigma2_dest": 1.0, "sigma2_eve": 2.0, "rho1": 2.0, "rho2": 0.5}],
        "budget": {"p1": 2.0, "p2": 2.0}},
      "solver": {"grid_resolution": 41, "n_starts": 8}
    })");
    const CliResult r = run_cli("oracle-check --config " + cfg.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("lower:") != std::string::npos);
    CHECK(r.out.find("upper:") != std::string::npos);
    CHECK(r.out.find("deaf:") != std::string::npos);
}

TEST_CASE("sweep produces a deterministic CSV with the expected shape") {
    const fs::path cfg = write_file("sweep.json", R"({
      "scenario": {"n_states": 4, "seed": 42,
                    "budget": {"p1": 64.0, "p2": 64.0}},
      "solver": {"n_starts": 3, "max_iters": 120},
      "sweep": {"d_min": 0.1, "d_max": 1.9, "d_step": 0.1}
    })");
    const fs::path out1 = work_dir() / "sweep1.csv";
    const fs::path out2 = work_dir() / "sweep2.csv";
    const CliResult r1 = run_cli("sweep --config " + cfg.string() + " --out " + out1.string());
    REQUIRE(r1.exit_code == 0);
    const CliResult r2 = run_cli("sweep --config " + cfg.string() + " --out " + out2.string());
    REQUIRE(r2.exit_code == 0);

    const std::string csv1 = slurp(out1);
    CHECK(csv1 == slurp(out2)); // byte-identical

    std::istringstream lines(csv1);
    std::string line;
    int data_rows = 0;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "d,scheme,rate_bits");
    while (std::getline(lines, line)) ++data_rows;
    CHECK(data_rows == 19 * 5);

    // Sidecar records the resolved config and reproduces the CSV.
    const fs::path meta = fs::path(out1.string() + ".meta.json");
    REQUIRE(fs::exists(meta));
    const auto j = nlohmann::json::parse(slurp(meta));
    CHECK(j["seed"].get<std::uint64_t>() == 42);
    CHECK(j["n_states"].get<int>() == 4);
    CHECK(j.contains("solver"));
    CHECK(j.contains("config"));
    const fs::path out3 = work_dir() / "sweep3.csv";
    const CliResult r3 = run_cli("sweep --config " + meta.string() + " --out " + out3.string());
    REQUIRE(r3.exit_code == 0);
    CHECK(slurp(out3) == csv1);
}

TEST_CASE("sweep honors scheme subsets and flag overrides") {
    const fs::path out = work_dir() / "sweep_nr.csv";
    const CliResult r = run_cli(
        "sweep --n-states 3 --seed 7 --d-min 0.2 --d-max 1.0 --d-step 0.4 --schemes no_relay --out " +
        out.string());
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(slurp(out));
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        CHECK(line.find("no_relay") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("unknown scheme names are config errors") {
    const CliResult r = run_cli("sweep --n-states 2 --schemes bogus");
    CHECK(r.exit_code == 2);
}

TEST_CASE("sweep averages over batches when asked") {
    const fs::path cfg = write_file("batches.json", R"({
      "scenario": {"n_states": 3, "seed": 11, "budget": {"p1": 8.0, "p2": 8.0}},
      "solver": {"n_starts": 2, "max_iters": 80},
      "sweep": {"d_min": 0.4, "d_max": 0.4, "d_step": 0.1, "schemes": ["no_relay"], "n_batches": 2}
    })");
    const fs::path out = work_dir() / "batches.csv";
    const CliResult r = run_cli("sweep --config " + cfg.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(out);
    CHECK(csv.find("no_relay") != std::string::npos);

    // A single batch with the same base seed gives a different average.
    const fs::path cfg1 = write_file("batches1.json", R"({
      "scenario": {"n_states": 3, "seed": 11, "budget": {"p1": 8.0, "p2": 8.0}},
      "solver": {"n_starts": 2, "max_iters": 80},
      "sweep": {"d_min": 0.4, "d_max": 0.4, "d_step": 0.1, "schemes": ["no_relay"], "n_batches": 1}
    })");
    const fs::path out1 = work_dir() / "batches1.csv";
    REQUIRE(run_cli("sweep --config " + cfg1.string() + " --out " + out1.string()).exit_code == 0);
    CHECK(slurp(out1) != csv);
}

TEST_CASE("gradcheck reports small errors") {
    const CliResult r = run_cli("gradcheck --seed 3");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("lower: max_rel_error=") != std::string::npos);
    CHECK(r.out.find("upper:") != std::string::npos);
    CHECK(r.out.find("deaf:") != std::string::npos);
}
