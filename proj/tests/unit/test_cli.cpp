#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "feetiming/cli.hpp"
#include "feetiming/errors.hpp"
#include "feetiming/scenario_io.hpp"
#include "support.hpp"

using namespace feetiming;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;
using Catch::Matchers::WithinAbs;

namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(FEETIMING_SOURCE_DIR) / "scenarios";

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "feetiming");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
    std::vector<std::vector<std::string>> out;
    std::stringstream ss(csv);
    for (std::string line; std::getline(ss, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        out.push_back(cells);
    }
    return out;
}

double cell(const std::string& csv, const std::string& column, std::size_t row = 0) {
    const auto r = rows(csv);
    REQUIRE(r.size() > row + 1);
    for (std::size_t j = 0; j < r[0].size(); ++j) {
        if (r[0][j] == column) return std::stod(r[row + 1][j]);
    }
    FAIL("no column " << column);
    return 0.0;
}

int parse_error_line(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

std::string scenario(const std::string& name) { return (kScenarios / name).string(); }

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("feetiming_test_" + name); }

const char* kMinimal = R"(interval:
  kind: exponential
  rate: 0.5
arrivals:
  kind: poisson
  rate: 3
fees:
  kind: uniform
  lo: 0
  hi: 1
capacity: 2
valuation: 1
)";

}  // namespace

TEST_CASE("shipped scenarios parse and round-trip", "[cli]") {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(kScenarios)) {
        if (entry.path().extension() != ".yaml") continue;
        ++count;
        INFO(entry.path());
        const ScenarioFile f = load_scenario(entry.path().string());
        const std::string text = serialize_scenario(f);
        CHECK(parse_scenario(text) == f);
        CHECK(serialize_scenario(parse_scenario(text)) == text);
    }
    CHECK(count >= 6);
}

TEST_CASE("random scenarios round-trip exactly", "[cli]") {
    Rng rng = make_stream(99, 0);
    for (int t = 0; t < 200; ++t) {
        ScenarioFile f;
        Scenario& s = f.scenario;
        s.interval = uniform01(rng) < 0.5 ? BlockIntervalModel::exponential(0.01 + uniform01(rng))
                                          : BlockIntervalModel::fixed(0.1 + 20 * uniform01(rng));
        s.arrivals = uniform01(rng) < 0.5 ? ArrivalProcess::linear(50 * uniform01(rng))
                                          : ArrivalProcess::poisson(50 * uniform01(rng));
        const double u = uniform01(rng);
        if (u < 0.4) {
            const double lo = 0.1 + uniform01(rng);
            s.fees = FeeDistribution::pareto(lo, lo * (1.0 + 5 * uniform01(rng)) + 1e-3);
        } else if (u < 0.8) {
            s.fees = FeeDistribution::uniform(uniform01(rng), 1.0 + 3 * uniform01(rng));
        } else {
            std::vector<double> xs;
            for (int i = 0; i < 1 + t % 7; ++i) xs.push_back(10 * uniform01(rng));
            s.fees = FeeDistribution::empirical(xs);
        }
        s.capacity = 1 + t % 50;
        s.valuation = 0.5 + 10 * uniform01(rng);
        s.tick = s.valuation * 1e-9 * (0.5 + uniform01(rng));
        s.tie_rule = t % 3 == 0 ? TieRule::StrategicLoses : TieRule::StrategicWins;
        if (t % 2 == 0 && s.interval.is_exponential()) {
            f.semi = CtmcParams{s.capacity + 1 + t % 5, s.capacity, 1 + t % 9, 0.1 + uniform01(rng),
                                0.1 + uniform01(rng), s.interval.rate(), 0.5 + uniform01(rng)};
        }
        const ScenarioFile back = parse_scenario(serialize_scenario(f));
        REQUIRE(back == f);
    }
}

TEST_CASE("scenario diagnostics carry line numbers", "[cli]") {
    const std::string base = kMinimal;
    CHECK(parse_error_line(base + "colour: red\n") == 13);
    CHECK(parse_error_line(R"(interval:
  kind: exponential
  rate: 0.5
  speed: 2
)") == 4);

    std::string bad_mean = base;
    bad_mean.replace(bad_mean.find("kind: uniform\n  lo: 0\n  hi: 1"), 29, "kind: pareto\n  min: 2\n  mean: 1");
    CHECK(parse_error_line(bad_mean) == 8);

    std::string no_rate = base;
    no_rate.replace(no_rate.find("  rate: 0.5\n"), 12, "");
    CHECK(parse_error_line(no_rate) == 2);

    CHECK(parse_error_line(base + "tick: abc\n") == 13);
    CHECK(parse_error_line(base + "tie_rule: coin_flip\n") == 13);
    CHECK(parse_error_line("interval: [1, 2\n") >= 1);
    CHECK(parse_error_line(base + "semi_strategic:\n  n: 2\n  gamma: 1\n  gamma_s: 1\n  v_hat: 3\n") == 14);
    CHECK_NOTHROW(parse_scenario(base + "semi_strategic:\n  n: 3\n  gamma: 1\n  gamma_s: 1\n  v_hat: 3\n"));
    CHECK(parse_scenario(base + "semi_strategic:\n  n: 3\n  gamma: 1\n  gamma_s: 1\n  v_hat: 3\n").semi->lambda == 0.5);
}

TEST_CASE("grid and pool specifications", "[cli]") {
    CHECK(parse_grid("0,0.5,2") == std::vector<double>{0, 0.5, 2});
    CHECK(parse_grid("0:1:0.25") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
    CHECK(parse_grid("1:1:1") == std::vector<double>{1});
    CHECK_THROWS_AS(parse_grid("1:0:1"), ConfigError);
    CHECK_THROWS_AS(parse_grid("a,b"), ConfigError);

    const Scenario s = parse_scenario(kMinimal).scenario;
    CHECK(parse_pool_spec("", s, 1.0).pending_fees.empty());
    CHECK(parse_pool_spec("3,1,4", s, 1.0).pending_fees == std::vector<double>{3, 1, 4});
    CHECK(parse_pool_spec("3,1,4", s, 1.0).elapsed == 1.0);
    CHECK_THROWS_AS(parse_pool_spec("3,x", s, 1.0), ConfigError);
    CHECK_THROWS_AS(parse_pool_spec("3,-1", s, 1.0), DomainError);

    const auto a = parse_pool_spec("draw:5", s, 4.0);
    const auto b = parse_pool_spec("draw:5", s, 4.0);
    CHECK(a.pending_fees == b.pending_fees);
    CHECK(a.pending_fees.size() > 0);

    const auto path = temp_path("pool.csv");
    {
        std::ofstream f(path);
        f << "fee\n0.5\n0.25,extra\n\n# note\n0.75\n";
    }
    CHECK(parse_pool_spec(path.string(), s, 0.0).pending_fees == std::vector<double>{0.5, 0.25, 0.75});
    fs::remove(path);
}

TEST_CASE("eval subcommand", "[cli]") {
    const auto r = cli({"eval", "--scenario", scenario("ethereum_linear.yaml"), "--valuation", "2"});
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, StartsWith("# feetiming 0.1.0 command=eval seed=1 config="));
    CHECK_THAT(cell(r.out, "utility"), WithinAbs(0.124, 0.03));

    const auto zero = cli({"eval", "--scenario", scenario("bitcoin_poisson.yaml"), "--strategy", "fixed:V"});
    REQUIRE(zero.code == 0);
    CHECK(cell(zero.out, "utility") == 0.0);

    const auto nbr = cli({"eval", "--scenario", scenario("ethereum_poisson.yaml"), "--strategy", "nbr"});
    const auto ibr = cli({"eval", "--scenario", scenario("ethereum_poisson.yaml"), "--strategy", "ibr", "--pool", ""});
    REQUIRE(ibr.code == 0);
    CHECK(cell(nbr.out, "utility") == cell(ibr.out, "utility"));
    CHECK(cell(nbr.out, "fee") == cell(ibr.out, "fee"));
}

TEST_CASE("curve subcommand", "[cli]") {
    const auto one = cli({"curve", "--scenario", scenario("bitcoin_poisson.yaml"), "--grid", "5"});
    const auto ev = cli({"eval", "--scenario", scenario("bitcoin_poisson.yaml"), "--elapsed", "5"});
    REQUIRE(one.code == 0);
    CHECK(cell(one.out, "utility") == cell(ev.out, "utility"));

    const auto pow = cli({"curve", "--scenario", scenario("bitcoin_poisson.yaml"), "--grid", "0:40:5"});
    REQUIRE(pow.code == 0);
    const auto pr = rows(pow.out);
    REQUIRE(pr.size() == 10);
    for (std::size_t i = 2; i < pr.size(); ++i) CHECK(std::stod(pr[i][1]) <= std::stod(pr[i - 1][1]));

    const auto pos = cli({"curve", "--scenario", scenario("ethereum_linear.yaml"), "--grid", "0,2.5,5,9.5"});
    REQUIRE(pos.code == 0);
    const auto qr = rows(pos.out);
    for (std::size_t i = 2; i < qr.size(); ++i) CHECK(qr[i][1] == qr[1][1]);
}

TEST_CASE("ctmc subcommand", "[cli]") {
    const auto r = cli({"ctmc", "--scenario", scenario("bumping_pair.yaml"), "--sweep", "gamma_s=0.5,1,2,4,8"});
    REQUIRE(r.code == 0);
    const auto t = rows(r.out);
    REQUIRE(t.size() == 6);
    CHECK(t[0] == std::vector<std::string>{"variable", "value", "utility", "residual", "state_count"});
    CHECK_THAT(std::stod(t[2][2]), WithinAbs(0.25, 1e-9));
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(std::stod(t[i][3]) <= 1e-10);
        if (i > 1) CHECK(std::stod(t[i][2]) > std::stod(t[i - 1][2]));
    }
}

TEST_CASE("simulate output is reproducible", "[cli]") {
    const auto path_a = temp_path("a.csv");
    const auto path_b = temp_path("b.csv");
    auto read = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const std::vector<std::string> base{"simulate", "--scenario", scenario("bumping.yaml"), "--mode", "semi",
                                        "--trials", "3000", "--seed", "11", "--sweep", "gamma_s=1,4"};
    ::setenv("FEETIMING_THREADS", "1", 1);
    auto args = base;
    args.insert(args.end(), {"--out", path_a.string()});
    REQUIRE(cli(args).code == 0);
    ::setenv("FEETIMING_THREADS", "3", 1);
    args = base;
    args.insert(args.end(), {"--out", path_b.string()});
    REQUIRE(cli(args).code == 0);
    ::unsetenv("FEETIMING_THREADS");
    CHECK(read(path_a) == read(path_b));
    CHECK_THAT(read(path_a), StartsWith("# feetiming 0.1.0 command=simulate seed=11 config="));

    const auto other = cli({"simulate", "--scenario", scenario("bumping.yaml"), "--mode", "semi", "--trials", "3000",
                            "--seed", "12", "--sweep", "gamma_s=1,4"});
    CHECK(other.out != read(path_a));
    fs::remove(path_a);
    fs::remove(path_b);

    const auto obl = cli({"simulate", "--scenario", scenario("ethereum_poisson.yaml"), "--trials", "4000",
                          "--valuation", "3"});
    REQUIRE(obl.code == 0);
    CHECK_THAT(cell(obl.out, "mean_utility"), WithinAbs(0.624, 4 * cell(obl.out, "utility_stderr") + 0.003));
}

TEST_CASE("exit codes", "[cli]") {
    CHECK(cli({}).code == kExitParse);
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"eval"}).code == kExitParse);
    CHECK(cli({"eval", "--scenario", "/nonexistent.yaml"}).code == kExitParse);
    CHECK(cli({"eval", "--scenario", scenario("bumping.yaml"), "--strategy", "guess"}).code == kExitParse);
    CHECK(cli({"curve", "--scenario", scenario("bumping.yaml"), "--grid", "1:0:1"}).code == kExitParse);

    const auto domain = cli({"eval", "--scenario", scenario("bumping.yaml"), "--elapsed", "-1"});
    CHECK(domain.code == kExitDomain);
    CHECK_THAT(domain.err, ContainsSubstring("elapsed"));
    CHECK(cli({"eval", "--scenario", scenario("ethereum_linear.yaml"), "--elapsed", "10"}).code == kExitDomain);
    CHECK(cli({"ctmc", "--scenario", scenario("ethereum_linear.yaml")}).code == kExitDomain);
    CHECK(cli({"eval", "--scenario", scenario("bumping.yaml"), "--format", "json"}).code == kExitDomain);

    const auto bad = temp_path("bad.yaml");
    {
        std::ofstream f(bad);
        f << kMinimal << "extra: 1\n";
    }
    const auto parse = cli({"eval", "--scenario", bad.string()});
    CHECK(parse.code == kExitParse);
    CHECK_THAT(parse.err, ContainsSubstring("line 13"));
    fs::remove(bad);
}
