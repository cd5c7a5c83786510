#include "feetiming/scenario_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <yaml-cpp/yaml.h>

#include "feetiming/errors.hpp"
#include "feetiming/oblivious.hpp"

namespace feetiming {

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

void allow_keys(const YAML::Node& map, const std::set<std::string>& keys, const std::string& where) {
    if (!map.IsMap()) throw ParseError(line_of(map), where + " must be a mapping");
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!keys.count(key)) throw ParseError(line_of(kv.first), "unknown key '" + key + "' in " + where);
    }
}

YAML::Node need(const YAML::Node& map, const std::string& key, const std::string& where) {
    const YAML::Node n = map[key];
    if (!n) throw ParseError(line_of(map), where + " lacks required key '" + key + "'");
    return n;
}

double number(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) throw ParseError(line_of(n), what + " must be a number");
    const std::string& s = n.Scalar();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw ParseError(line_of(n), what + ": '" + s + "' is not a finite number");
    }
    return v;
}

int integer(const YAML::Node& n, const std::string& what) {
    const double v = number(n, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ParseError(line_of(n), what + " must be an integer");
    return static_cast<int>(v);
}

std::string text(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) throw ParseError(line_of(n), what + " must be a string");
    return n.Scalar();
}

// run a model constructor, turning its complaints into line-numbered errors
template <class F>
auto at_line(const YAML::Node& n, F&& make) {
    try {
        return make();
    } catch (const ConfigError& e) {
        throw ParseError(line_of(n), e.what());
    } catch (const DomainError& e) {
        throw ParseError(line_of(n), e.what());
    }
}

BlockIntervalModel read_interval(const YAML::Node& n) {
    allow_keys(n, {"kind", "rate", "duration"}, "interval");
    const auto kind = text(need(n, "kind", "interval"), "interval.kind");
    if (kind == "exponential") {
        if (n["duration"]) throw ParseError(line_of(n["duration"]), "exponential interval takes 'rate', not 'duration'");
        const double rate = number(need(n, "rate", "interval"), "interval.rate");
        return at_line(n, [&] { return BlockIntervalModel::exponential(rate); });
    }
    if (kind == "fixed") {
        if (n["rate"]) throw ParseError(line_of(n["rate"]), "fixed interval takes 'duration', not 'rate'");
        const double d = number(need(n, "duration", "interval"), "interval.duration");
        return at_line(n, [&] { return BlockIntervalModel::fixed(d); });
    }
    throw ParseError(line_of(n["kind"]), "interval.kind must be 'exponential' or 'fixed'");
}

ArrivalProcess read_arrivals(const YAML::Node& n) {
    allow_keys(n, {"kind", "rate"}, "arrivals");
    const auto kind = text(need(n, "kind", "arrivals"), "arrivals.kind");
    const double rate = number(need(n, "rate", "arrivals"), "arrivals.rate");
    if (kind == "linear") return at_line(n, [&] { return ArrivalProcess::linear(rate); });
    if (kind == "poisson") return at_line(n, [&] { return ArrivalProcess::poisson(rate); });
    throw ParseError(line_of(n["kind"]), "arrivals.kind must be 'linear' or 'poisson'");
}

FeeDistribution read_fees(const YAML::Node& n) {
    allow_keys(n, {"kind", "min", "mean", "lo", "hi", "samples"}, "fees");
    const auto kind = text(need(n, "kind", "fees"), "fees.kind");
    auto forbid = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (n[k]) throw ParseError(line_of(n[k]), std::string("key '") + k + "' does not apply to " + kind + " fees");
        }
    };
    if (kind == "pareto") {
        forbid({"lo", "hi", "samples"});
        const double lo = number(need(n, "min", "fees"), "fees.min");
        const double mean = number(need(n, "mean", "fees"), "fees.mean");
        return at_line(n, [&] { return FeeDistribution::pareto(lo, mean); });
    }
    if (kind == "uniform") {
        forbid({"min", "mean", "samples"});
        const double lo = number(need(n, "lo", "fees"), "fees.lo");
        const double hi = number(need(n, "hi", "fees"), "fees.hi");
        return at_line(n, [&] { return FeeDistribution::uniform(lo, hi); });
    }
    if (kind == "empirical") {
        forbid({"min", "mean", "lo", "hi"});
        const YAML::Node s = need(n, "samples", "fees");
        if (!s.IsSequence()) throw ParseError(line_of(s), "fees.samples must be a list");
        std::vector<double> xs;
        for (const auto& x : s) xs.push_back(number(x, "fee sample"));
        return at_line(s, [&] { return FeeDistribution::empirical(std::move(xs)); });
    }
    throw ParseError(line_of(n["kind"]), "fees.kind must be 'pareto', 'uniform' or 'empirical'");
}

CtmcParams read_semi(const YAML::Node& n, const Scenario& s) {
    allow_keys(n, {"n", "gamma", "gamma_s", "v_hat", "eta", "lambda"}, "semi_strategic");
    CtmcParams p;
    p.n = integer(need(n, "n", "semi_strategic"), "semi_strategic.n");
    p.m = s.capacity;
    p.gamma = number(need(n, "gamma", "semi_strategic"), "semi_strategic.gamma");
    p.gamma_s = number(need(n, "gamma_s", "semi_strategic"), "semi_strategic.gamma_s");
    p.v_hat = integer(need(n, "v_hat", "semi_strategic"), "semi_strategic.v_hat");
    if (n["eta"]) p.eta = number(n["eta"], "semi_strategic.eta");
    if (n["lambda"]) {
        p.lambda = number(n["lambda"], "semi_strategic.lambda");
    } else if (s.interval.is_exponential()) {
        p.lambda = s.interval.rate();
    } else {
        throw ParseError(line_of(n), "semi_strategic needs 'lambda' when the interval is fixed");
    }
    at_line(n, [&] {
        p.validate();
        return 0;
    });
    return p;
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(source);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.mark.line + 1, e.msg);
    }
    if (!root || root.IsNull()) throw ParseError(1, "empty scenario");
    allow_keys(root, {"interval", "arrivals", "fees", "capacity", "valuation", "tick", "tie_rule", "semi_strategic"},
               "scenario");

    ScenarioFile f;
    Scenario& s = f.scenario;
    try {
        s.interval = read_interval(need(root, "interval", "scenario"));
        s.arrivals = read_arrivals(need(root, "arrivals", "scenario"));
        s.fees = read_fees(need(root, "fees", "scenario"));
        const YAML::Node cap = need(root, "capacity", "scenario");
        s.capacity = integer(cap, "capacity");
        if (s.capacity < 1) throw ParseError(line_of(cap), "capacity must be at least 1");
        const YAML::Node val = need(root, "valuation", "scenario");
        s.valuation = number(val, "valuation");
        if (root["tick"]) s.tick = number(root["tick"], "tick");
        if (root["tie_rule"]) {
            const auto rule = text(root["tie_rule"], "tie_rule");
            if (rule == "strategic_wins") {
                s.tie_rule = TieRule::StrategicWins;
            } else if (rule == "strategic_loses") {
                s.tie_rule = TieRule::StrategicLoses;
            } else {
                throw ParseError(line_of(root["tie_rule"]), "tie_rule must be 'strategic_wins' or 'strategic_loses'");
            }
        }
        at_line(val, [&] {
            s.validate();
            return 0;
        });
        if (root["semi_strategic"]) f.semi = read_semi(root["semi_strategic"], s);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.mark.line + 1, e.msg);
    }
    return f;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot read scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioFile& f) {
    const Scenario& s = f.scenario;
    std::ostringstream o;
    o << "interval:\n";
    if (s.interval.is_exponential()) {
        o << "  kind: exponential\n  rate: " << num(s.interval.rate()) << "\n";
    } else {
        o << "  kind: fixed\n  duration: " << num(s.interval.duration()) << "\n";
    }
    o << "arrivals:\n  kind: " << (s.arrivals.is_linear() ? "linear" : "poisson") << "\n  rate: " << num(s.arrivals.rate())
      << "\n";
    o << "fees:\n";
    switch (s.fees.kind()) {
        case FeeDistribution::Kind::Pareto:
            o << "  kind: pareto\n  min: " << num(s.fees.pareto_min()) << "\n  mean: " << num(s.fees.pareto_mean()) << "\n";
            break;
        case FeeDistribution::Kind::Uniform:
            o << "  kind: uniform\n  lo: " << num(s.fees.uniform_lo()) << "\n  hi: " << num(s.fees.uniform_hi()) << "\n";
            break;
        case FeeDistribution::Kind::Empirical:
            o << "  kind: empirical\n  samples: [";
            for (std::size_t i = 0; i < s.fees.samples().size(); ++i) o << (i ? ", " : "") << num(s.fees.samples()[i]);
            o << "]\n";
            break;
    }
    o << "capacity: " << s.capacity << "\n";
    o << "valuation: " << num(s.valuation) << "\n";
    o << "tick: " << num(s.tick) << "\n";
    o << "tie_rule: " << (s.tie_rule == TieRule::StrategicWins ? "strategic_wins" : "strategic_loses") << "\n";
    if (f.semi) {
        const CtmcParams& p = *f.semi;
        o << "semi_strategic:\n  n: " << p.n << "\n  gamma: " << num(p.gamma) << "\n  gamma_s: " << num(p.gamma_s)
          << "\n  v_hat: " << p.v_hat << "\n  eta: " << num(p.eta) << "\n  lambda: " << num(p.lambda) << "\n";
    }
    return o.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> parse_grid(const std::string& spec) {
    auto to_num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v)) throw ConfigError("bad number '" + s + "' in grid");
        return v;
    };
    std::vector<std::string> parts;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
    std::vector<double> out;
    if (sep == ':') {
        if (parts.size() != 3) throw ConfigError("range grid must be lo:hi:step");
        const double lo = to_num(parts[0]), hi = to_num(parts[1]), step = to_num(parts[2]);
        if (!(step > 0.0) || hi < lo) throw ConfigError("range grid needs lo <= hi and step > 0");
        const auto count = static_cast<std::int64_t>(std::floor((hi - lo) / step * (1.0 + 1e-12) + 1e-9));
        if (count > 1000000) throw ConfigError("range grid too long");
        for (std::int64_t i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
        return out;
    }
    for (const auto& p : parts) out.push_back(to_num(p));
    if (out.empty()) throw ConfigError("empty grid");
    return out;
}

MempoolSnapshot parse_pool_spec(const std::string& spec, const Scenario& scenario, double elapsed) {
    MempoolSnapshot pool;
    pool.elapsed = elapsed;
    if (spec.empty() || spec == "none") return pool;

    if (spec.rfind("draw:", 0) == 0) {
        std::uint64_t seed = 0;
        try {
            std::size_t used = 0;
            seed = std::stoull(spec.substr(5), &used);
            if (used != spec.size() - 5) throw ConfigError("");
        } catch (const std::exception&) {
            throw ConfigError("bad pool seed in '" + spec + "'");
        }
        Rng rng = make_stream(seed, 0);
        return draw_arrivals(scenario, elapsed, rng).pool_at(elapsed);
    }

    auto read_fee = [](const std::string& token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
        if (used == 0 || used != token.size()) return std::optional<double>{};
        return std::optional<double>{v};
    };

    std::ifstream file(spec);
    if (file) {
        int line_no = 0;
        for (std::string line; std::getline(file, line);) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            const std::string first = line.substr(0, line.find(','));
            const auto fee = read_fee(first);
            if (!fee) {
                if (pool.pending_fees.empty() && line_no <= 2) continue;  // header row
                throw ParseError(line_no, "pool file '" + spec + "': expected a fee, got '" + first + "'");
            }
            pool.pending_fees.push_back(*fee);
        }
        pool.validate();
        return pool;
    }

    std::stringstream ss(spec);
    for (std::string token; std::getline(ss, token, ',');) {
        const auto fee = read_fee(token);
        if (!fee) throw ConfigError("pool '" + spec + "' is neither a file nor a list of fees");
        pool.pending_fees.push_back(*fee);
    }
    pool.validate();
    return pool;
}

}  // namespace feetiming
