#include "doctest.h"
#include "seedbank/commands.hpp"
#include "seedbank/config.hpp"
#include "seedbank/errors.hpp"
#include "seedbank/output.hpp"
#include "seedbank/random.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

using namespace seedbank;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("seedbank_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

bool parses_as_xml(const std::string& svg) {
    std::istringstream in(svg);
    boost::property_tree::ptree t;
    try {
        boost::property_tree::read_xml(in, t);
    } catch (const std::exception&) {
        return false;
    }
    return t.count("svg") == 1;
}

} // namespace

TEST_CASE("minimal config gets the documented defaults") {
    const Config c = parse_config_text(R"({"model": "M1"})");
    CHECK(c.run.seed == 1);
    CHECK(c.spec.dt == 0.0);
    CHECK(c.spec.boundary == BoundaryScheme::MomentMatching);
    CHECK(c.fss.trapping.epsilon == kTrapEpsilon);
    CHECK(c.spec.kernel_options.fold_epsilon == 1e-9);
}

TEST_CASE("config errors name the key") {
    try {
        parse_config_text(R"({"initial": {"theta": 1.2}})");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("initial.theta") != std::string::npos);
    }
    try {
        parse_config_text(R"({"kernel": {"type": "nearest_neighbour", "rat": 1}})");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("kernel.rat") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text(R"({"fss": {"observables": []}})"), ConfigError);
}

TEST_CASE("config round trip") {
    const Config c = parse_config_text(R"({
      // comments are allowed
      "run": {"seed": 9, "threads": 3},
      "geography": {"family": "torus", "dimension": 1, "n": 3},
      "kernel": {"type": "heavy_tail", "Q": 0.5, "q": 0.8},
      "seedbank": {"type": "polynomial", "A": 1, "alpha": 0.5, "B": 1, "beta": 2, "M": {"rule": "power", "prefactor": 2, "exponent": 1}},
      "model": "M2",
      "diffusion": {"type": "ohta_kimura", "d": 2},
      "criteria": {"examples": [{"type": "euclidean", "d": 3, "gamma": 0.5}]},
      "fss": {"tasks": ["paths", "fg"], "reference": {"d_star": 0.4}}
    })");
    const nlohmann::json j = emit_config(c);
    CHECK(emit_config(parse_config(j)) == j);
    CHECK(canonical_config(c) == canonical_config(parse_config(j)));
    Config other = c;
    other.run.threads = 8;
    CHECK(canonical_config(other) == canonical_config(c));
}

TEST_CASE("seed derivation") {
    CHECK(derive_seed(1, 2, "noise") == derive_seed(1, 2, "noise"));
    CHECK(derive_seed(1, 2, "noise") != derive_seed(1, 2, "dual"));
    std::unordered_set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 1000000; ++r) seen.insert(derive_seed(42, r, "noise"));
    CHECK(seen.size() == 1000000);
}

TEST_CASE("CSV round trip") {
    Table t{{"a", "b", "label"}, {}};
    t.add({Cell{0.1}, Cell{std::int64_t{3}}, Cell{std::string("x,y")}});
    t.add({Cell{1.0 / 3.0}, Cell{std::int64_t{-7}}, Cell{std::string("quote\"d")}});
    t.add({Cell{1e-300}, Cell{std::int64_t{0}}, Cell{std::string("plain")}});
    const fs::path dir = scratch("csv");
    write_csv(dir / "t.csv", t);
    CHECK(read_csv(dir / "t.csv") == t);
    CHECK_THROWS(to_csv(Table{}));
}

TEST_CASE("SVG output is well-formed") {
    const Series s{"a<b & c", {1, 2, 3, 4}, {1, 0.5, 0.25, 0.125}};
    CHECK(parses_as_xml(svg_line_plot({s}, {"title", "x", "y"})));
    CHECK(parses_as_xml(svg_line_plot({s}, {"log", "x", "y", true, true})));
    CHECK(parses_as_xml(svg_histogram({0.1, 0.2, 0.2, 0.9, std::numeric_limits<double>::infinity()}, 5, {"h", "v", "count"})));
    CHECK(parses_as_xml(svg_histogram({}, 5, {"empty", "v", "count"})));
}

TEST_CASE("commands write outputs and a manifest") {
    Config c = parse_config_text(R"({
      "geography": {"n": 2},
      "forward": {"replicas": 4, "horizon": 1, "observe_every": 0.5},
      "criteria": {"integrals": [{"return_probability": {"type": "power_law", "c": 1, "a": 1.5}}]}
    })");
    const fs::path dir = scratch("cmd");
    CHECK(run_command("forward", c, dir / "f", std::cout) == kExitOk);
    CHECK(fs::exists(dir / "f" / "trajectories.csv"));
    CHECK(fs::exists(dir / "f" / "manifest.json"));
    CHECK(fs::exists(dir / "f" / "config.resolved.json"));
    CHECK(read_csv(dir / "f" / "trajectories.csv").rows.size() == 4 * 3);
    std::ifstream in(dir / "f" / "manifest.json");
    const nlohmann::json m = nlohmann::json::parse(in);
    CHECK(m["master_seed"] == 1);
    CHECK(m["config_hash"].get<std::string>().size() == 16);

    c.run.formats = {"jsonl"};
    CHECK_THROWS_AS(run_command("criteria", c, dir / "c", std::cout), ConfigError);

    std::ostringstream log, err;
    const fs::path cfg = dir / "bad.json";
    std::ofstream(cfg) << R"({"initial": {"theta": 2}})";
    CHECK(execute("forward", cfg, dir / "x", std::nullopt, std::nullopt, log, err) == kExitConfig);
    std::ofstream(cfg) << R"({"run": {"budget": 1}})";
    CHECK(execute("forward", cfg, dir / "x", std::nullopt, std::nullopt, log, err) == kExitBudget);
}
