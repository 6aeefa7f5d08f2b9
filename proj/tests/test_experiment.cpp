#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "spl/experiment.hpp"
#include "spl/suites.hpp"

namespace fs = std::filesystem;
using namespace spl;

namespace {

json base_config() {
    return json::parse(R"({
      "schema_version": 1,
      "seed": 11,
      "domain": {"lo": [0.0], "hi": [1.0], "n": 48},
      "measure": {"kind": "segment", "from": [0.2], "to": [0.7], "count": 30},
      "weights": {"V1": {"random": {"lo": 0.0, "hi": 3.0}}, "V2": 1.0},
      "tasks": ["resolvent_diff", "two_weight_diff", {"kind": "power_diff", "m": 3}]
    })");
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("spl-test-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config validation rejects unknown keys and bad values") {
    CHECK_NOTHROW(parse_config(base_config()));
    auto bad = [](auto edit) {
        json j = base_config();
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["colour"] = 1; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["domain"]["nn"] = 4; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["measure"]["cout"] = 4; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["schema_version"] = 2; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j.erase("tasks"); })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["tasks"] = json::array({"fourier"}); })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["tasks"][2]["m"] = 5; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["operator"] = {{"t", -1.0}}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["operator"] = {{"max_t_raises", 4}}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["domain"]["n"] = 2; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["domain"]["shape"] = {48}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["weights"].erase("V2"); })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["weights"]["V1"] = {{"bump", {{"center", {0.5}}}}}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["analysis"] = {{"window", 3}}; })), ConfigError);
    CHECK_THROWS_AS(parse_config(bad([](json& j) { j["measure"]["from"] = {0.1, 0.2}; })), ConfigError);
}

TEST_CASE("defaults are filled in and the hash ignores key order") {
    ExperimentConfig c = parse_config(base_config());
    CHECK(c.t == 1.0);
    CHECK(c.max_t_raises == 3);
    CHECK(c.raw["operator"]["t"] == 1.0);
    CHECK(c.tasks.size() == 3);
    CHECK(c.tasks[2].m == 3);
    json reordered = json::parse(R"({
      "tasks": ["resolvent_diff", "two_weight_diff", {"m": 3, "kind": "power_diff"}],
      "weights": {"V2": 1.0, "V1": {"random": {"hi": 3.0, "lo": 0.0}}},
      "measure": {"count": 30, "to": [0.7], "from": [0.2], "kind": "segment"},
      "domain": {"n": 48, "hi": [1.0], "lo": [0.0]},
      "seed": 11,
      "schema_version": 1
    })");
    CHECK(parse_config(reordered).hash() == c.hash());
    json other = base_config();
    other["seed"] = 12;
    CHECK(parse_config(other).hash() != c.hash());
    CHECK(c.hash().size() == 16);
}

TEST_CASE("realization: random weights follow the seed, measures follow the spec") {
    ExperimentConfig c = parse_config(base_config());
    Realization a = realize(c), b = realize(c);
    CHECK(a.V1.values == b.V1.values);
    CHECK(a.V1.values.minCoeff() >= 0.0);
    CHECK(a.V1.values.maxCoeff() <= 3.0);
    CHECK((a.V2.values.array() == 1.0).all());
    json j = base_config();
    j["seed"] = 12;
    CHECK(realize(parse_config(j)).V1.values != a.V1.values);
    CHECK(a.measure->size() == 30);

    j = base_config();
    j["measure"] = json::parse(R"({"kind": "union", "parts": [{"kind": "segment", "from": [0.1], "to": [0.3], "count": 5},
                                                              {"kind": "boundary"}]})");
    CHECK(realize(parse_config(j)).measure->size() == 7);
    j["measure"] = json::parse(R"({"kind": "segment", "from": [0.1], "to": [1.3], "count": 5})");
    CHECK_THROWS_AS(realize(parse_config(j)), ConfigError);

    j = base_config();
    j["weights"]["V1"] = json::parse(R"({"steps": {"boxes": [{"lo": [0.0], "hi": [0.45], "value": 2.0}], "default": -1.0}})");
    Realization s = realize(parse_config(j));
    for (int k = 0; k < s.measure->size(); ++k)
        CHECK(s.V1.values(k) == (s.measure->atoms(k, 0) <= 0.45 ? 2.0 : -1.0));
}

TEST_CASE("segment atom count defaults to four per grid step") {
    json j = base_config();
    j["measure"].erase("count");
    CHECK(realize(parse_config(j)).measure->size() == 96);  // 0.5 / (1/48) * 4
}

TEST_CASE("touched cells count distinct cells with nonzero weight") {
    Grid g = Grid::interval(1.0, 10);
    auto m = segment_measure(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), 40);
    CHECK(touched_cells(g, m, Vec::Ones(40)) == 10);
    Vec half = Vec::Zero(40);
    half.head(20).setOnes();
    CHECK(touched_cells(g, m, half) == 5);
}

TEST_CASE("run: zero potential gives an empty spectrum and exit 0") {
    TempDir tmp("zero");
    json j = base_config();
    j["weights"] = {{"V1", 0.0}};
    j["tasks"] = {"resolvent_diff"};
    RunResult r = run_experiment(parse_config(j), tmp.path);
    CHECK(r.exit_code == exit_ok);
    json s = json::parse(slurp(r.dir / "task0_resolvent_diff_summary.json"));
    CHECK(s["n_positive"] == 0);
    CHECK(s["n_negative"] == 0);
    CHECK(s["fit"].is_null());
}

TEST_CASE("run: deterministic outputs, complete manifest, idempotent re-run") {
    TempDir a("det-a"), b("det-b");
    ExperimentConfig c = parse_config(base_config());
    RunResult ra = run_experiment(c, a.path), rb = run_experiment(c, b.path);
    REQUIRE(ra.exit_code == exit_ok);
    CHECK(ra.dir.filename() == c.hash());
    CHECK(ra.manifest["config_hash"] == c.hash());
    CHECK(json::parse(slurp(ra.dir / "config.json")) == c.raw);

    std::set<std::string> listed;
    for (const auto& f : ra.manifest["files"]) CHECK(listed.insert(f.get<std::string>()).second);
    for (const auto& e : fs::directory_iterator(ra.dir)) {
        std::string name = e.path().filename().string();
        if (name == "manifest.json") continue;
        CHECK_MESSAGE(listed.count(name) == 1, name);
        if (e.path().extension() == ".csv") CHECK_MESSAGE(slurp(e.path()) == slurp(rb.dir / name), name);
    }
    CHECK(listed.size() == static_cast<size_t>(std::distance(fs::directory_iterator(ra.dir), fs::directory_iterator{})) - 1);

    for (const auto& t : ra.manifest["tasks"]) {
        json s = json::parse(slurp(ra.dir / t["summary"].get<std::string>()));
        CHECK(s["residual"].get<double>() <= 1e-8);
    }
    RunResult again = run_experiment(c, a.path);
    CHECK(again.reused);
    CHECK(again.manifest == ra.manifest);
}

TEST_CASE("run: t is doubled until the form is positive, at most max_t_raises times") {
    TempDir tmp("raise");
    json j = base_config();
    j["measure"] = json::parse(R"({"kind": "segment", "from": [0.0], "to": [1.0], "count": 40})");
    j["weights"] = {{"V1", -1.5}};
    j["tasks"] = {"resolvent_diff"};
    RunResult r = run_experiment(parse_config(j), tmp.path);
    CHECK(r.exit_code == exit_ok);
    REQUIRE(r.manifest["t_raises"].size() >= 1);
    CHECK(r.manifest["t_raises"][0]["from"] == 1.0);
    CHECK(r.manifest["t_raises"][0]["to"] == 2.0);
    CHECK(r.manifest["t_final"].get<double>() > 1.0);
    for (const auto& m : r.manifest["margins"]) CHECK(m.contains("margin"));

    j["operator"] = {{"max_t_raises", 0}};
    RunResult f = run_experiment(parse_config(j), tmp.path);
    CHECK(f.exit_code == exit_positivity);
    CHECK(f.manifest["status"] == "positivity_failure");

    j["operator"] = {{"max_t_raises", 3}};
    j["weights"] = {{"V1", -1000.0}};
    CHECK(run_experiment(parse_config(j), tmp.path).exit_code == exit_positivity);
}

TEST_CASE("run: Robin task requires the boundary measure") {
    TempDir tmp("robin");
    json j = base_config();
    j["tasks"] = {"robin_diff"};
    RunResult r = run_experiment(parse_config(j), tmp.path);
    CHECK(r.exit_code == exit_validation);

    j["measure"] = {{"kind", "boundary"}};
    j["weights"] = {{"V1", 1.0}, {"V2", 2.0}};
    RunResult ok = run_experiment(parse_config(j), tmp.path);
    CHECK(ok.exit_code == exit_ok);
    json s = json::parse(slurp(ok.dir / "task0_robin_diff_summary.json"));
    CHECK(s["residual"].get<double>() <= 1e-8);
    CHECK(s["n_positive"] == 0);  // V2 > V1 makes the difference negative semidefinite
}

TEST_CASE("sweep writes one run per value and a combined table") {
    TempDir tmp("sweep");
    json j = base_config();
    j["tasks"] = {"resolvent_diff"};
    j["measure"] = json::parse(R"({"kind": "lebesgue"})");
    j["domain"]["n"] = 256;
    ExperimentConfig c = parse_config(j);
    fs::path table;
    auto rs = sweep_experiment(c, "operator.t", {1.0, 2.0, 4.0}, tmp.path, 2, &table);
    REQUIRE(rs.size() == 3);
    for (const auto& r : rs) CHECK(r.exit_code == exit_ok);
    CHECK(rs[0].dir != rs[1].dir);
    CHECK(json::parse(slurp(rs[2].dir / "config.json"))["operator"]["t"] == 4.0);
    std::string text = slurp(table);
    CHECK(text.rfind("value,task,theta_hat,coeff_hat,r2,theta_predicted\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);

    CHECK_THROWS_AS(sweep_experiment(c, "operator.nothing", {1.0}, tmp.path, 1), ConfigError);
    CHECK_THROWS_AS(sweep_experiment(c, "measure.kind", {1.0}, tmp.path, 1), ConfigError);
    CHECK_THROWS_AS(sweep_experiment(c, "domain.n", {32.5}, tmp.path, 1), ConfigError);
}

TEST_CASE("export gathers the fits of a run") {
    TempDir tmp("export");
    json j = base_config();
    j["measure"] = json::parse(R"({"kind": "lebesgue"})");
    j["domain"]["n"] = 256;
    j["weights"] = {{"V1", {{"bump", {{"center", {0.5}}, {"radius", 0.25}, {"amplitude", 1.0}}}}}, {"V2", 0.0}};
    j["tasks"] = json::array({"resolvent_diff", json{{"kind", "power_diff"}, {"m", 2}}});
    RunResult r = run_experiment(parse_config(j), tmp.path);
    REQUIRE(r.exit_code == exit_ok);
    std::string csv = export_manifest(r.dir / "manifest.json", "csv");
    CHECK(csv.rfind("task,kind,term,", 0) == 0);
    CHECK(csv.find("\n0,resolvent_diff,difference,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // the power difference is too smooth to fit
    json doc = json::parse(export_manifest(r.dir / "manifest.json", "json"));
    CHECK(doc["config_hash"] == r.manifest["config_hash"]);
    CHECK(doc["tasks"][0]["fit"]["theta_hat"].get<double>() == doctest::Approx(0.25).epsilon(0.1));
    CHECK(doc["tasks"][1]["m"] == 2);
    CHECK(doc["tasks"][1]["terms"].contains("H2"));
    CHECK_THROWS_AS(export_manifest(r.dir / "manifest.json", "xml"), ConfigError);
}

TEST_CASE("verify suites") {
    for (const char* s : {"kyfan", "norms", "measures", "oracles"}) {
        SuiteResult r = verify_suite(s);
        for (const auto& l : r.lines) CHECK_MESSAGE(l.pass, s, ": ", l.name, " ", l.detail);
        CHECK(r.pass());
    }
    CHECK_THROWS_AS(verify_suite("everything"), std::invalid_argument);
}
