#include <doctest.h>

#include <json.hpp>
#include <random>
#include <sstream>

#include "hybridstab/casefile.hpp"
#include "hybridstab/closedloop.hpp"
#include "hybridstab/commands.hpp"
#include "hybridstab/error.hpp"
#include "hybridstab/report.hpp"
#include "random_cases.hpp"

using namespace hybridstab;

namespace {

std::filesystem::path case_path(const char* name) {
    return std::filesystem::path(HYBRIDSTAB_CASE_DIR) / name;
}

const char* kMinimal = R"({
  // two machines
  "meta": {"name": "mini", "frequency_unit": "rad_s"},
  "buses": [
    {"id": 1, "kind": "SG_governor", "params": {"Jw0": 7.4, "kg": 20, "tau": 3, "gamma": 0.02}},
    {"id": 2, "kind": "SyncCondenser", "params": {"Jw0": 5, "gamma": 0.02}}
  ],
  "ac_lines": [{"from": 1, "to": 2, "b": 5}],
  "disturbances": [{"bus": 2, "magnitude": 0.1, "time": 1}]
})";

int line_of(const std::string& text) {
    try {
        (void)parse_case_text(text);
    } catch (const CaseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_SUITE("casefile") {
    TEST_CASE("minimal case with defaults") {
        const CaseFile c = parse_case_text(kMinimal);
        CHECK(c.meta.name == "mini");
        CHECK(c.network.size() == 2);
        CHECK(c.network.angle_scale == 1.0);
        CHECK(c.analysis == CaseAnalysis{});
        REQUIRE(c.network.disturbances.size() == 1);
        CHECK(c.network.disturbances[0].time == 1.0);
    }

    TEST_CASE("per-unit frequency scales the AC angle") {
        std::string text = kMinimal;
        text.replace(text.find("rad_s"), 5, "pu");
        const CaseFile c = parse_case_text(text);
        CHECK(c.network.angle_scale == doctest::Approx(2.0 * std::numbers::pi * 50.0));
    }

    TEST_CASE("round trip of bundled and random cases") {
        for (const char* name : {"ieee9.case", "ieee9_full.case", "ieee9_nodamper.case", "dcgrid_coherent.case",
                                 "dcgrid_incoherent.case", "hvdc_p2p.case", "gfl_single.case",
                                 "condenser_only.case"}) {
            CAPTURE(name);
            const CaseFile c = parse_case(case_path(name));
            const std::string text = serialize_case(c);
            const CaseFile back = parse_case_text(text);
            CHECK(back == c);
            CHECK(serialize_case(back) == text);
            CHECK(case_hash(back) == case_hash(c));
        }
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            CaseFile c;
            c.network = testing::random_case(rng, {});
            c.meta.frequency_unit = c.network.angle_scale == 1.0 ? FrequencyUnit::RadPerSecond : FrequencyUnit::PerUnit;
            const CaseFile back = parse_case_text(serialize_case(c));
            CHECK(back == c);
        }
    }

    TEST_CASE("hash changes with the content") {
        CaseFile a = parse_case_text(kMinimal);
        CaseFile b = a;
        b.network.ac_edges[0].b = 5.000001;
        CHECK(case_hash(a) != case_hash(b));
        CHECK(case_hash(a).size() == 16);
    }

    TEST_CASE("errors carry line numbers and names") {
        const std::string unknown_key = "{\n\"meta\": {\"name\": \"x\"},\n\"colour\": 3,\n\"buses\": []\n}";
        CHECK_THROWS_AS((void)parse_case_text(unknown_key), CaseError);

        CHECK_THROWS_AS((void)parse_case_text(R"({"buses": []})"), CaseError);
        CHECK(line_of("{\n\"buses\": [\n{\"id\": 1,\n") > 0);

        std::string bad_param = kMinimal;
        bad_param.replace(bad_param.find("\"kg\": 20"), 8, "\"kg\": -2");
        CHECK(line_of(bad_param) == 5);
        try {
            (void)parse_case_text(bad_param);
        } catch (const CaseError& e) {
            CHECK(std::string(e.what()).find("kg") != std::string::npos);
        }

        std::string bad_kind = kMinimal;
        bad_kind.replace(bad_kind.find("SyncCondenser"), 13, "Flywheel");
        CHECK(line_of(bad_kind) == 6);

        std::string dc_on_machine = kMinimal;
        dc_on_machine.replace(dc_on_machine.find("\"disturbances\""), 0, "\"dc_lines\": [{\"from\": 1, \"to\": 2, \"g\": 1}],\n  ");
        try {
            (void)parse_case_text(dc_on_machine);
            FAIL("expected CaseError");
        } catch (const CaseError& e) {
            CHECK(std::string(e.what()).find("bus 1") != std::string::npos);
            CHECK(e.line() == 5);
        }

        std::string isolated = kMinimal;
        isolated.replace(isolated.find("\"b\": 5"), 6, "\"b\": 0");
        CHECK_THROWS_AS((void)parse_case_text(isolated), CaseError);

        CHECK_THROWS_AS((void)parse_case(case_path("does_not_exist.case")), CaseError);
    }

    TEST_CASE("reduction of the full 9-bus case") {
        const CaseFile full = parse_case(case_path("ieee9_full.case"));
        const CaseReduction red = reduce_case(full);
        CHECK(red.reduced.network.size() == 3);
        CHECK_FALSE(red.reduced.network.has_passive_buses());
        double load = 0.0, mapped = 0.0;
        for (const auto& b : full.network.buses) load += b.p_load;
        for (const auto& b : red.reduced.network.buses) mapped += b.p_load;
        CHECK(mapped == doctest::Approx(load));
        double step = 0.0;
        for (const auto& d : red.reduced.network.disturbances) step += d.magnitude;
        CHECK(step == doctest::Approx(0.75));
        CHECK_THROWS_AS((void)reduce_case(full, {1, 2, 3, 4, 99}), NetworkError);

        const CaseFile bundled = parse_case(case_path("ieee9.case"));
        CHECK(bundled.network.ac_edges.size() == red.reduced.network.ac_edges.size());
        for (std::size_t e = 0; e < bundled.network.ac_edges.size(); ++e) {
            CHECK(bundled.network.ac_edges[e].b == doctest::Approx(red.reduced.network.ac_edges[e].b).epsilon(1e-12));
        }
    }

    TEST_CASE("number formatting") {
        CHECK(format_number(0.1) == "0.10000000000000001");
        CHECK(format_number(2.0) == "2");
        CHECK(format_number(std::nan("")) == "nan");
        CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    }

    TEST_CASE("report outputs agree and are deterministic") {
        const CaseFile c = parse_case(case_path("dcgrid_incoherent.case"));
        const StabilityReport r = certify(c.network, c.analysis_options());
        const auto j = nlohmann::json::parse(render_report_json(c, r));
        CHECK(j["overall"] == std::string(to_string(r.overall)));
        CHECK(j["case"]["hash"] == case_hash(c));
        REQUIRE(j["conditions"].size() == 7);
        for (std::size_t q = 0; q < 7; ++q) {
            CHECK(j["conditions"][q]["verdict"] == std::string(to_string(r.conditions[q].verdict)));
        }
        const std::string text = render_report_text(c, r);
        CHECK(text.find("overall: " + std::string(to_string(r.overall))) != std::string::npos);

        const ClosedLoopModel m = assemble(c.network);
        const std::vector<double> grid = FrequencyGrid::log_spaced(1e-2, 1e2, 50, 1e-3).omega;
        const std::string a = sweep_csv(c, sweep_rows(m, grid, 1));
        const std::string b = sweep_csv(c, sweep_rows(m, grid, 4));
        CHECK(a == b);
        CHECK(a.find("# case_hash=" + case_hash(c)) != std::string::npos);
        CHECK(a.find("omega,sigma_max_H,lambda_min_herm,margin_1.3,margin_1.4,margin_2.1,margin_2.3\n") !=
              std::string::npos);
    }

    TEST_CASE("command exit codes") {
        std::ostringstream out, err;
        CHECK(cmd_check(case_path("ieee9.case"), {}, out, err) == kExitPass);
        CHECK(cmd_check(case_path("dcgrid_incoherent.case"), {}, out, err) == kExitFail);
        CHECK(cmd_check(case_path("ieee9_full.case"), {}, out, err) == kExitInputError);
        CheckFlags ak;
        ak.auto_kron = true;
        CHECK(cmd_check(case_path("ieee9_full.case"), ak, out, err) == kExitPass);
        CHECK(cmd_check(case_path("missing.case"), {}, out, err) == kExitInputError);
        CHECK(exit_code_for(Verdict::Marginal) == kExitMarginal);
    }

    TEST_CASE("stable step keeps the case sample times") {
        CHECK(stable_step(1e-3, 10.0) == 1e-3);
        const double dt = stable_step(1e-2, 1000.0);
        CHECK(dt <= 0.1 / 1000.0);
        const double ratio = 1e-2 / dt;
        CHECK(std::abs(ratio - std::round(ratio)) < 1e-9);
    }
}
