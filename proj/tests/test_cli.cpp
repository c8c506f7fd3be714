// End-to-end runs of the command line tool against its own case studies.
#include <catch2/catch_amalgamated.hpp>

#include <dmsec/casestudies.hpp>
#include <dmsec/io.hpp>
#include <dmsec/semantics.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

using namespace dmsec;

namespace {

const std::string& scratch_root() {
    static std::string dir = [] {
        auto p = std::filesystem::temp_directory_path() / "dmsec-cli-tests";
        std::filesystem::remove_all(p);
        std::filesystem::create_directories(p);
        return p.string();
    }();
    return dir;
}

std::string scratch(const std::string& name) { return scratch_root() + "/" + name; }

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct cli_result {
    int code;
    std::string out;
    std::string err;
};

cli_result run_cli(const std::string& args) {
    static int counter = 0;
    std::string err_file = scratch("stderr-" + std::to_string(counter++));
    std::string cmd = std::string(DMSEC_CLI_BIN) + " " + args + " 2>" + err_file;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    int status = pclose(pipe);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, out, slurp(err_file)};
}

// Writes the starlight pair once and hands out the file paths.
struct starlight_files {
    std::string machine, policy;
    explicit starlight_files(bool leaky) {
        std::string dir = scratch(leaky ? "star-leaky" : "star");
        cli_result r = run_cli("casestudy starlight -o " + dir + (leaky ? " --leaky" : ""));
        REQUIRE(r.code == 0);
        machine = dir + "/machine.json";
        policy = dir + "/policy.json";
    }
};

void write_ping_pong(const std::string& machine_path, const std::string& policy_path) {
    process_decl a;
    a.name = "A";
    a.states = {"a0", "a1"};
    a.initial = "a0";
    a.inputs = {"pong"};
    a.outputs = {"ping"};
    a.transitions = {{"a0", true, "ping", "a1"}, {"a1", false, "pong", "a0"}};
    process_decl b;
    b.name = "B";
    b.states = {"b0", "b1"};
    b.initial = "b0";
    b.inputs = {"ping"};
    b.outputs = {"pong"};
    b.transitions = {{"b0", false, "ping", "b1"}, {"b1", true, "pong", "b0"}};
    machine m = compose({a, b});
    write_text_file(machine_path, dump_json(machine_to_json(m)));
    write_text_file(policy_path, dump_json(policy_to_json(m, implicit_policy(m))));
}

}  // namespace

TEST_CASE("the tool demands one valid subcommand") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);

    cli_result help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("check-compliance") != std::string::npos);
    CHECK(help.out.find("selfcheck") != std::string::npos);
}

TEST_CASE("compose summarizes a machine file") {
    starlight_files star(false);

    cli_result r = run_cli("compose " + star.machine);
    CHECK(r.code == 0);
    CHECK(r.out.find("composable: 4 processes, 7 messages") != std::string::npos);

    cli_result rj = run_cli("compose " + star.machine + " --json");
    REQUIRE(rj.code == 0);
    json j = json::parse(rj.out);
    CHECK(j["command"] == "compose");
    CHECK(j["result"] == "pass");
    CHECK(j["processes"].size() == 4);
    CHECK(j["messages"] == 7);

    CHECK(run_cli("compose " + scratch("missing")).code == 2);
}

TEST_CASE("explore agrees with the in-process execution count") {
    starlight_files star(false);
    machine m = load_machine(star.machine);
    std::uint64_t expected = count_executions(m, 4);

    cli_result r = run_cli("explore " + star.machine + " --depth 4 --count-only");
    CHECK(r.code == 0);
    CHECK(r.out == std::to_string(expected) + " executions up to depth 4\n");

    cli_result rj = run_cli("explore " + star.machine + " --depth 4 --json");
    REQUIRE(rj.code == 0);
    json j = json::parse(rj.out);
    CHECK(j["executions"] == expected);
    CHECK(j["listing"].size() == expected);
    CHECK(j["listing"][0] == "(empty)");

    CHECK(run_cli("explore " + star.machine).code == 2);
}

TEST_CASE("implicit-policy emits a policy the tool itself accepts") {
    starlight_files star(false);
    machine m = load_machine(star.machine);

    cli_result r = run_cli("implicit-policy " + star.machine);
    REQUIRE(r.code == 0);
    security_policy parsed = policy_from_json(m, json::parse(r.out));
    CHECK(parsed.edges.size() == implicit_policy(m).edges.size());

    std::string out_file = scratch("implicit.json");
    cli_result rw = run_cli("implicit-policy " + star.machine + " -o " + out_file);
    CHECK(rw.code == 0);
    CHECK(rw.err.find("wrote " + out_file) != std::string::npos);
    CHECK(json::parse(slurp(out_file)) == json::parse(r.out));

    cli_result chk =
        run_cli("check-compliance " + star.machine + " " + out_file + " --depth 4");
    CHECK(chk.code == 0);
}

TEST_CASE("check-compliance passes the fixed system and flags the leaky one") {
    starlight_files star(false);
    cli_result good = run_cli("check-compliance " + star.machine + " " + star.policy +
                              " --depth 6");
    CHECK(good.code == 0);
    CHECK(good.out.find("check-compliance: pass (740 states, depth 6") != std::string::npos);

    starlight_files leaky(true);
    cli_result bad =
        run_cli("check-compliance " + leaky.machine + " " + leaky.policy + " --depth 6");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("check-compliance: violation") != std::string::npos);
    CHECK(bad.out.find("distinguishes two executions") != std::string::npos);

    cli_result report = run_cli("check-compliance " + leaky.machine + " " + leaky.policy +
                                " --depth 6 --json");
    REQUIRE(report.code == 1);
    json j = json::parse(report.out);
    CHECK(j["result"] == "violation");
    CHECK(j["counterexample"]["kind"] == "compliance");

    std::string report_file = scratch("compliance-report.json");
    write_text_file(report_file, report.out);
    cli_result replay =
        run_cli("replay " + leaky.machine + " " + leaky.policy + " --from " + report_file);
    CHECK(replay.code == 0);
    CHECK(replay.out.rfind("confirmed\n", 0) == 0);
}

TEST_CASE("check-filter finds the exact unpermitted send") {
    starlight_files star(false);
    cli_result good =
        run_cli("check-filter " + star.machine + " " + star.policy + " --edge S:L");
    CHECK(good.code == 0);
    CHECK(good.out.find("check-filter: pass") != std::string::npos);

    starlight_files leaky(true);
    cli_result bad = run_cli("check-filter " + leaky.machine + " " + leaky.policy +
                             " --edge S:L --json");
    REQUIRE(bad.code == 1);
    json j = json::parse(bad.out);
    CHECK(j["params"]["mode"] == "fixpoint");
    CHECK(j["counterexample"]["kind"] == "filter-respect");
    CHECK(j["counterexample"]["delta"] == json::array({"?S cmd"}));
    CHECK(j["counterexample"]["action"] == "!cmdL");

    std::string report_file = scratch("filter-report.json");
    write_text_file(report_file, bad.out);
    cli_result replay =
        run_cli("replay " + leaky.machine + " " + leaky.policy + " --from " + report_file);
    CHECK(replay.code == 0);
    CHECK(replay.out.rfind("confirmed\n", 0) == 0);

    cli_result shallow = run_cli("check-filter " + leaky.machine + " " + leaky.policy +
                                 " --edge S:L --depth 0");
    CHECK(shallow.code == 0);

    cli_result bad_edge =
        run_cli("check-filter " + star.machine + " " + star.policy + " --edge S-L");
    CHECK(bad_edge.code == 2);
    CHECK(bad_edge.err.find("--edge expects SRC:DST") != std::string::npos);

    cli_result bad_proc =
        run_cli("check-filter " + star.machine + " " + star.policy + " --edge S:Q");
    CHECK(bad_proc.code == 2);
    CHECK(bad_proc.err.find("error:") != std::string::npos);
}

TEST_CASE("check-unwinding covers both outcomes and the strict variant") {
    starlight_files star(false);
    cli_result good = run_cli("check-unwinding " + star.machine + " " + star.policy +
                              " --depth 5");
    CHECK(good.code == 0);
    CHECK(good.out.find("check-unwinding: pass (110 states") != std::string::npos);

    std::string m_file = scratch("pp-machine.json"), p_file = scratch("pp-policy.json");
    write_ping_pong(m_file, p_file);
    cli_result plain = run_cli("check-unwinding " + m_file + " " + p_file);
    CHECK(plain.code == 0);

    cli_result strict =
        run_cli("check-unwinding " + m_file + " " + p_file + " --strict-step --json");
    REQUIRE(strict.code == 1);
    json j = json::parse(strict.out);
    CHECK(j["params"]["strict_step"] == true);
    CHECK(j["counterexample"]["condition"] == "strict-enabledness");

    std::string report_file = scratch("unwinding-report.json");
    write_text_file(report_file, strict.out);
    cli_result replay = run_cli("replay " + m_file + " " + p_file + " --from " + report_file);
    CHECK(replay.code == 0);
    CHECK(replay.out.rfind("confirmed\n", 0) == 0);
}

TEST_CASE("check-invariant reports the violating state") {
    std::string m_file = scratch("inv-machine.json"), p_file = scratch("inv-policy.json");
    write_ping_pong(m_file, p_file);

    cli_result holds = run_cli("check-invariant " + m_file +
                               " --process B --predicate 'state = b0 || state = b1'");
    CHECK(holds.code == 0);

    cli_result fails =
        run_cli("check-invariant " + m_file + " --process B --predicate 'state = b0' --json");
    REQUIRE(fails.code == 1);
    json j = json::parse(fails.out);
    CHECK(j["counterexample"]["kind"] == "invariant");
    CHECK(j["counterexample"]["state"] == "b1");

    std::string report_file = scratch("invariant-report.json");
    write_text_file(report_file, fails.out);
    cli_result replay = run_cli("replay " + m_file + " --from " + report_file);
    CHECK(replay.code == 0);
    CHECK(replay.out.rfind("confirmed\n", 0) == 0);

    cli_result bad = run_cli("check-invariant " + m_file + " --process B --predicate '1 + '");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("replay refuses unusable reports and unconfirms tampered ones") {
    starlight_files leaky(true);

    std::string empty_report = scratch("empty-report.json");
    write_text_file(empty_report, dump_json(json{{"command", "check-filter"}}));
    cli_result no_cex =
        run_cli("replay " + leaky.machine + " " + leaky.policy + " --from " + empty_report);
    CHECK(no_cex.code == 2);
    CHECK(no_cex.err.find("no counterexample") != std::string::npos);

    cli_result report = run_cli("check-filter " + leaky.machine + " " + leaky.policy +
                                " --edge S:L --json");
    REQUIRE(report.code == 1);

    std::string missing_policy = scratch("filter-no-policy.json");
    write_text_file(missing_policy, report.out);
    cli_result no_policy = run_cli("replay " + leaky.machine + " --from " + missing_policy);
    CHECK(no_policy.code == 2);
    CHECK(no_policy.err.find("needs the policy") != std::string::npos);

    json tampered = json::parse(report.out);
    tampered["counterexample"]["action"] = "!toggle";
    std::string tampered_file = scratch("filter-tampered.json");
    write_text_file(tampered_file, dump_json(tampered));
    cli_result denied =
        run_cli("replay " + leaky.machine + " " + leaky.policy + " --from " + tampered_file);
    CHECK(denied.code == 1);
    CHECK(denied.out.rfind("not confirmed:", 0) == 0);
}

TEST_CASE("resource limits exit with code 3") {
    starlight_files star(false);
    cli_result states = run_cli("check-compliance " + star.machine + " " + star.policy +
                                " --depth 8 --max-states 10");
    CHECK(states.code == 3);
    CHECK(states.err.find("resource limit reached") != std::string::npos);

    cli_result seconds = run_cli("check-compliance " + star.machine + " " + star.policy +
                                 " --depth 8 --max-seconds 0.0");
    CHECK(seconds.code == 3);
}

TEST_CASE("machine readable reports are byte identical across runs") {
    starlight_files leaky(true);
    std::string args = "check-compliance " + leaky.machine + " " + leaky.policy +
                       " --depth 6 --json";
    cli_result first = run_cli(args), second = run_cli(args);
    CHECK(first.code == second.code);
    CHECK(first.out == second.out);

    std::string explore_args = "explore " + leaky.machine + " --depth 5 --json";
    CHECK(run_cli(explore_args).out == run_cli(explore_args).out);

    json j = json::parse(first.out);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) {
        (void)v;
        keys.push_back(k);
    }
    CHECK(keys == std::vector<std::string>{"command", "params", "result", "states_explored",
                                           "depth_reached", "counterexample"});
}

TEST_CASE("casestudy smartgrid honours its parameters") {
    std::string dir = scratch("grid-small");
    cli_result r = run_cli("casestudy smartgrid -o " + dir +
                           " --prosumers 2 --plan-min -1 --plan-max 1 --lb -1 --ub 1 "
                           "--prices 1 2 --json");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["name"] == "smartgrid");
    REQUIRE(j["invariants"].size() == 2);
    CHECK(j["invariants"][1]["predicate"].get<std::string>().find("Prod") !=
          std::string::npos);

    machine m = load_machine(dir + "/machine.json");
    CHECK(m.proc_count() == 3);
    security_policy p = load_policy(m, dir + "/policy.json");
    CHECK(p.monitors.size() == 1);

    for (const auto& inv : j["invariants"]) {
        cli_result chk = run_cli("check-invariant " + dir + "/machine.json --process " +
                                 inv["process"].get<std::string>() + " --predicate '" +
                                 inv["predicate"].get<std::string>() + "'");
        CHECK(chk.code == 0);
    }

    CHECK(run_cli("casestudy smartgrid -o " + scratch("grid-bad") + " --prosumers 0").code ==
          2);
    CHECK(run_cli("casestudy nosuch -o " + scratch("grid-bad")).code == 2);
    CHECK(run_cli("casestudy smartgrid -o " + scratch("grid-bad") + " --leaky").code == 2);
}

TEST_CASE("selfcheck runs its reduced suites clean") {
    cli_result implicit = run_cli("selfcheck --suite implicit --seeds 5 --depth 4");
    CHECK(implicit.code == 0);
    CHECK(implicit.out.find("selfcheck implicit: pass (5 cases") != std::string::npos);

    cli_result respect = run_cli("selfcheck --suite respect --seeds 5 --depth 4 --json");
    REQUIRE(respect.code == 0);
    json j = json::parse(respect.out);
    CHECK(j["command"] == "selfcheck");
    CHECK(j["suite"] == "respect");
    CHECK(j["result"] == "pass");
    CHECK(j["failures"] == 0);

    cli_result purge = run_cli("selfcheck --suite purge --samples 200 --json");
    REQUIRE(purge.code == 0);
    CHECK(json::parse(purge.out)["result"] == "pass");

    cli_result all = run_cli("selfcheck --seeds 3 --depth 4 --samples 100 --json");
    REQUIRE(all.code == 0);
    json arr = json::parse(all.out);
    REQUIRE(arr.is_array());
    CHECK(arr.size() == 3);

    CHECK(run_cli("selfcheck --suite bogus").code == 2);
}
