// Command line front end: compose machines, explore executions, and run the
// security checks. All machine readable reports go to stdout and contain no
// timing, so repeated runs produce identical bytes.
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmsec/dmsec.hpp"

namespace {

using namespace dmsec;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

struct common_opts {
    bool json = false;
    std::uint64_t max_states = limits{}.max_states;
    double max_seconds = limits{}.max_seconds;

    limits to_limits() const { return {max_states, max_seconds}; }
};

void add_common(CLI::App* cmd, common_opts& o) {
    cmd->add_flag("--json", o.json, "write a machine readable report to stdout");
    cmd->add_option("--max-states", o.max_states,
                    "stop with exit code 3 after exploring this many states");
    cmd->add_option("--max-seconds", o.max_seconds,
                    "stop with exit code 3 after this many seconds");
}

security_policy load_policy_checked(const machine& m, const std::string& path) {
    std::vector<std::string> notes;
    security_policy p = load_policy(m, path, &notes);
    for (const auto& n : notes) std::cerr << "note: " << n << "\n";
    for (const auto& w : validate_policy(m, p)) std::cerr << "warning: " << w.text << "\n";
    return p;
}

json make_report(const std::string& command, json params, const verdict& v, const machine& m) {
    json r;
    r["command"] = command;
    r["params"] = std::move(params);
    r["result"] = v.passed ? "pass" : "violation";
    r["states_explored"] = v.states_explored;
    r["depth_reached"] = v.depth_reached;
    if (v.cex) r["counterexample"] = counterexample_to_json(m, *v.cex);
    return r;
}

int finish_check(const common_opts& o, const std::string& command, json params,
                 const verdict& v, const machine& m, clock_type::time_point start) {
    if (o.json) {
        std::cout << dump_json(make_report(command, std::move(params), v, m));
        return v.passed ? 0 : 1;
    }
    if (v.passed) {
        std::cout << command << ": pass (" << v.states_explored << " states, depth "
                  << v.depth_reached << ", " << seconds_since(start) << " s)\n";
        return 0;
    }
    std::cout << command << ": violation (" << v.states_explored << " states, "
              << seconds_since(start) << " s)\n"
              << render_counterexample(m, *v.cex);
    return 1;
}

json sweep_report(const std::string& suite, json params, const sweep_result& r) {
    json j;
    j["command"] = "selfcheck";
    j["suite"] = suite;
    j["params"] = std::move(params);
    j["result"] = r.ok() ? "pass" : "fail";
    j["total"] = r.total;
    j["failures"] = r.failures;
    j["notes"] = r.notes;
    return j;
}

std::pair<proc_index, proc_index> parse_edge(const machine& m, const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size())
        throw io_error("--edge expects SRC:DST");
    return {m.proc_id(text.substr(0, colon)), m.proc_id(text.substr(colon + 1))};
}

int cmd_compose(const std::string& machine_path, bool as_json) {
    machine m = load_machine(machine_path);
    if (as_json) {
        json procs = json::array();
        for (proc_index p = 0; p < m.proc_count(); ++p) {
            const process& pr = m.proc(p);
            procs.push_back({{"name", pr.name},
                             {"states", pr.state_names.size()},
                             {"inputs", pr.inputs.size()},
                             {"outputs", pr.outputs.size()}});
        }
        std::cout << dump_json(json{{"command", "compose"},
                                    {"params", {{"machine", machine_path}}},
                                    {"result", "pass"},
                                    {"processes", std::move(procs)},
                                    {"messages", m.message_count()}});
        return 0;
    }
    std::cout << "composable: " << m.proc_count() << " processes, " << m.message_count()
              << " messages\n";
    for (proc_index p = 0; p < m.proc_count(); ++p) {
        const process& pr = m.proc(p);
        std::cout << "  " << pr.name << ": " << pr.state_names.size() << " states, "
                  << pr.inputs.size() << " inputs, " << pr.outputs.size() << " outputs\n";
    }
    return 0;
}

int cmd_explore(const std::string& machine_path, std::uint32_t depth, bool count_only,
                const common_opts& o) {
    machine m = load_machine(machine_path);
    detail::limit_guard guard(o.to_limits());
    std::uint64_t count = 0;
    json listing = json::array();
    enumerate_executions(m, depth, [&](const execution& e, const global_state&) {
        guard.tick("explore");
        ++count;
        if (!count_only) {
            if (o.json)
                listing.push_back(m.render(e));
            else
                std::cout << m.render(e) << "\n";
        }
        return true;
    });
    if (o.json) {
        json r{{"command", "explore"},
               {"params", {{"machine", machine_path}, {"depth", depth}}},
               {"result", "pass"},
               {"executions", count}};
        if (!count_only) r["listing"] = std::move(listing);
        std::cout << dump_json(r);
    } else {
        std::cout << count << " executions up to depth " << depth << "\n";
    }
    return 0;
}

int cmd_implicit_policy(const std::string& machine_path, const std::string& out) {
    machine m = load_machine(machine_path);
    std::string text = dump_json(policy_to_json(m, implicit_policy(m)));
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text_file(out, text);
        std::cerr << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_check_compliance(const std::string& machine_path, const std::string& policy_path,
                         std::uint32_t depth, const common_opts& o) {
    auto start = clock_type::now();
    machine m = load_machine(machine_path);
    security_policy p = load_policy_checked(m, policy_path);
    verdict v = check_compliance(m, p, depth, o.to_limits());
    json params{{"machine", machine_path}, {"policy", policy_path}, {"depth", depth}};
    return finish_check(o, "check-compliance", std::move(params), v, m, start);
}

int cmd_check_filter(const std::string& machine_path, const std::string& policy_path,
                     const std::string& edge, std::uint32_t depth, bool has_depth,
                     const common_opts& o) {
    auto start = clock_type::now();
    machine m = load_machine(machine_path);
    security_policy p = load_policy_checked(m, policy_path);
    auto [src, dst] = parse_edge(m, edge);
    filter_check_mode mode =
        has_depth ? filter_check_mode::to_depth(depth) : filter_check_mode::to_fixpoint();
    verdict v = check_local_filter_respect(m, p, src, dst, mode, o.to_limits());
    json params{{"machine", machine_path},
                {"policy", policy_path},
                {"edge", edge},
                {"mode", has_depth ? json(depth) : json("fixpoint")}};
    return finish_check(o, "check-filter", std::move(params), v, m, start);
}

int cmd_check_unwinding(const std::string& machine_path, const std::string& policy_path,
                        std::uint32_t depth, bool strict, const common_opts& o) {
    auto start = clock_type::now();
    machine m = load_machine(machine_path);
    security_policy p = load_policy_checked(m, policy_path);
    verdict v = check_unwinding(m, p, canonical_relation(), depth, strict, o.to_limits());
    json params{{"machine", machine_path},
                {"policy", policy_path},
                {"depth", depth},
                {"relation", "canonical"},
                {"strict_step", strict}};
    return finish_check(o, "check-unwinding", std::move(params), v, m, start);
}

int cmd_check_invariant(const std::string& machine_path, const std::string& process,
                        const std::string& predicate, const common_opts& o) {
    auto start = clock_type::now();
    machine m = load_machine(machine_path);
    proc_index p = m.proc_id(process);
    verdict v = check_invariant(m, p, predicate, o.to_limits());
    json params{{"machine", machine_path}, {"process", process}, {"predicate", predicate}};
    return finish_check(o, "check-invariant", std::move(params), v, m, start);
}

int cmd_casestudy(const std::string& name, bool leaky, const smart_grid_params& grid,
                  const std::string& out_dir, bool as_json) {
    case_study cs;
    if (name == "starlight") {
        cs = leaky ? build_starlight_leaky() : build_starlight();
    } else if (name == "smartgrid") {
        if (leaky) throw io_error("--leaky only applies to the starlight case study");
        cs = build_smartgrid(grid);
    } else {
        throw io_error("unknown case study '" + name + "' (try starlight or smartgrid)");
    }

    std::filesystem::create_directories(out_dir);
    std::string machine_file = out_dir + "/machine.json";
    std::string policy_file = out_dir + "/policy.json";
    write_text_file(machine_file, dump_json(machine_to_json(cs.m)));
    write_text_file(policy_file, dump_json(policy_to_json(cs.m, cs.policy)));

    if (as_json) {
        json inv = json::array();
        for (const auto& [proc, pred] : cs.invariants)
            inv.push_back({{"process", proc}, {"predicate", pred}});
        std::cout << dump_json(json{{"command", "casestudy"},
                                    {"name", cs.name},
                                    {"result", "pass"},
                                    {"files", {machine_file, policy_file}},
                                    {"invariants", std::move(inv)},
                                    {"notes", cs.notes}});
        return 0;
    }
    std::cout << "wrote " << machine_file << " and " << policy_file << "\n";
    for (const auto& n : cs.notes) std::cout << "note: " << n << "\n";
    for (const auto& [proc, pred] : cs.invariants)
        std::cout << "invariant (" << proc << "): " << pred << "\n";
    return 0;
}

int cmd_selfcheck(const std::string& suite, std::uint32_t seeds, std::uint32_t depth,
                  std::uint32_t samples, const common_opts& o) {
    auto start = clock_type::now();
    bool all = suite == "all";
    if (!all && suite != "implicit" && suite != "respect" && suite != "purge")
        throw io_error("unknown suite '" + suite + "' (implicit, respect, purge, or all)");

    json reports = json::array();
    bool ok = true;
    auto run = [&](const std::string& which, const sweep_result& r, json params) {
        ok = ok && r.ok();
        if (o.json) {
            reports.push_back(sweep_report(which, std::move(params), r));
        } else {
            std::cout << "selfcheck " << which << ": " << (r.ok() ? "pass" : "FAIL") << " ("
                      << r.total << " cases, " << seconds_since(start) << " s)\n";
            for (const auto& n : r.notes) std::cout << "  " << n << "\n";
        }
    };

    limits lim = o.to_limits();
    if (all || suite == "implicit")
        run("implicit", implicit_policy_sweep(seeds, depth, {}, lim),
            {{"seeds", seeds}, {"depth", depth}});
    if (all || suite == "respect")
        run("respect", respected_filter_sweep(seeds, depth, {}, lim), {{"seeds", seeds}, {"depth", depth}});
    if (all || suite == "purge")
        run("purge", purge_property_sweep(samples), {{"samples", samples}});

    if (o.json) std::cout << dump_json(reports.size() == 1 ? reports[0] : reports);
    return ok ? 0 : 1;
}

int cmd_replay(const std::string& machine_path, const std::string& policy_path,
               const std::string& report_path) {
    machine m = load_machine(machine_path);
    json report = read_json_file(report_path);
    if (!report.is_object() || !report.contains("counterexample")) {
        std::cerr << "error: report contains no counterexample to replay\n";
        return 2;
    }
    counterexample cex = counterexample_from_json(m, report["counterexample"]);

    auto need_policy = [&]() -> security_policy {
        if (policy_path.empty())
            throw io_error("this counterexample kind needs the policy as second argument");
        return load_policy_checked(m, policy_path);
    };

    std::string why;
    bool confirmed = false;
    if (const auto* c = std::get_if<compliance_counterexample>(&cex)) {
        security_policy p = need_policy();
        confirmed = verify_compliance_cex(m, p, *c, &why);
    } else if (const auto* c = std::get_if<filter_counterexample>(&cex)) {
        security_policy p = need_policy();
        confirmed = verify_filter_cex(m, p, *c, &why);
    } else if (const auto* c = std::get_if<unwinding_counterexample>(&cex)) {
        security_policy p = need_policy();
        std::string relation = "canonical";
        if (report.contains("params") && report["params"].contains("relation"))
            relation = report["params"]["relation"].get<std::string>();
        if (relation != "canonical") throw io_error("unknown relation '" + relation + "'");
        confirmed = verify_unwinding_cex(m, p, canonical_relation(), *c, &why);
    } else if (const auto* c = std::get_if<invariant_counterexample>(&cex)) {
        if (!report.contains("params") || !report["params"].contains("process") ||
            !report["params"].contains("predicate"))
            throw io_error("invariant replay needs process and predicate in the report params");
        proc_index p = m.proc_id(report["params"]["process"].get<std::string>());
        expr::expression pred =
            expr::expression::parse(report["params"]["predicate"].get<std::string>());
        confirmed = verify_invariant_cex(m, p, pred, *c, &why);
    }

    if (confirmed) {
        std::cout << "confirmed\n" << render_counterexample(m, cex);
        return 0;
    }
    std::cout << "not confirmed: " << why << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"information flow security checks for asynchronous message-passing machines"};
    app.require_subcommand(1);

    std::string machine_path, policy_path, out_path, edge, process, predicate, report_path;
    std::string suite = "all";
    std::string study_name;
    std::uint32_t explore_depth = 0, comp_depth = 8, filter_depth = 0, unw_depth = 7,
                  self_depth = 6;
    std::uint32_t seeds = 200, samples = 10000;
    bool count_only = false, strict = false, leaky = false;
    common_opts opts;
    smart_grid_params grid;
    std::function<int()> runner;

    auto* c_compose = app.add_subcommand("compose", "validate a machine file and summarize it");
    c_compose->add_option("machine", machine_path, "machine JSON file")->required();
    c_compose->add_flag("--json", opts.json, "write a machine readable report to stdout");
    c_compose->callback([&] { runner = [&] { return cmd_compose(machine_path, opts.json); }; });

    auto* c_explore = app.add_subcommand("explore", "enumerate executions up to a depth");
    c_explore->add_option("machine", machine_path, "machine JSON file")->required();
    c_explore->add_option("--depth", explore_depth, "exploration depth")->required();
    c_explore->add_flag("--count-only", count_only, "print only the number of executions");
    add_common(c_explore, opts);
    c_explore->callback([&] {
        runner = [&] { return cmd_explore(machine_path, explore_depth, count_only, opts); };
    });

    auto* c_implicit =
        app.add_subcommand("implicit-policy", "derive the policy induced by message flow");
    c_implicit->add_option("machine", machine_path, "machine JSON file")->required();
    c_implicit->add_option("-o,--output", out_path, "write the policy here instead of stdout");
    c_implicit->callback(
        [&] { runner = [&] { return cmd_implicit_policy(machine_path, out_path); }; });

    auto* c_comp = app.add_subcommand(
        "check-compliance", "search executions for observations that leak filtered information");
    c_comp->add_option("machine", machine_path, "machine JSON file")->required();
    c_comp->add_option("policy", policy_path, "policy JSON file")->required();
    c_comp->add_option("--depth", comp_depth, "bound on execution length (default 8)");
    add_common(c_comp, opts);
    c_comp->callback([&] {
        runner = [&] {
            return cmd_check_compliance(machine_path, policy_path, comp_depth, opts);
        };
    });

    auto* c_filter = app.add_subcommand(
        "check-filter", "check that a filtered edge permits every send its source can make");
    c_filter->add_option("machine", machine_path, "machine JSON file")->required();
    c_filter->add_option("policy", policy_path, "policy JSON file")->required();
    c_filter->add_option("--edge", edge, "the filtered edge, as SRC:DST")->required();
    auto* filter_depth_opt = c_filter->add_option(
        "--depth", filter_depth, "bound the source's local runs instead of running to fixpoint");
    add_common(c_filter, opts);
    c_filter->callback([&] {
        bool has_depth = filter_depth_opt->count() > 0;
        runner = [&, has_depth] {
            return cmd_check_filter(machine_path, policy_path, edge, filter_depth, has_depth,
                                    opts);
        };
    });

    auto* c_unw = app.add_subcommand("check-unwinding",
                                     "check the unwinding conditions over reachable states");
    c_unw->add_option("machine", machine_path, "machine JSON file")->required();
    c_unw->add_option("policy", policy_path, "policy JSON file")->required();
    c_unw->add_option("--depth", unw_depth, "reachability depth bound (default 7)");
    c_unw->add_flag("--strict-step", strict, "require related states to enable the same actions");
    add_common(c_unw, opts);
    c_unw->callback([&] {
        runner = [&] {
            return cmd_check_unwinding(machine_path, policy_path, unw_depth, strict, opts);
        };
    });

    auto* c_inv = app.add_subcommand("check-invariant",
                                     "check a predicate over one process's reachable states");
    c_inv->add_option("machine", machine_path, "machine JSON file")->required();
    c_inv->add_option("--process", process, "process name")->required();
    c_inv->add_option("--predicate", predicate, "state predicate")->required();
    add_common(c_inv, opts);
    c_inv->callback([&] {
        runner = [&] { return cmd_check_invariant(machine_path, process, predicate, opts); };
    });

    auto* c_study = app.add_subcommand("casestudy", "write a bundled example system to disk");
    c_study->add_option("name", study_name, "starlight or smartgrid")->required();
    c_study->add_option("-o,--output", out_path, "output directory")->required();
    c_study->add_flag("--leaky", leaky, "starlight: include the high-to-low forwarding defect");
    c_study->add_option("--prosumers", grid.prosumers, "smartgrid: number of prosumers");
    c_study->add_option("--plan-min", grid.plan_min, "smartgrid: smallest plan value");
    c_study->add_option("--plan-max", grid.plan_max, "smartgrid: largest plan value");
    c_study->add_option("--lb", grid.line_lower, "smartgrid: lower line capacity");
    c_study->add_option("--ub", grid.line_upper, "smartgrid: upper line capacity");
    c_study->add_option("--prices", grid.prices, "smartgrid: price values");
    c_study->add_flag("--json", opts.json, "write a machine readable report to stdout");
    c_study->callback([&] {
        runner = [&] { return cmd_casestudy(study_name, leaky, grid, out_path, opts.json); };
    });

    auto* c_self = app.add_subcommand("selfcheck",
                                      "cross-validate the checkers on seeded random systems");
    c_self->add_option("--suite", suite, "implicit, respect, purge, or all (default all)");
    c_self->add_option("--seeds", seeds, "number of random systems (default 200)");
    c_self->add_option("--depth", self_depth, "compliance depth per system (default 6)");
    c_self->add_option("--samples", samples, "samples for the purge suite (default 10000)");
    add_common(c_self, opts);
    c_self->callback([&] {
        runner = [&] { return cmd_selfcheck(suite, seeds, self_depth, samples, opts); };
    });

    auto* c_replay = app.add_subcommand(
        "replay", "re-verify a reported counterexample from first principles");
    c_replay->add_option("machine", machine_path, "machine JSON file")->required();
    c_replay->add_option("policy", policy_path, "policy JSON file (when the kind needs one)");
    c_replay->add_option("--from", report_path, "report produced with --json")->required();
    c_replay->callback([&] {
        runner = [&] { return cmd_replay(machine_path, policy_path, report_path); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return runner ? runner() : 2;
    } catch (const resource_limit_error& e) {
        std::cerr << "resource limit reached: " << e.what() << "\n";
        return 3;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
