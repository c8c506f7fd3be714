// The four checkers, their independent re-verifiers, and the seeded sweeps.
#include <catch2/catch_amalgamated.hpp>

#include <dmsec/casestudies.hpp>
#include <dmsec/semantics.hpp>
#include <dmsec/verifier.hpp>

#include "oracles.hpp"

using namespace dmsec;

namespace {

std::vector<process_decl> ping_pong() {
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

    return {a, b};
}

// A leaks one message to B; the policy decides what B may learn of it.
machine secret_machine() {
    process_decl a;
    a.name = "A";
    a.states = {"a0"};
    a.initial = "a0";
    a.outputs = {"secret"};
    a.transitions = {{"a0", true, "secret", "a0"}};

    process_decl b;
    b.name = "B";
    b.states = {"b0"};
    b.initial = "b0";
    b.inputs = {"secret"};
    b.transitions = {{"b0", false, "secret", "b0"}};

    return compose({a, b});
}

filter_monitor constant_filter(bool allow) {
    filter_monitor f;
    f.name = allow ? "allow_all" : "deny_all";
    f.state_names = {"q"};
    if (allow) {
        emit_rule e;
        e.state = 0;
        e.pattern = action_pattern::wildcard();
        f.emits = {e};
    }
    f.finalize();
    return f;
}

}  // namespace

TEST_CASE("compliance holds for the implicit policy") {
    machine m = compose(ping_pong());
    verdict v = check_compliance(m, implicit_policy(m), 6, {});
    CHECK(v.passed);
    CHECK_FALSE(v.cex.has_value());
    CHECK(v.states_explored == count_executions(m, 6));
    CHECK(v.depth_reached == 6);
}

TEST_CASE("an unpermitted flow shows up as a compliance violation") {
    machine m = secret_machine();
    proc_index a = m.proc_id("A"), b = m.proc_id("B");
    msg_index secret = m.message_id("secret");

    security_policy p;
    p.add_top(a, a);
    p.add_top(b, b);

    verdict v = check_compliance(m, p, 4, {});
    REQUIRE_FALSE(v.passed);
    REQUIRE(v.cex.has_value());
    const auto& c = std::get<compliance_counterexample>(*v.cex);
    CHECK(c.domain == b);
    CHECK(c.alpha == execution{});
    CHECK(c.beta == execution{send_action(secret)});
    CHECK(c.shared_purge == execution{});
    CHECK(c.obs_alpha.buffer.empty());
    CHECK(c.obs_beta.buffer == std::vector<msg_index>{secret});

    CHECK(verify_compliance_cex(m, p, c));

    SECTION("tampered counterexamples are rejected with a reason") {
        std::string why;
        auto t = c;
        t.alpha = {recv_action(b, secret)};
        CHECK_FALSE(verify_compliance_cex(m, p, t, &why));
        CHECK(why == "alpha does not replay");

        t = c;
        t.shared_purge = {send_action(secret)};
        CHECK_FALSE(verify_compliance_cex(m, p, t, &why));
        CHECK(why == "stated shared purge is wrong");

        t = c;
        t.beta = c.alpha;
        t.obs_beta = c.obs_alpha;
        CHECK_FALSE(verify_compliance_cex(m, p, t, &why));
        CHECK(why == "observations agree; not a violation");

        t = c;
        t.obs_beta.buffer.clear();
        CHECK_FALSE(verify_compliance_cex(m, p, t, &why));
        CHECK(why == "stated observations are wrong");
    }
}

TEST_CASE("a filter that never permits is as leaky as no filter at all") {
    machine m = secret_machine();
    proc_index a = m.proc_id("A"), b = m.proc_id("B");

    security_policy p;
    p.monitors.push_back(constant_filter(false));
    p.add_top(a, a);
    p.add_top(b, b);
    p.add_filter(a, b, 0);

    verdict v = check_compliance(m, p, 4, {});
    REQUIRE_FALSE(v.passed);
    CHECK(std::get<compliance_counterexample>(*v.cex).domain == b);
}

TEST_CASE("a filter that always permits behaves like a full edge") {
    machine m = secret_machine();
    proc_index a = m.proc_id("A"), b = m.proc_id("B");

    security_policy p;
    p.monitors.push_back(constant_filter(true));
    p.add_top(a, a);
    p.add_top(b, b);
    p.add_filter(a, b, 0);

    CHECK(check_compliance(m, p, 4, {}).passed);
    CHECK(check_local_filter_respect(m, p, a, b).passed);
}

TEST_CASE("filter respect finds the shortest rejected send") {
    machine m = secret_machine();
    proc_index a = m.proc_id("A"), b = m.proc_id("B");
    msg_index secret = m.message_id("secret");

    security_policy p;
    p.monitors.push_back(constant_filter(false));
    p.add_top(a, a);
    p.add_top(b, b);
    p.add_filter(a, b, 0);

    verdict v = check_local_filter_respect(m, p, a, b);
    REQUIRE_FALSE(v.passed);
    const auto& c = std::get<filter_counterexample>(*v.cex);
    CHECK(c.src == a);
    CHECK(c.dst == b);
    CHECK(c.delta == execution{});  // rejected immediately
    CHECK(c.violating == send_action(secret));
    CHECK(verify_filter_cex(m, p, c));

    std::string why;
    auto t = c;
    t.violating = recv_action(b, secret);
    CHECK_FALSE(verify_filter_cex(m, p, t, &why));
    CHECK(why == "violating action is not a send");

    t = c;
    t.delta = {recv_action(b, secret)};
    CHECK_FALSE(verify_filter_cex(m, p, t, &why));
    CHECK(why == "delta is not a local execution of src");
}

TEST_CASE("filter respect honours its exploration mode") {
    // The monitor lets the first send through and rejects the second.
    machine m = secret_machine();
    proc_index a = m.proc_id("A"), b = m.proc_id("B");
    msg_index secret = m.message_id("secret");

    filter_monitor f;
    f.name = "first_only";
    f.state_names = {"q"};
    f.registers = {{"n", 0, 3, 0}};
    monitor_transition t;
    t.from = 0;
    t.pattern = action_pattern::exact(send_action(secret));
    t.guard = expr::expression::parse("n < 3");
    t.updates = {expr::assignment::parse("n := n + 1")};
    t.to = 0;
    f.transitions = {t};
    emit_rule e;
    e.state = 0;
    e.pattern = action_pattern::wildcard();
    e.guard = expr::expression::parse("n < 2");
    f.emits = {e};
    f.finalize();

    security_policy p;
    p.monitors.push_back(f);
    p.add_top(a, a);
    p.add_top(b, b);
    p.add_filter(a, b, 0);

    CHECK(check_local_filter_respect(m, p, a, b, filter_check_mode::to_depth(0)).passed);

    verdict bounded = check_local_filter_respect(m, p, a, b, filter_check_mode::to_depth(1));
    REQUIRE_FALSE(bounded.passed);
    CHECK(std::get<filter_counterexample>(*bounded.cex).delta ==
          execution{send_action(secret)});

    verdict fix = check_local_filter_respect(m, p, a, b, filter_check_mode::to_fixpoint());
    REQUIRE_FALSE(fix.passed);
    CHECK(std::get<filter_counterexample>(*fix.cex).delta == execution{send_action(secret)});
}

TEST_CASE("filter respect requires a filtered edge") {
    machine m = secret_machine();
    security_policy p = implicit_policy(m);
    CHECK_THROWS_AS(check_local_filter_respect(m, p, 0, 1), policy_error);
    CHECK_THROWS_AS(check_local_filter_respect(m, p, 1, 0), policy_error);  // no edge at all
}

TEST_CASE("unwinding holds for ping-pong under the implicit policy") {
    machine m = compose(ping_pong());
    verdict v = check_unwinding(m, implicit_policy(m), canonical_relation(), 6, false, {});
    CHECK(v.passed);
    CHECK(v.states_explored == 4);  // the four states of the cycle
}

TEST_CASE("strict enabledness can fail where plain unwinding holds") {
    machine m = compose(ping_pong());
    security_policy p = implicit_policy(m);

    CHECK(check_unwinding(m, p, canonical_relation(), 6, false, {}).passed);

    verdict v = check_unwinding(m, p, canonical_relation(), 6, true, {});
    REQUIRE_FALSE(v.passed);
    const auto& c = std::get<unwinding_counterexample>(*v.cex);
    CHECK(c.cond == unwinding_counterexample::condition::strict_enabledness);
    CHECK(verify_unwinding_cex(m, p, canonical_relation(), c));
}

TEST_CASE("a missing edge breaks local respect") {
    machine m = compose(ping_pong());
    proc_index a = m.proc_id("A"), b = m.proc_id("B");
    msg_index ping = m.message_id("ping");

    security_policy p;
    p.add_top(a, a);
    p.add_top(b, b);
    p.add_top(b, a);  // only A -> B is forbidden

    verdict v = check_unwinding(m, p, canonical_relation(), 6, false, {});
    REQUIRE_FALSE(v.passed);
    const auto& c = std::get<unwinding_counterexample>(*v.cex);
    CHECK(c.cond == unwinding_counterexample::condition::local_respect);
    CHECK(c.domain == b);
    CHECK(c.to_s == execution{});
    REQUIRE(c.act.has_value());
    CHECK(*c.act == send_action(ping));
    CHECK(verify_unwinding_cex(m, p, canonical_relation(), c));

    std::string why;
    auto t = c;
    t.act = send_action(m.message_id("pong"));
    CHECK_FALSE(verify_unwinding_cex(m, p, canonical_relation(), t, &why));
    CHECK(why == "the action's source may flow to the domain");
}

TEST_CASE("output consistency fails for a relation coarser than the view") {
    machine m = compose(ping_pong());
    security_policy p = implicit_policy(m);

    unwinding_relation state_only{
        "state-only", [](const machine&, proc_index d, const global_state& g) {
            return std::to_string(g.procs[d].state);
        }};

    verdict v = check_unwinding(m, p, state_only, 6, false, {});
    REQUIRE_FALSE(v.passed);
    const auto& c = std::get<unwinding_counterexample>(*v.cex);
    CHECK(c.cond == unwinding_counterexample::condition::output_consistency);
    CHECK(verify_unwinding_cex(m, p, state_only, c));
}

TEST_CASE("step consistency fails when related states diverge") {
    // C cycles c0 -> c1 -> c2 on m. The relation groups c0 with c2 for
    // domain P (and is canonical elsewhere), so the same receipt lands in
    // classes that differ.
    process_decl p0;
    p0.name = "P";
    p0.states = {"p0"};
    p0.initial = "p0";
    p0.outputs = {"m"};
    p0.transitions = {{"p0", true, "m", "p0"}};

    process_decl c0;
    c0.name = "C";
    c0.states = {"c0", "c1", "c2"};
    c0.initial = "c0";
    c0.inputs = {"m"};
    c0.transitions = {
        {"c0", false, "m", "c1"}, {"c1", false, "m", "c2"}, {"c2", false, "m", "c0"}};

    machine m = compose({p0, c0});
    security_policy pol = implicit_policy(m);
    proc_index cp = m.proc_id("C");

    unwinding_relation grouped{
        "grouped", [cp](const machine& mm, proc_index d, const global_state& g) {
            if (d != 0) {
                std::string k = std::to_string(g.procs[d].state);
                for (msg_index b : g.procs[d].buffer) k += "," + mm.message_name(b);
                return k;
            }
            return std::string(g.procs[cp].state == 1 ? "B" : "A");
        }};

    verdict v = check_unwinding(m, pol, grouped, 6, false, {});
    REQUIRE_FALSE(v.passed);
    const auto& c = std::get<unwinding_counterexample>(*v.cex);
    CHECK(c.cond == unwinding_counterexample::condition::step_consistency);
    CHECK(c.domain == 0);
    REQUIRE(c.act.has_value());
    CHECK(c.act->kind == action::op::recv);
    CHECK(verify_unwinding_cex(m, pol, grouped, c));
}

TEST_CASE("local invariants hold or fail with a local path") {
    machine m = compose(ping_pong());
    proc_index b = m.proc_id("B");

    verdict ok = check_invariant(m, b, "state = b0 || state = b1", {});
    CHECK(ok.passed);
    CHECK(ok.states_explored == 2);

    verdict bad = check_invariant(m, b, "state = b0", {});
    REQUIRE_FALSE(bad.passed);
    const auto& c = std::get<invariant_counterexample>(*bad.cex);
    CHECK(c.delta == execution{recv_action(b, m.message_id("ping"))});
    CHECK(c.state_name == "b1");

    auto pred = expr::expression::parse("state = b0");
    CHECK(verify_invariant_cex(m, b, pred, c));

    std::string why;
    auto t = c;
    t.state_name = "b0";
    CHECK_FALSE(verify_invariant_cex(m, b, pred, t, &why));
    CHECK(why == "stated end state is wrong");
}

TEST_CASE("structured state names expose location and fields") {
    process_decl p;
    p.name = "P";
    p.states = {"p0"};
    p.initial = "p0";
    p.outputs = {"go"};
    p.transitions = {{"p0", true, "go", "p0"}};

    process_decl q;
    q.name = "Q";
    q.states = {"Idle", "Run|x=3|y=0", "Dead|x=9"};
    q.initial = "Idle";
    q.inputs = {"go"};
    q.transitions = {{"Idle", false, "go", "Run|x=3|y=0"},
                     {"Run|x=3|y=0", false, "go", "Idle"}};

    machine m = compose({p, q});
    proc_index qi = m.proc_id("Q");

    CHECK(check_invariant(m, qi, "location = Idle || (x = 3 && y = 0)", {}).passed);
    CHECK(check_invariant(m, qi, "location != Dead", {}).passed);  // unreachable states stay out
    CHECK(check_invariant(m, qi, "state = Idle || location = Run", {}).passed);

    verdict bad = check_invariant(m, qi, "location = Run -> x = 4", {});
    REQUIRE_FALSE(bad.passed);
    CHECK(std::get<invariant_counterexample>(*bad.cex).state_name == "Run|x=3|y=0");

    CHECK_THROWS_AS(check_invariant(m, qi, "location = ", {}), expr::parse_error);
}

TEST_CASE("resource limits stop exploration with a dedicated error") {
    case_study cs = build_starlight();
    limits tight;
    tight.max_states = 10;
    CHECK_THROWS_AS(check_compliance(cs.m, cs.policy, 8, tight), resource_limit_error);

    limits timed;
    timed.max_seconds = 0.0;  // first elapsed check fires
    CHECK_THROWS_AS(check_compliance(cs.m, cs.policy, 8, timed), resource_limit_error);

    CHECK_THROWS_AS(check_unwinding(cs.m, cs.policy, canonical_relation(), 7, false, tight),
                    resource_limit_error);
}

TEST_CASE("random machines are deterministic in their seed") {
    for (std::uint64_t seed : {1ull, 17ull, 99ull}) {
        machine m1 = random_machine(seed);
        machine m2 = random_machine(seed);
        REQUIRE(m1.proc_count() == m2.proc_count());
        REQUIRE(m1.message_count() == m2.message_count());
        for (msg_index i = 0; i < m1.message_count(); ++i) {
            CHECK(m1.message_name(i) == m2.message_name(i));
            CHECK(m1.sender_of(i) == m2.sender_of(i));
            CHECK(m1.receivers_of(i) == m2.receivers_of(i));
        }
        CHECK(count_executions(m1, 4) == count_executions(m2, 4));
    }

    machine a = random_machine(3);
    machine b = random_machine(4);
    bool differ = a.proc_count() != b.proc_count() ||
                  a.message_count() != b.message_count() ||
                  count_executions(a, 4) != count_executions(b, 4);
    CHECK(differ);
}

TEST_CASE("random machines respect their configuration bounds") {
    random_machine_config cfg;
    cfg.max_procs = 3;
    cfg.max_states = 2;
    cfg.max_messages = 4;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        machine m = random_machine(seed, cfg);
        CHECK(m.proc_count() >= 2);
        CHECK(m.proc_count() <= 3);
        CHECK(m.message_count() >= 1);
        CHECK(m.message_count() <= 4);
        for (proc_index p = 0; p < m.proc_count(); ++p)
            CHECK(m.proc(p).state_names.size() <= 2);
        for (msg_index mi = 0; mi < m.message_count(); ++mi)
            CHECK_FALSE(m.receivers_of(mi).empty());
    }
}

TEST_CASE("the simulation filter passes its own respect check") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        machine m = random_machine(seed);
        security_policy imp = implicit_policy(m);
        for (const auto& [key, label] : imp.edges) {
            (void)label;
            auto [src, dst] = key;
            if (src == dst || detail::messages_to(m, src, dst).empty()) continue;
            security_policy p = imp;
            p.monitors.push_back(simulation_filter_monitor(m, src, dst));
            p.add_filter(src, dst, 0);
            verdict v = check_local_filter_respect(m, p, src, dst);
            INFO("seed " << seed << " edge " << m.proc(src).name << " -> " << m.proc(dst).name);
            CHECK(v.passed);
        }
    }
}

TEST_CASE("random filter monitors are reproducible and well formed") {
    machine m = random_machine(7);
    security_policy imp = implicit_policy(m);
    for (const auto& [key, label] : imp.edges) {
        (void)label;
        auto [src, dst] = key;
        if (src == dst || detail::messages_to(m, src, dst).empty()) continue;
        for (std::uint64_t fs = 1; fs <= 6; ++fs) {
            filter_monitor f1 = random_filter_monitor(fs, m, src, dst);
            filter_monitor f2 = random_filter_monitor(fs, m, src, dst);
            CHECK(f1.state_names == f2.state_names);
            CHECK(f1.transitions.size() == f2.transitions.size());
            CHECK(f1.emits.size() == f2.emits.size());
        }
    }
}

TEST_CASE("the batch purge agrees with the direct definition") {
    case_study leaky = build_starlight_leaky();
    proc_index l = leaky.m.proc_id("L");

    enumerate_executions(leaky.m, 5, [&](const execution& e, const global_state&) {
        CHECK(purge(leaky.m, leaky.policy, l, e) == naive_purge(leaky.m, leaky.policy, l, e));
        return true;
    });
}

TEST_CASE("seeded sweeps come back clean") {
    sweep_result base = implicit_policy_sweep(20, 5, {}, {});
    CHECK(base.ok());
    CHECK(base.total == 20);
    CHECK(base.states_explored > 0);

    sweep_result resp = respected_filter_sweep(20, 5, {}, {});
    CHECK(resp.ok());
    CHECK(resp.total == 20);

    sweep_result pur = purge_property_sweep(300, {});
    CHECK(pur.ok());
    CHECK(pur.total == 300);
}

TEST_CASE("sweeps are deterministic") {
    sweep_result a = implicit_policy_sweep(10, 5, {}, {});
    sweep_result b = implicit_policy_sweep(10, 5, {}, {});
    CHECK(a.states_explored == b.states_explored);

    sweep_result c = respected_filter_sweep(10, 5, {}, {});
    sweep_result d = respected_filter_sweep(10, 5, {}, {});
    CHECK(c.states_explored == d.states_explored);
}
