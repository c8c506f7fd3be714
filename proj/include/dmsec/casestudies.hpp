// Built-in example systems: the starlight switch (with a leaky variant) and
// a parameterized smart microgrid, each bundled with its intended policy.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "expr.hpp"
#include "policy.hpp"
#include "verifier.hpp"

namespace dmsec {

struct case_study {
    std::string name;
    machine m;
    security_policy policy;
    // Predicates expected to hold in every reachable local state of a
    // process, as (process name, predicate) pairs.
    std::vector<std::pair<std::string, std::string>> invariants;
    std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Starlight switch. A user U drives a switch S that forwards commands to a
// high host H or a low host L depending on a toggled position; replies from H
// come back through S as display updates, and L reports to H directly. The
// policy forbids any flow from H to L and filters S -> L so that command
// forwards are only permitted while the switch points low.

namespace detail {

inline std::vector<process_decl> starlight_decls(bool leaky) {
    process_decl h;
    h.name = "H";
    h.states = {"idle", "replying"};
    h.initial = "idle";
    h.inputs = {"cmdH", "resL"};
    h.outputs = {"res"};
    h.transitions = {
        {"idle", false, "cmdH", "replying"},
        {"idle", false, "resL", "replying"},
        {"replying", true, "res", "idle"},
    };

    process_decl l;
    l.name = "L";
    l.states = {"idle", "replying"};
    l.initial = "idle";
    l.inputs = {"cmdL"};
    l.outputs = {"resL"};
    l.transitions = {
        {"idle", false, "cmdL", "replying"},
        {"replying", true, "resL", "idle"},
    };

    process_decl s;
    s.name = "S";
    s.states = {"h", "hr", "hc", "l", "lr", "lc"};
    s.initial = "h";
    s.inputs = {"cmd", "toggle", "res"};
    s.outputs = {"cmdH", "cmdL", "display"};
    s.transitions = {
        {"h", false, "res", "hr"},    {"hr", true, "display", "h"},
        {"h", false, "cmd", "hc"},    {"hc", true, "cmdH", "h"},
        {"h", false, "toggle", "l"},  {"l", false, "toggle", "h"},
        {"l", false, "res", "lr"},    {"lr", true, "display", "l"},
        {"l", false, "cmd", "lc"},    {"lc", true, "cmdL", "l"},
    };
    if (leaky) s.transitions.push_back({"hc", true, "cmdL", "h"});

    process_decl u;
    u.name = "U";
    u.states = {"u0"};
    u.initial = "u0";
    u.inputs = {"display"};
    u.outputs = {"cmd", "toggle"};
    u.transitions = {
        {"u0", true, "cmd", "u0"},
        {"u0", true, "toggle", "u0"},
        {"u0", false, "display", "u0"},
    };

    return {h, l, s, u};
}

// Permits forwards to the low host only after an odd number of toggles,
// i.e. while the switch points low.
inline filter_monitor starlight_low_filter(const machine& m) {
    filter_monitor f;
    f.name = "f_low";
    f.state_names = {"q0"};
    f.initial = 0;
    f.registers.push_back({"t", 0, 1, 0});

    monitor_transition on_toggle;
    on_toggle.from = 0;
    on_toggle.pattern = action_pattern::exact(
        recv_action(*m.find_proc("S"), *m.find_message("toggle")));
    on_toggle.updates.push_back(expr::assignment::parse("t := (t + 1) mod 2"));
    on_toggle.to = 0;
    f.transitions.push_back(std::move(on_toggle));

    emit_rule allow_low;
    allow_low.state = 0;
    allow_low.pattern = action_pattern::exact(send_action(*m.find_message("cmdL")));
    allow_low.guard = expr::expression::parse("t = 1");
    f.emits.push_back(std::move(allow_low));

    f.finalize();
    return f;
}

inline case_study build_starlight_variant(bool leaky) {
    case_study cs;
    cs.name = leaky ? "starlight-leaky" : "starlight";
    cs.m = compose(starlight_decls(leaky));

    proc_index s = *cs.m.find_proc("S");
    proc_index l = *cs.m.find_proc("L");
    cs.policy = implicit_policy(cs.m);
    cs.policy.monitors.push_back(starlight_low_filter(cs.m));
    cs.policy.add_filter(s, l, std::uint32_t(cs.policy.monitors.size() - 1));

    cs.notes.push_back("flow from H to L is forbidden (no policy edge)");
    cs.notes.push_back("edge S -> L is filtered: forwards only while the switch points low");
    if (leaky)
        cs.notes.push_back("leaky variant: S may also forward to L while pointing high");
    return cs;
}

}  // namespace detail

inline case_study build_starlight() { return detail::build_starlight_variant(false); }
inline case_study build_starlight_leaky() { return detail::build_starlight_variant(true); }

// ---------------------------------------------------------------------------
// Smart microgrid. A grid manager broadcasts a price, collects one
// production plan from every prosumer, and broadcasts the excess over the
// line capacity; prosumers re-plan until the excess is zero. Message values
// are folded into message names ("P(1)", "Plan2(-1)", "E(3)") so the whole
// system stays finite.

inline std::int64_t compute_excess(std::int64_t prod, std::int64_t lower, std::int64_t upper) {
    if (prod > upper) return prod - upper;
    if (prod < lower) return prod - lower;
    return 0;
}

struct smart_grid_params {
    std::uint32_t prosumers = 3;
    std::int64_t plan_min = -2;
    std::int64_t plan_max = 2;
    std::int64_t line_lower = -3;
    std::int64_t line_upper = 3;
    std::vector<std::int64_t> prices = {1, 2};
    std::uint64_t state_limit = 1'000'000;
};

inline std::int64_t compute_excess(std::int64_t prod, const smart_grid_params& p) {
    return compute_excess(prod, p.line_lower, p.line_upper);
}

namespace detail {

inline std::string price_msg(std::int64_t p) { return "P(" + std::to_string(p) + ")"; }
inline std::string excess_msg(std::int64_t v) { return "E(" + std::to_string(v) + ")"; }
inline std::string plan_msg(std::uint32_t i, std::int64_t v) {
    return "Plan" + std::to_string(i + 1) + "(" + std::to_string(v) + ")";
}

struct smg_state {
    enum class loc : std::uint8_t { init, price_sent, collect, excess_sent };

    loc where{loc::init};
    std::int64_t price{0};
    std::int64_t prod{0};
    std::uint32_t recv{0};
    std::int64_t excess{0};

    friend auto operator<=>(const smg_state&, const smg_state&) = default;

    std::string name() const {
        const char* l = where == loc::init          ? "Init"
                        : where == loc::price_sent  ? "Price_Sent"
                        : where == loc::collect     ? "Collect_Plans"
                                                    : "Excess_Sent";
        return std::string(l) + "|price=" + std::to_string(price) +
               "|Prod=" + std::to_string(prod) + "|recv=" + std::to_string(recv) +
               "|excess=" + std::to_string(excess);
    }
};

// The grid manager's automaton, explored forward from Init so only reachable
// configurations become states.
inline process_decl smg_process(const smart_grid_params& p) {
    process_decl d;
    d.name = "SMG";

    const std::uint32_t full = (1u << p.prosumers) - 1;
    std::map<smg_state, bool> seen;
    std::vector<smg_state> work{smg_state{}};
    seen[work[0]] = true;

    auto push = [&](const smg_state& s) {
        if (seen.emplace(s, true).second) {
            if (seen.size() > p.state_limit)
                throw resource_limit_error("smart grid exceeds the configured state limit");
            work.push_back(s);
        }
    };

    while (!work.empty()) {
        smg_state s = work.back();
        work.pop_back();
        switch (s.where) {
            case smg_state::loc::init:
                for (std::int64_t pr : p.prices) {
                    smg_state t{smg_state::loc::price_sent, pr, 0, 0, 0};
                    d.transitions.push_back({s.name(), true, price_msg(pr), t.name()});
                    push(t);
                }
                break;
            case smg_state::loc::price_sent:
            case smg_state::loc::collect: {
                if (s.where == smg_state::loc::collect && s.recv == full) {
                    std::int64_t x = compute_excess(s.prod, p);
                    smg_state t{smg_state::loc::excess_sent, 0, s.prod, full, x};
                    d.transitions.push_back({s.name(), true, excess_msg(x), t.name()});
                    push(t);
                    break;
                }
                for (std::uint32_t i = 0; i < p.prosumers; ++i) {
                    if (s.recv & (1u << i)) continue;
                    for (std::int64_t v = p.plan_min; v <= p.plan_max; ++v) {
                        smg_state t{smg_state::loc::collect, 0, s.prod + v, s.recv | (1u << i),
                                    s.excess};
                        d.transitions.push_back({s.name(), false, plan_msg(i, v), t.name()});
                        push(t);
                    }
                }
                break;
            }
            case smg_state::loc::excess_sent:
                if (s.excess == 0) {
                    for (std::int64_t pr : p.prices) {
                        smg_state t{smg_state::loc::price_sent, pr, 0, 0, 0};
                        d.transitions.push_back({s.name(), true, price_msg(pr), t.name()});
                        push(t);
                    }
                } else {
                    for (std::uint32_t i = 0; i < p.prosumers; ++i) {
                        for (std::int64_t v = p.plan_min; v <= p.plan_max; ++v) {
                            smg_state t{smg_state::loc::collect, 0, v, 1u << i, s.excess};
                            d.transitions.push_back({s.name(), false, plan_msg(i, v), t.name()});
                            push(t);
                        }
                    }
                }
                break;
        }
    }

    std::set<std::string> states, inputs, outputs;
    states.insert(smg_state{}.name());
    for (const auto& t : d.transitions) {
        states.insert(t.from);
        states.insert(t.to);
        (t.is_send ? outputs : inputs).insert(t.msg);
    }
    d.states.assign(states.begin(), states.end());
    d.initial = smg_state{}.name();
    d.inputs.assign(inputs.begin(), inputs.end());
    d.outputs.assign(outputs.begin(), outputs.end());
    return d;
}

inline process_decl prosumer_process(const smart_grid_params& p, std::uint32_t i,
                                     const std::vector<std::int64_t>& excess_values) {
    process_decl d;
    d.name = "Pr" + std::to_string(i + 1);
    d.states = {"Idle", "Planning", "WaitE"};
    d.initial = "Idle";
    for (std::int64_t pr : p.prices) {
        d.inputs.push_back(price_msg(pr));
        d.transitions.push_back({"Idle", false, price_msg(pr), "Planning"});
    }
    for (std::int64_t v = p.plan_min; v <= p.plan_max; ++v) {
        d.outputs.push_back(plan_msg(i, v));
        d.transitions.push_back({"Planning", true, plan_msg(i, v), "WaitE"});
    }
    for (std::int64_t x : excess_values) {
        d.inputs.push_back(excess_msg(x));
        d.transitions.push_back({"WaitE", false, excess_msg(x), x == 0 ? "Idle" : "Planning"});
    }
    return d;
}

// The per-edge filter: a price may open a round only from the start or after
// a settled round; an excess announcement must match the plans received since
// the last price or announcement. Registers mirror the grid manager's own
// bookkeeping, so the correct manager respects the filter by construction.
inline filter_monitor smartgrid_excess_filter(const machine& m, const smart_grid_params& p,
                                              const std::vector<std::int64_t>& excess_values) {
    proc_index smg = *m.find_proc("SMG");

    filter_monitor f;
    f.name = "f_excess";
    f.state_names = {"Start", "AfterP_ok", "AfterP_bad", "Collect", "AfterE0", "AfterEnz"};
    f.initial = 0;
    const state_index st_start = 0, st_p_ok = 1, st_p_bad = 2, st_collect = 3, st_e0 = 4,
                      st_enz = 5;

    std::int64_t prod_lo = std::min<std::int64_t>(0, std::int64_t(p.prosumers) * p.plan_min);
    std::int64_t prod_hi = std::max<std::int64_t>(0, std::int64_t(p.prosumers) * p.plan_max);
    for (std::uint32_t i = 0; i < p.prosumers; ++i)
        f.registers.push_back({"rcv" + std::to_string(i + 1), 0, 1, 0});
    f.registers.push_back({"dup", 0, 1, 0});
    f.registers.push_back({"sealed", 0, 1, 0});
    f.registers.push_back({"Prod", prod_lo, prod_hi, 0});

    std::vector<msg_index> price_msgs;
    for (std::int64_t pr : p.prices) price_msgs.push_back(*m.find_message(price_msg(pr)));

    auto reset_round = [&](monitor_transition& t) {
        for (std::uint32_t i = 0; i < p.prosumers; ++i)
            t.updates.push_back(expr::assignment::parse("rcv" + std::to_string(i + 1) + " := 0"));
        t.updates.push_back(expr::assignment::parse("dup := 0"));
        t.updates.push_back(expr::assignment::parse("sealed := 0"));
        t.updates.push_back(expr::assignment::parse("Prod := 0"));
    };

    for (state_index from = st_start; from <= st_enz; ++from) {
        monitor_transition t;
        t.from = from;
        t.pattern = action_pattern::sends_of(price_msgs);
        t.to = (from == st_start || from == st_e0) ? st_p_ok : st_p_bad;
        reset_round(t);
        f.transitions.push_back(std::move(t));
    }

    for (std::uint32_t i = 0; i < p.prosumers; ++i) {
        std::string rcv = "rcv" + std::to_string(i + 1);
        for (std::int64_t v = p.plan_min; v <= p.plan_max; ++v) {
            action recv = recv_action(smg, *m.find_message(plan_msg(i, v)));
            for (state_index from : {st_start, st_p_ok, st_p_bad, st_collect}) {
                monitor_transition fresh;
                fresh.from = from;
                fresh.pattern = action_pattern::exact(recv);
                fresh.guard = expr::expression::parse(rcv + " = 0");
                fresh.updates.push_back(expr::assignment::parse(rcv + " := 1"));
                fresh.updates.push_back(
                    expr::assignment::parse("Prod := Prod + (" + std::to_string(v) + ")"));
                fresh.updates.push_back(expr::assignment::parse("sealed := 0"));
                fresh.to = st_collect;
                f.transitions.push_back(std::move(fresh));

                monitor_transition repeat;
                repeat.from = from;
                repeat.pattern = action_pattern::exact(recv);
                repeat.guard = expr::expression::parse(rcv + " = 1");
                repeat.updates.push_back(expr::assignment::parse("dup := 1"));
                repeat.updates.push_back(expr::assignment::parse("sealed := 0"));
                repeat.to = st_collect;
                f.transitions.push_back(std::move(repeat));
            }
            for (state_index from : {st_e0, st_enz}) {
                monitor_transition restart;
                restart.from = from;
                restart.pattern = action_pattern::exact(recv);
                for (std::uint32_t j = 0; j < p.prosumers; ++j)
                    restart.updates.push_back(expr::assignment::parse(
                        "rcv" + std::to_string(j + 1) + (j == i ? " := 1" : " := 0")));
                restart.updates.push_back(expr::assignment::parse("dup := 0"));
                restart.updates.push_back(expr::assignment::parse("sealed := 0"));
                restart.updates.push_back(
                    expr::assignment::parse("Prod := " + std::to_string(v)));
                restart.to = st_collect;
                f.transitions.push_back(std::move(restart));
            }
        }
    }

    for (std::int64_t x : excess_values) {
        action send = send_action(*m.find_message(excess_msg(x)));
        for (state_index from = st_start; from <= st_enz; ++from) {
            monitor_transition t;
            t.from = from;
            t.pattern = action_pattern::exact(send);
            if (from == st_e0 || from == st_enz)
                t.updates.push_back(expr::assignment::parse("sealed := 1"));
            t.to = x == 0 ? st_e0 : st_enz;
            f.transitions.push_back(std::move(t));
        }
    }

    std::string round_ok = "dup = 0 && sealed = 0";
    for (std::uint32_t i = 0; i < p.prosumers; ++i)
        round_ok += " && rcv" + std::to_string(i + 1) + " = 1";

    f.emits.push_back({st_p_ok, action_pattern::sends_of(price_msgs), std::nullopt});
    for (std::int64_t x : excess_values) {
        emit_rule e;
        e.state = x == 0 ? st_e0 : st_enz;
        e.pattern = action_pattern::exact(send_action(*m.find_message(excess_msg(x))));
        std::string cond = round_ok;
        if (x == 0)
            cond += " && Prod <= (" + std::to_string(p.line_upper) + ") && Prod >= (" +
                    std::to_string(p.line_lower) + ")";
        else if (x > 0)
            cond += " && Prod > (" + std::to_string(p.line_upper) + ") && Prod - (" +
                    std::to_string(p.line_upper) + ") = " + std::to_string(x);
        else
            cond += " && Prod < (" + std::to_string(p.line_lower) + ") && Prod - (" +
                    std::to_string(p.line_lower) + ") = (" + std::to_string(x) + ")";
        e.guard = expr::expression::parse(cond);
        f.emits.push_back(std::move(e));
    }

    f.finalize();
    return f;
}

}  // namespace detail

inline case_study build_smartgrid(const smart_grid_params& params = {}) {
    if (params.prosumers < 1 || params.prosumers > 16)
        throw error("smart grid: prosumer count must be between 1 and 16");
    if (params.plan_min > params.plan_max)
        throw error("smart grid: empty plan range");
    if (params.line_lower > params.line_upper)
        throw error("smart grid: line capacity bounds are inverted");
    if (params.prices.empty()) throw error("smart grid: at least one price is required");

    std::set<std::int64_t> excess_set;
    for (std::int64_t s = std::int64_t(params.prosumers) * params.plan_min;
         s <= std::int64_t(params.prosumers) * params.plan_max; ++s)
        excess_set.insert(compute_excess(s, params));
    std::vector<std::int64_t> excess_values(excess_set.begin(), excess_set.end());

    std::vector<process_decl> decls;
    decls.push_back(detail::smg_process(params));
    for (std::uint32_t i = 0; i < params.prosumers; ++i)
        decls.push_back(detail::prosumer_process(params, i, excess_values));

    case_study cs;
    cs.name = "smartgrid";
    cs.m = compose(decls);
    cs.policy = implicit_policy(cs.m);
    cs.policy.monitors.push_back(
        detail::smartgrid_excess_filter(cs.m, params, excess_values));
    proc_index smg = *cs.m.find_proc("SMG");
    for (std::uint32_t i = 0; i < params.prosumers; ++i) {
        proc_index pr = *cs.m.find_proc("Pr" + std::to_string(i + 1));
        cs.policy.add_filter(smg, pr, 0);
    }

    std::string lo = std::to_string(params.line_lower);
    std::string up = std::to_string(params.line_upper);
    cs.invariants.emplace_back("SMG", "location = Price_Sent -> excess = 0");
    cs.invariants.emplace_back(
        "SMG",
        "location = Excess_Sent -> ((excess = 0 && Prod <= (" + up + ") && Prod >= (" + lo +
            ")) || (excess = Prod - (" + up + ") && Prod > (" + up + ")) || (excess = Prod - (" +
            lo + ") && Prod < (" + lo + ")))");

    cs.notes.push_back("every edge from the grid manager to a prosumer shares the f_excess filter");
    if (params.prosumers < 2)
        cs.notes.push_back("with a single prosumer the collection round is degenerate");
    return cs;
}

}  // namespace dmsec
