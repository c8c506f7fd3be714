// JSON input and output for machines, policies, and counterexamples, plus
// small file helpers used by the command line tool.
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "casestudies.hpp"
#include "core.hpp"
#include "policy.hpp"
#include "verifier.hpp"

namespace dmsec {

using json = nlohmann::ordered_json;

class io_error : public error {
public:
    explicit io_error(const std::string& what) : error(what) {}
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw io_error(std::string(where) + ": unknown key '" + key + "'");
    }
}

inline const json& field(const json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw io_error(std::string(where) + ": missing required key '" + key + "'");
    return *it;
}

inline std::string str_field(const json& obj, const char* key, const char* where) {
    const json& v = field(obj, key, where);
    if (!v.is_string())
        throw io_error(std::string(where) + ": key '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::int64_t int_field(const json& obj, const char* key, const char* where) {
    const json& v = field(obj, key, where);
    if (!v.is_number_integer())
        throw io_error(std::string(where) + ": key '" + key + "' must be an integer");
    return v.get<std::int64_t>();
}

inline const json& array_field(const json& obj, const char* key, const char* where) {
    const json& v = field(obj, key, where);
    if (!v.is_array())
        throw io_error(std::string(where) + ": key '" + key + "' must be an array");
    return v;
}

inline std::vector<std::string> string_list(const json& arr, const char* where) {
    std::vector<std::string> out;
    for (const json& v : arr) {
        if (!v.is_string()) throw io_error(std::string(where) + ": expected a string");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Machines.

inline json machine_to_json(const machine& m) {
    json procs = json::array();
    for (proc_index pi = 0; pi < m.proc_count(); ++pi) {
        const process& p = m.proc(pi);
        json jp;
        jp["name"] = p.name;
        jp["states"] = p.state_names;
        jp["initial"] = p.state_names[p.initial];
        json inputs = json::array(), outputs = json::array();
        for (msg_index mi : p.inputs) inputs.push_back(m.message_name(mi));
        for (msg_index mi : p.outputs) outputs.push_back(m.message_name(mi));
        jp["inputs"] = std::move(inputs);
        jp["outputs"] = std::move(outputs);
        json trans = json::array();
        for (state_index s = 0; s < p.state_names.size(); ++s) {
            for (const local_transition& t : p.send_edges[s])
                trans.push_back({{"from", p.state_names[s]},
                                 {"action", {{"send", m.message_name(t.msg)}}},
                                 {"to", p.state_names[t.target]}});
            for (const local_transition& t : p.recv_edges[s])
                trans.push_back({{"from", p.state_names[s]},
                                 {"action", {{"recv", m.message_name(t.msg)}}},
                                 {"to", p.state_names[t.target]}});
        }
        jp["transitions"] = std::move(trans);
        procs.push_back(std::move(jp));
    }
    return json{{"processes", std::move(procs)}};
}

inline machine machine_from_json(const json& j) {
    if (!j.is_object()) throw io_error("machine: top level must be an object");
    detail::reject_unknown_keys(j, "machine", {"processes"});
    const json& procs = detail::array_field(j, "processes", "machine");

    std::vector<process_decl> decls;
    for (const json& jp : procs) {
        if (!jp.is_object()) throw io_error("machine: process entries must be objects");
        detail::reject_unknown_keys(
            jp, "process", {"name", "states", "initial", "inputs", "outputs", "transitions"});
        process_decl d;
        d.name = detail::str_field(jp, "name", "process");
        const char* where = d.name.c_str();
        d.states = detail::string_list(detail::array_field(jp, "states", where), where);
        d.initial = detail::str_field(jp, "initial", where);
        d.inputs = detail::string_list(detail::array_field(jp, "inputs", where), where);
        d.outputs = detail::string_list(detail::array_field(jp, "outputs", where), where);
        for (const json& jt : detail::array_field(jp, "transitions", where)) {
            if (!jt.is_object())
                throw io_error(std::string(where) + ": transitions must be objects");
            detail::reject_unknown_keys(jt, "transition", {"from", "action", "to"});
            process_decl::transition t;
            t.from = detail::str_field(jt, "from", "transition");
            t.to = detail::str_field(jt, "to", "transition");
            const json& act = detail::field(jt, "action", "transition");
            if (!act.is_object() || act.size() != 1)
                throw io_error("transition: 'action' must hold exactly one of send/recv");
            detail::reject_unknown_keys(act, "action", {"send", "recv"});
            t.is_send = act.contains("send");
            t.msg = detail::str_field(act, t.is_send ? "send" : "recv", "action");
            d.transitions.push_back(std::move(t));
        }
        decls.push_back(std::move(d));
    }
    return compose(decls);
}

// ---------------------------------------------------------------------------
// Policies. A pattern is "any", "any-recv", {"send": "m"}, {"recv": "m"}, or
// {"send": ["m1", "m2"]}.

inline json pattern_to_json(const machine& m, const action_pattern& p) {
    using kind = action_pattern::kind;
    switch (p.k) {
        case kind::any: return json("any");
        case kind::any_recv: return json("any-recv");
        case kind::exact_send: return json{{"send", m.message_name(p.msg)}};
        case kind::exact_recv: return json{{"recv", m.message_name(p.msg)}};
        case kind::send_of: {
            json names = json::array();
            for (msg_index mi : p.msgs) names.push_back(m.message_name(mi));
            return json{{"send", std::move(names)}};
        }
    }
    throw io_error("pattern: unrepresentable kind");
}

inline action_pattern pattern_from_json(const machine& m, const json& j, const char* where) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "any") return action_pattern::wildcard();
        if (s == "any-recv") return action_pattern::receives();
        throw io_error(std::string(where) + ": unknown pattern '" + s + "'");
    }
    if (!j.is_object() || j.size() != 1)
        throw io_error(std::string(where) +
                       ": a pattern is \"any\", \"any-recv\", or one send/recv key");
    detail::reject_unknown_keys(j, where, {"send", "recv"});
    auto resolve = [&](const json& v) -> msg_index {
        if (!v.is_string()) throw io_error(std::string(where) + ": message must be a string");
        auto mi = m.find_message(v.get<std::string>());
        if (!mi)
            throw io_error(std::string(where) + ": unknown message '" + v.get<std::string>() +
                           "'");
        return *mi;
    };
    if (j.contains("recv")) return action_pattern::exact(recv_action(0, resolve(j["recv"])));
    const json& v = j["send"];
    if (v.is_array()) {
        std::vector<msg_index> ms;
        for (const json& e : v) ms.push_back(resolve(e));
        return action_pattern::sends_of(std::move(ms));
    }
    return action_pattern::exact(send_action(resolve(v)));
}

inline json policy_to_json(const machine& m, const security_policy& p) {
    json edges = json::array();
    for (const auto& [key, label] : p.edges) {
        json je;
        je["from"] = m.proc(key.first).name;
        je["to"] = m.proc(key.second).name;
        if (!label.is_top) je["filter"] = p.monitors[label.monitor].name;
        edges.push_back(std::move(je));
    }

    json monitors = json::array();
    for (const filter_monitor& f : p.monitors) {
        json jm;
        jm["name"] = f.name;
        jm["states"] = f.state_names;
        jm["initial"] = f.state_names[f.initial];
        json regs = json::array();
        for (const register_decl& r : f.registers)
            regs.push_back(
                {{"name", r.name}, {"min", r.min}, {"max", r.max}, {"init", r.init}});
        jm["registers"] = std::move(regs);
        json trans = json::array();
        for (const monitor_transition& t : f.transitions) {
            json jt;
            jt["from"] = f.state_names[t.from];
            jt["on"] = pattern_to_json(m, t.pattern);
            if (t.guard) jt["guard"] = t.guard->source();
            if (!t.updates.empty()) {
                json ups = json::array();
                for (const expr::assignment& u : t.updates) ups.push_back(u.source());
                jt["updates"] = std::move(ups);
            }
            jt["to"] = f.state_names[t.to];
            trans.push_back(std::move(jt));
        }
        jm["transitions"] = std::move(trans);
        json emits = json::array();
        for (const emit_rule& e : f.emits) {
            json je;
            je["state"] = f.state_names[e.state];
            je["on"] = pattern_to_json(m, e.pattern);
            if (e.guard) je["guard"] = e.guard->source();
            emits.push_back(std::move(je));
        }
        jm["emit"] = std::move(emits);
        monitors.push_back(std::move(jm));
    }
    return json{{"edges", std::move(edges)}, {"monitors", std::move(monitors)}};
}

inline security_policy policy_from_json(const machine& m, const json& j,
                                        std::vector<std::string>* notes = nullptr) {
    if (!j.is_object()) throw io_error("policy: top level must be an object");
    detail::reject_unknown_keys(j, "policy", {"edges", "monitors"});

    security_policy p;
    if (j.contains("monitors")) {
        for (const json& jm : j["monitors"]) {
            if (!jm.is_object()) throw io_error("policy: monitor entries must be objects");
            detail::reject_unknown_keys(
                jm, "monitor", {"name", "states", "initial", "registers", "transitions", "emit"});
            filter_monitor f;
            f.name = detail::str_field(jm, "name", "monitor");
            const char* where = f.name.c_str();
            f.state_names = detail::string_list(detail::array_field(jm, "states", where), where);
            std::string init = detail::str_field(jm, "initial", where);
            auto is = f.find_state(init);
            if (!is)
                throw io_error(std::string(where) + ": initial state '" + init +
                               "' not declared");
            f.initial = *is;
            auto state_of = [&](const std::string& n) -> state_index {
                auto s = f.find_state(n);
                if (!s)
                    throw io_error(std::string(where) + ": undeclared monitor state '" + n + "'");
                return *s;
            };
            if (jm.contains("registers")) {
                for (const json& jr : jm["registers"]) {
                    detail::reject_unknown_keys(jr, "register", {"name", "min", "max", "init"});
                    f.registers.push_back({detail::str_field(jr, "name", where),
                                           detail::int_field(jr, "min", where),
                                           detail::int_field(jr, "max", where),
                                           detail::int_field(jr, "init", where)});
                }
            }
            if (jm.contains("transitions")) {
                for (const json& jt : jm["transitions"]) {
                    detail::reject_unknown_keys(jt, "monitor transition",
                                                {"from", "on", "guard", "updates", "to"});
                    monitor_transition t;
                    t.from = state_of(detail::str_field(jt, "from", where));
                    t.to = state_of(detail::str_field(jt, "to", where));
                    t.pattern = pattern_from_json(m, detail::field(jt, "on", where), where);
                    if (jt.contains("guard"))
                        t.guard =
                            expr::expression::parse(detail::str_field(jt, "guard", where));
                    if (jt.contains("updates"))
                        for (const std::string& u : detail::string_list(jt["updates"], where))
                            t.updates.push_back(expr::assignment::parse(u));
                    f.transitions.push_back(std::move(t));
                }
            }
            if (jm.contains("emit")) {
                for (const json& je : jm["emit"]) {
                    detail::reject_unknown_keys(je, "emit rule", {"state", "on", "guard"});
                    emit_rule e;
                    e.state = state_of(detail::str_field(je, "state", where));
                    e.pattern = pattern_from_json(m, detail::field(je, "on", where), where);
                    if (je.contains("guard"))
                        e.guard =
                            expr::expression::parse(detail::str_field(je, "guard", where));
                    f.emits.push_back(std::move(e));
                }
            }
            f.finalize();
            p.monitors.push_back(std::move(f));
        }
    }

    auto monitor_id = [&](const std::string& n) -> std::uint32_t {
        for (std::uint32_t i = 0; i < p.monitors.size(); ++i)
            if (p.monitors[i].name == n) return i;
        throw io_error("policy: unknown monitor '" + n + "'");
    };

    if (j.contains("edges")) {
        for (const json& je : j["edges"]) {
            if (!je.is_object()) throw io_error("policy: edge entries must be objects");
            detail::reject_unknown_keys(je, "edge", {"from", "to", "filter"});
            std::string from = detail::str_field(je, "from", "edge");
            std::string to = detail::str_field(je, "to", "edge");
            auto fp = m.find_proc(from), tp = m.find_proc(to);
            if (!fp) throw io_error("policy: unknown process '" + from + "'");
            if (!tp) throw io_error("policy: unknown process '" + to + "'");
            if (p.edges.count({*fp, *tp}))
                throw io_error("policy: duplicate edge " + from + " -> " + to);
            if (je.contains("filter"))
                p.add_filter(*fp, *tp, monitor_id(detail::str_field(je, "filter", "edge")));
            else
                p.add_top(*fp, *tp);
        }
    }

    for (proc_index pi = 0; pi < m.proc_count(); ++pi) {
        if (!p.edges.count({pi, pi})) {
            p.add_top(pi, pi);
            if (notes)
                notes->push_back("added the mandatory self-edge for " + m.proc(pi).name);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Executions, observations, counterexamples.

inline json execution_to_json(const machine& m, const execution& e) {
    json out = json::array();
    for (const action& a : e) out.push_back(m.render(a));
    return out;
}

inline execution execution_from_json(const machine& m, const json& j, const char* where) {
    if (!j.is_array()) throw io_error(std::string(where) + ": expected an array of actions");
    execution out;
    for (const json& v : j) {
        if (!v.is_string()) throw io_error(std::string(where) + ": actions must be strings");
        out.push_back(m.parse_action(v.get<std::string>()));
    }
    return out;
}

inline json local_config_to_json(const machine& m, proc_index p, const local_config& lc) {
    json buffer = json::array();
    for (msg_index mi : lc.buffer) buffer.push_back(m.message_name(mi));
    return json{{"state", m.proc(p).state_names[lc.state]}, {"buffer", std::move(buffer)}};
}

inline local_config local_config_from_json(const machine& m, proc_index p, const json& j) {
    detail::reject_unknown_keys(j, "observation", {"state", "buffer"});
    local_config lc;
    std::string state = detail::str_field(j, "state", "observation");
    auto si = m.proc(p).find_state(state);
    if (!si) throw io_error("observation: unknown state '" + state + "'");
    lc.state = *si;
    for (const std::string& n :
         detail::string_list(detail::array_field(j, "buffer", "observation"), "observation"))
        lc.buffer.push_back(m.message_id(n));
    return lc;
}

inline const char* unwinding_condition_name(unwinding_counterexample::condition c) {
    using cond = unwinding_counterexample::condition;
    switch (c) {
        case cond::output_consistency: return "output-consistency";
        case cond::step_consistency: return "step-consistency";
        case cond::local_respect: return "local-respect";
        case cond::strict_enabledness: return "strict-enabledness";
    }
    return "unknown";
}

inline json counterexample_to_json(const machine& m, const counterexample& cex) {
    if (const auto* c = std::get_if<compliance_counterexample>(&cex)) {
        return json{{"kind", "compliance"},
                    {"domain", m.proc(c->domain).name},
                    {"alpha", execution_to_json(m, c->alpha)},
                    {"beta", execution_to_json(m, c->beta)},
                    {"shared_purge", execution_to_json(m, c->shared_purge)},
                    {"obs_alpha", local_config_to_json(m, c->domain, c->obs_alpha)},
                    {"obs_beta", local_config_to_json(m, c->domain, c->obs_beta)}};
    }
    if (const auto* c = std::get_if<filter_counterexample>(&cex)) {
        return json{{"kind", "filter-respect"},
                    {"src", m.proc(c->src).name},
                    {"dst", m.proc(c->dst).name},
                    {"delta", execution_to_json(m, c->delta)},
                    {"action", m.render(c->violating)}};
    }
    if (const auto* c = std::get_if<unwinding_counterexample>(&cex)) {
        json j{{"kind", "unwinding"},
               {"condition", unwinding_condition_name(c->cond)},
               {"domain", m.proc(c->domain).name},
               {"to_s", execution_to_json(m, c->to_s)},
               {"to_t", execution_to_json(m, c->to_t)}};
        if (c->act) j["action"] = m.render(*c->act);
        return j;
    }
    const auto& c = std::get<invariant_counterexample>(cex);
    return json{{"kind", "invariant"},
                {"delta", execution_to_json(m, c.delta)},
                {"state", c.state_name}};
}

inline counterexample counterexample_from_json(const machine& m, const json& j) {
    if (!j.is_object()) throw io_error("counterexample: expected an object");
    std::string kind = detail::str_field(j, "kind", "counterexample");
    if (kind == "compliance") {
        detail::reject_unknown_keys(j, "counterexample",
                                    {"kind", "domain", "alpha", "beta", "shared_purge",
                                     "obs_alpha", "obs_beta"});
        compliance_counterexample c;
        c.domain = m.proc_id(detail::str_field(j, "domain", "counterexample"));
        c.alpha = execution_from_json(m, detail::field(j, "alpha", "counterexample"), "alpha");
        c.beta = execution_from_json(m, detail::field(j, "beta", "counterexample"), "beta");
        c.shared_purge = execution_from_json(
            m, detail::field(j, "shared_purge", "counterexample"), "shared_purge");
        c.obs_alpha =
            local_config_from_json(m, c.domain, detail::field(j, "obs_alpha", "counterexample"));
        c.obs_beta =
            local_config_from_json(m, c.domain, detail::field(j, "obs_beta", "counterexample"));
        return c;
    }
    if (kind == "filter-respect") {
        detail::reject_unknown_keys(j, "counterexample",
                                    {"kind", "src", "dst", "delta", "action"});
        filter_counterexample c;
        c.src = m.proc_id(detail::str_field(j, "src", "counterexample"));
        c.dst = m.proc_id(detail::str_field(j, "dst", "counterexample"));
        c.delta = execution_from_json(m, detail::field(j, "delta", "counterexample"), "delta");
        c.violating = m.parse_action(detail::str_field(j, "action", "counterexample"));
        return c;
    }
    if (kind == "unwinding") {
        detail::reject_unknown_keys(j, "counterexample",
                                    {"kind", "condition", "domain", "to_s", "to_t", "action"});
        unwinding_counterexample c;
        std::string cond = detail::str_field(j, "condition", "counterexample");
        using uc = unwinding_counterexample::condition;
        if (cond == "output-consistency")
            c.cond = uc::output_consistency;
        else if (cond == "step-consistency")
            c.cond = uc::step_consistency;
        else if (cond == "local-respect")
            c.cond = uc::local_respect;
        else if (cond == "strict-enabledness")
            c.cond = uc::strict_enabledness;
        else
            throw io_error("counterexample: unknown condition '" + cond + "'");
        c.domain = m.proc_id(detail::str_field(j, "domain", "counterexample"));
        c.to_s = execution_from_json(m, detail::field(j, "to_s", "counterexample"), "to_s");
        c.to_t = execution_from_json(m, detail::field(j, "to_t", "counterexample"), "to_t");
        if (j.contains("action"))
            c.act = m.parse_action(detail::str_field(j, "action", "counterexample"));
        return c;
    }
    if (kind == "invariant") {
        detail::reject_unknown_keys(j, "counterexample", {"kind", "delta", "state"});
        invariant_counterexample c;
        c.delta = execution_from_json(m, detail::field(j, "delta", "counterexample"), "delta");
        c.state_name = detail::str_field(j, "state", "counterexample");
        return c;
    }
    throw io_error("counterexample: unknown kind '" + kind + "'");
}

inline std::string render_counterexample(const machine& m, const counterexample& cex) {
    std::ostringstream out;
    if (const auto* c = std::get_if<compliance_counterexample>(&cex)) {
        const process& d = m.proc(c->domain);
        out << "domain " << d.name << " distinguishes two executions with the same permitted view\n"
            << "  alpha: " << m.render(c->alpha) << "\n"
            << "  beta:  " << m.render(c->beta) << "\n"
            << "  shared purged view: " << m.render(c->shared_purge) << "\n"
            << "  after alpha " << d.name << " is in state " << d.state_names[c->obs_alpha.state]
            << " with buffer " << m.render_buffer(c->obs_alpha.buffer) << "\n"
            << "  after beta  " << d.name << " is in state " << d.state_names[c->obs_beta.state]
            << " with buffer " << m.render_buffer(c->obs_beta.buffer) << "\n";
    } else if (const auto* f = std::get_if<filter_counterexample>(&cex)) {
        out << "filtered edge " << m.proc(f->src).name << " -> " << m.proc(f->dst).name
            << " is not respected\n"
            << "  local run of " << m.proc(f->src).name << ": " << m.render(f->delta) << "\n"
            << "  enabled send rejected by the filter: " << m.render(f->violating) << "\n";
    } else if (const auto* u = std::get_if<unwinding_counterexample>(&cex)) {
        out << "unwinding condition " << unwinding_condition_name(u->cond)
            << " fails for domain " << m.proc(u->domain).name << "\n"
            << "  path to s: " << m.render(u->to_s) << "\n"
            << "  path to t: " << m.render(u->to_t) << "\n";
        if (u->act) out << "  action: " << m.render(*u->act) << "\n";
    } else {
        const auto& i = std::get<invariant_counterexample>(cex);
        out << "invariant fails at state " << i.state_name << "\n"
            << "  reached by: " << m.render(i.delta) << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Files. Loading tries the path as given, then with ".json" appended.

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        in.clear();
        in.open(path + ".json");
    }
    if (!in) throw io_error("cannot open " + path + " (also tried " + path + ".json)");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << text;
    if (!out) throw io_error("failed while writing " + path);
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline machine load_machine(const std::string& path) {
    return machine_from_json(read_json_file(path));
}

inline security_policy load_policy(const machine& m, const std::string& path,
                                   std::vector<std::string>* notes = nullptr) {
    return policy_from_json(m, read_json_file(path), notes);
}

}  // namespace dmsec
