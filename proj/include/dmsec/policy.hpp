// Security policies: edges labelled either fully-permitted or with a filter
// monitor, the implicit policy of a machine, filter evaluation, and purge.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "expr.hpp"
#include "semantics.hpp"

namespace dmsec {

class policy_error : public error {
public:
    enum class code {
        unknown_domain,
        unknown_monitor,
        not_a_filtered_edge,
        register_overflow,
        nondeterministic_monitor,
        invalid_monitor,
    };

    policy_error(code c, const std::string& what) : error(what), code_(c) {}
    code what_code() const { return code_; }

private:
    code code_;
};

// Matches actions of the monitored process.
struct action_pattern {
    enum class kind : std::uint8_t { exact_send, exact_recv, send_of, any_recv, any };

    kind k{kind::any};
    msg_index msg{0};             // exact_send, exact_recv
    std::vector<msg_index> msgs;  // send_of, sorted

    static action_pattern exact(const action& a) {
        if (a.kind == action::op::send) return {kind::exact_send, a.msg, {}};
        return {kind::exact_recv, a.msg, {}};
    }
    static action_pattern sends_of(std::vector<msg_index> ms) {
        std::sort(ms.begin(), ms.end());
        return {kind::send_of, 0, std::move(ms)};
    }
    static action_pattern receives() { return {kind::any_recv, 0, {}}; }
    static action_pattern wildcard() { return {kind::any, 0, {}}; }

    bool matches(const action& a) const {
        switch (k) {
            case kind::exact_send: return a.kind == action::op::send && a.msg == msg;
            case kind::exact_recv: return a.kind == action::op::recv && a.msg == msg;
            case kind::send_of:
                return a.kind == action::op::send &&
                       std::binary_search(msgs.begin(), msgs.end(), a.msg);
            case kind::any_recv: return a.kind == action::op::recv;
            case kind::any: return true;
        }
        return false;
    }
};

struct register_decl {
    std::string name;
    std::int64_t min{0};
    std::int64_t max{0};
    std::int64_t init{0};
};

struct monitor_transition {
    state_index from{0};
    action_pattern pattern;
    std::optional<expr::expression> guard;  // absent = true
    std::vector<expr::assignment> updates;
    state_index to{0};
};

struct emit_rule {
    state_index state{0};
    action_pattern pattern;
    std::optional<expr::expression> guard;  // absent = true
};

// A deterministic finite automaton over one process's actions, with bounded
// integer registers. Actions matched by no transition self-loop without
// touching the registers. The emit rules decide, after the full run, whether
// the final action is permitted.
struct filter_monitor {
    std::string name;
    std::vector<std::string> state_names;
    state_index initial{0};
    std::vector<register_decl> registers;
    std::vector<monitor_transition> transitions;
    std::vector<emit_rule> emits;

    std::optional<state_index> find_state(std::string_view n) const {
        for (state_index i = 0; i < state_names.size(); ++i)
            if (state_names[i] == n) return i;
        return std::nullopt;
    }

    std::vector<std::string> register_names() const {
        std::vector<std::string> out;
        out.reserve(registers.size());
        for (const auto& r : registers) out.push_back(r.name);
        return out;
    }

    // Resolves guard/update identifiers to register slots and validates
    // shape. Call once after filling in the fields.
    void finalize() {
        auto names = register_names();
        for (const auto& r : registers) {
            if (r.min > r.max || r.init < r.min || r.init > r.max)
                throw policy_error(policy_error::code::invalid_monitor,
                                   "monitor " + name + ": register " + r.name +
                                       " has an inconsistent range or initial value");
        }
        for (auto& t : transitions) {
            if (t.guard) t.guard->bind(names);
            for (auto& u : t.updates) {
                u.rhs.bind(names);
                u.slot = -1;
                for (std::size_t i = 0; i < names.size(); ++i)
                    if (names[i] == u.target) u.slot = int(i);
                if (u.slot < 0)
                    throw policy_error(policy_error::code::invalid_monitor,
                                       "monitor " + name + ": update targets unknown register '" +
                                           u.target + "'");
            }
        }
        for (auto& e : emits)
            if (e.guard) e.guard->bind(names);
    }
};

struct monitor_config {
    state_index state{0};
    std::vector<std::int64_t> regs;

    friend bool operator==(const monitor_config&, const monitor_config&) = default;
};

struct monitor_config_hash {
    std::size_t operator()(const monitor_config& c) const {
        std::size_t h = hash_combine(0x84222325u, c.state);
        for (std::int64_t r : c.regs) h = hash_combine(h, std::size_t(r));
        return h;
    }
};

inline monitor_config initial_config(const filter_monitor& f) {
    monitor_config c;
    c.state = f.initial;
    c.regs.reserve(f.registers.size());
    for (const auto& r : f.registers) c.regs.push_back(r.init);
    return c;
}

// One deterministic step. At most one transition may match (pattern and
// guard); two matches raise nondeterministic_monitor, zero matches self-loop.
// Updates run left to right, each seeing the previous one's effect; a result
// outside the register's range raises register_overflow.
inline void monitor_step_inplace(const filter_monitor& f, monitor_config& c, const action& a) {
    const monitor_transition* hit = nullptr;
    for (const auto& t : f.transitions) {
        if (t.from != c.state || !t.pattern.matches(a)) continue;
        if (t.guard && !expr::eval_bool_slots(*t.guard, c.regs)) continue;
        if (hit)
            throw policy_error(policy_error::code::nondeterministic_monitor,
                               "monitor " + f.name + ": two transitions match in state " +
                                   f.state_names[c.state]);
        hit = &t;
    }
    if (!hit) return;
    for (const auto& u : hit->updates) {
        std::int64_t v = expr::eval_int_slots(u.rhs, c.regs);
        const auto& r = f.registers[std::size_t(u.slot)];
        if (v < r.min || v > r.max)
            throw policy_error(policy_error::code::register_overflow,
                               "monitor " + f.name + ": register " + r.name + " left [" +
                                   std::to_string(r.min) + "," + std::to_string(r.max) +
                                   "] with value " + std::to_string(v));
        c.regs[std::size_t(u.slot)] = v;
    }
    c.state = hit->to;
}

inline monitor_config monitor_step(const filter_monitor& f, monitor_config c, const action& a) {
    monitor_step_inplace(f, c, a);
    return c;
}

// Emit check in the configuration reached after consuming the action itself.
inline bool monitor_emits(const filter_monitor& f, const monitor_config& after, const action& a) {
    for (const auto& e : f.emits) {
        if (e.state != after.state || !e.pattern.matches(a)) continue;
        if (e.guard && !expr::eval_bool_slots(*e.guard, after.regs)) continue;
        return true;
    }
    return false;
}

// Filter value of action a after history: run the monitor over history·a
// from its initial configuration, then apply the emit rules to a.
inline bool filter_eval(const filter_monitor& f, std::span<const action> history,
                        const action& a) {
    monitor_config c = initial_config(f);
    for (const action& h : history) monitor_step_inplace(f, c, h);
    monitor_step_inplace(f, c, a);
    return monitor_emits(f, c, a);
}

struct edge_label {
    bool is_top{true};
    std::uint32_t monitor{0};  // index into security_policy::monitors when !is_top
};

// An intransitive policy over the machine's processes. Every process is a
// domain; edges are directional permissions, self-edges always fully
// permitted.
struct security_policy {
    std::vector<filter_monitor> monitors;
    std::map<std::pair<proc_index, proc_index>, edge_label> edges;

    bool has_edge(proc_index s, proc_index d) const { return edges.count({s, d}) != 0; }
    const edge_label* label(proc_index s, proc_index d) const {
        auto it = edges.find({s, d});
        return it == edges.end() ? nullptr : &it->second;
    }

    void add_top(proc_index s, proc_index d) { edges[{s, d}] = edge_label{true, 0}; }
    void add_filter(proc_index s, proc_index d, std::uint32_t monitor) {
        edges[{s, d}] = edge_label{false, monitor};
    }
};

// The least policy compatible with the message topology: a self-edge per
// process, and src -> dst whenever some message of src is received by dst.
inline security_policy implicit_policy(const machine& m) {
    security_policy p;
    for (proc_index i = 0; i < m.proc_count(); ++i) p.add_top(i, i);
    for (msg_index mi = 0; mi < m.message_count(); ++mi) {
        proc_index s = m.sender_of(mi);
        for (proc_index r : m.receivers_of(mi))
            if (r != s) p.add_top(s, r);
    }
    return p;
}

struct policy_warning {
    enum class kind { missing_edge, missing_self_edge, filter_alphabet_violation };

    kind k;
    proc_index src{0};
    proc_index dst{0};
    std::string text;
};

// Compares the policy against the machine: flags implicit edges the policy
// lacks, missing self-edges, and filters that mention messages outside the
// monitored process's alphabet. Policies naming unknown monitors are errors.
inline std::vector<policy_warning> validate_policy(const machine& m, const security_policy& p) {
    std::vector<policy_warning> out;
    for (const auto& [key, label] : p.edges) {
        if (key.first >= m.proc_count() || key.second >= m.proc_count())
            throw policy_error(policy_error::code::unknown_domain,
                               "policy edge refers to a process the machine does not have");
        if (!label.is_top && label.monitor >= p.monitors.size())
            throw policy_error(policy_error::code::unknown_monitor,
                               "policy edge refers to a monitor the policy does not define");
    }

    for (proc_index i = 0; i < m.proc_count(); ++i) {
        const edge_label* l = p.label(i, i);
        if (!l || !l->is_top)
            out.push_back({policy_warning::kind::missing_self_edge, i, i,
                           "process " + m.proc(i).name +
                               (l ? " has a filtered self-edge; self-edges must be fully permitted"
                                  : " has no self-edge")});
    }

    security_policy imp = implicit_policy(m);
    for (const auto& [key, label] : imp.edges) {
        (void)label;
        if (!p.has_edge(key.first, key.second))
            out.push_back({policy_warning::kind::missing_edge, key.first, key.second,
                           "machine sends " + m.proc(key.first).name + " -> " +
                               m.proc(key.second).name + " but the policy has no such edge"});
    }

    for (const auto& [key, label] : p.edges) {
        if (label.is_top) continue;
        const filter_monitor& f = p.monitors[label.monitor];
        const process& src = m.proc(key.first);
        auto check_pattern = [&](const action_pattern& pat, const char* where) {
            auto flag = [&](msg_index msg, bool as_output) {
                bool ok = as_output ? src.can_output(msg) : src.can_input(msg);
                if (!ok)
                    out.push_back({policy_warning::kind::filter_alphabet_violation, key.first,
                                   key.second,
                                   "monitor " + f.name + " (" + where + ") mentions " +
                                       m.message_name(msg) + ", which " + src.name +
                                       (as_output ? " does not send" : " does not receive")});
            };
            switch (pat.k) {
                case action_pattern::kind::exact_send: flag(pat.msg, true); break;
                case action_pattern::kind::exact_recv: flag(pat.msg, false); break;
                case action_pattern::kind::send_of:
                    for (msg_index msg : pat.msgs) flag(msg, true);
                    break;
                default: break;
            }
        };
        for (const auto& t : f.transitions) check_pattern(t.pattern, "transition");
        for (const auto& e : f.emits) check_pattern(e.pattern, "emit");
    }
    return out;
}

// Incremental purge for one target domain. Feed the actions of a sequence
// left to right; feed() reports whether the action is visible to the domain.
//
// Rules for an action a with source src = dom(a):
//   - no edge src -> domain: dropped;
//   - edge labelled top: kept;
//   - filtered edge, a among src's own actions: kept iff the filter value of
//     a after src's projected history (the monitor run below) is true;
//   - filtered edge, a a receipt by another process: kept iff the matching
//     send was kept, matched FIFO per (message, receiver).
//
// The monitor of a filtered edge runs over the full projection of the fed
// sequence onto src's alphabet, kept and dropped actions alike.
class purge_tracker {
public:
    purge_tracker(const machine& m, const security_policy& p, proc_index domain)
        : m_(&m), p_(&p), domain_(domain) {
        if (domain >= m.proc_count())
            throw policy_error(policy_error::code::unknown_domain,
                               "purge domain is not a process of the machine");
        auto filtered = std::make_shared<std::vector<int>>(m.proc_count(), -1);
        auto slots = std::make_shared<std::vector<int>>(m.message_count() * m.proc_count(), -1);
        std::size_t n_queues = 0;
        for (const auto& [key, label] : p.edges) {
            if (key.second != domain || label.is_top) continue;
            (*filtered)[key.first] = int(runs_.size());
            runs_.push_back({key.first, label.monitor, initial_config(p.monitors[label.monitor])});
            // Receipts of src's messages by other processes pair with sends
            // FIFO per (message, receiver).
            for (msg_index mi = 0; mi < m.message_count(); ++mi) {
                if (m.sender_of(mi) != key.first) continue;
                for (proc_index r : m.receivers_of(mi))
                    if (r != key.first)
                        (*slots)[mi * m.proc_count() + r] = int(n_queues++);
            }
        }
        monitor_of_src_ = std::move(filtered);
        queue_slot_ = std::move(slots);
        queues_.resize(n_queues);
    }

    proc_index domain() const { return domain_; }

    bool feed(const action& a) {
        // Advance monitor runs of filtered sources whose alphabet contains a,
        // and remember the filter value of a where computed.
        bool have_value = false;
        bool value = false;
        proc_index src = m_->dom(a);
        for (auto& run : runs_) {
            if (!m_->in_alphabet(run.src, a)) continue;
            const filter_monitor& f = p_->monitors[run.monitor];
            monitor_step_inplace(f, run.cfg, a);
            if (run.src == src) {
                value = monitor_emits(f, run.cfg, a);
                have_value = true;
            }
        }

        // A send of a filtered source feeds the per-receiver queues whether
        // or not the send itself stays visible.
        if (a.kind == action::op::send && (*monitor_of_src_)[src] >= 0) {
            bool v = have_value ? value : false;
            for (proc_index r : m_->receivers_of(a.msg))
                if (r != src) queues_[queue_slot(a.msg, r)].push_back(v);
        }

        const edge_label* label = p_->label(src, domain_);
        if (!label) return false;
        if (label->is_top) return true;
        if (m_->in_alphabet(src, a)) return value;
        // Another process receiving src's message: consume the send's value.
        auto& q = queues_[queue_slot(a.msg, a.receiver)];
        if (q.empty()) return false;  // no matching send: mechanically invisible
        bool v = q.front();
        q.pop_front();
        return v;
    }

private:
    struct monitor_run {
        proc_index src;
        std::uint32_t monitor;
        monitor_config cfg;
    };

    std::size_t queue_slot(msg_index m, proc_index r) const {
        return std::size_t((*queue_slot_)[m * m_->proc_count() + r]);
    }

    const machine* m_;
    const security_policy* p_;
    proc_index domain_;
    // Shared across copies; a tracker copy costs only the runs and queues.
    std::shared_ptr<const std::vector<int>> monitor_of_src_;  // per process: run index or -1
    std::shared_ptr<const std::vector<int>> queue_slot_;      // (msg, receiver) -> queue index or -1
    std::vector<monitor_run> runs_;
    std::vector<std::deque<bool>> queues_;
};

// purge of a sequence for one domain: the subsequence visible to it. Total:
// sequences outside Exec(M) are processed mechanically by the same rules.
inline execution purge(const machine& m, const security_policy& p, proc_index domain,
                       std::span<const action> alpha) {
    purge_tracker t(m, p, domain);
    execution out;
    for (const action& a : alpha)
        if (t.feed(a)) out.push_back(a);
    return out;
}

}  // namespace dmsec
