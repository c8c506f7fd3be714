// Asynchronous semantics: enabled actions, the global step relation,
// execution enumeration, local (buffer-free) executions, and projection.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "core.hpp"

namespace dmsec {

// Enabled actions of a global state, in canonical order (sends first, then
// acting process in declaration order, then message name). A send !m is
// enabled when the sender's step is defined on it. A receipt ?p m is enabled
// when p's step is defined on m and every earlier buffer entry is
// unreceivable in p's current state, so each process can consume at most one
// buffer entry: the first receivable one.
inline std::vector<action> enabled_actions(const machine& m, const global_state& g) {
    m.validate_state(g);
    std::vector<action> out;
    for (proc_index p = 0; p < m.proc_count(); ++p) {
        const process& pr = m.proc(p);
        for (const local_transition& t : pr.send_edges[g.procs[p].state])
            out.push_back(send_action(t.msg));
    }
    for (proc_index p = 0; p < m.proc_count(); ++p) {
        const process& pr = m.proc(p);
        for (msg_index b : g.procs[p].buffer) {
            if (pr.on_recv(g.procs[p].state, b)) {
                out.push_back(recv_action(p, b));
                break;
            }
        }
    }
    std::sort(out.begin(), out.end(), [&](const action& a, const action& b) {
        return m.order_key(a) < m.order_key(b);
    });
    return out;
}

inline bool is_enabled(const machine& m, const global_state& g, const action& a) {
    if (a.kind == action::op::send) {
        const process& pr = m.proc(m.sender_of(a.msg));
        return pr.on_send(g.procs[m.sender_of(a.msg)].state, a.msg).has_value();
    }
    const process& pr = m.proc(a.receiver);
    const local_config& lc = g.procs[a.receiver];
    for (msg_index b : lc.buffer) {
        if (pr.on_recv(lc.state, b)) return b == a.msg;
    }
    return false;
}

// Applies one enabled action. A send advances the sender and appends the
// message to every receiver's buffer (including the sender's own, if it
// receives the message). A receipt removes the first receivable buffer entry
// and advances the receiver; no other component changes.
inline global_state step_global(const machine& m, const global_state& g, const action& a) {
    m.validate_state(g);
    global_state next = g;
    if (a.kind == action::op::send) {
        proc_index s = m.sender_of(a.msg);
        auto target = m.proc(s).on_send(g.procs[s].state, a.msg);
        if (!target)
            throw model_error(model_error::code::not_enabled,
                              "send not enabled: " + m.render(a));
        next.procs[s].state = *target;
        for (proc_index r : m.receivers_of(a.msg)) next.procs[r].buffer.push_back(a.msg);
        return next;
    }
    const process& pr = m.proc(a.receiver);
    local_config& lc = next.procs[a.receiver];
    for (std::size_t i = 0; i < lc.buffer.size(); ++i) {
        if (auto target = pr.on_recv(lc.state, lc.buffer[i])) {
            if (lc.buffer[i] != a.msg)
                throw model_error(model_error::code::not_enabled,
                                  "receipt not enabled (an earlier buffer entry is receivable): " +
                                      m.render(a));
            lc.buffer.erase(lc.buffer.begin() + long(i));
            lc.state = *target;
            return next;
        }
    }
    throw model_error(model_error::code::not_enabled, "receipt not enabled: " + m.render(a));
}

// Replays a sequence from the initial state; throws not_enabled when invalid.
inline global_state replay(const machine& m, std::span<const action> alpha) {
    global_state g = m.initial_state();
    for (const action& a : alpha) g = step_global(m, g, a);
    return g;
}

inline bool is_valid_execution(const machine& m, std::span<const action> alpha) {
    global_state g = m.initial_state();
    for (const action& a : alpha) {
        if (!is_enabled(m, g, a)) return false;
        g = step_global(m, g, a);
    }
    return true;
}

// Depth-first preorder enumeration of all executions of length <= depth, in
// lexicographic order by the canonical action order; the empty execution
// comes first and every execution is visited after its prefixes. The visitor
// receives the execution and the state it reaches; returning false stops the
// whole enumeration.
inline void enumerate_executions(
    const machine& m, std::uint32_t depth,
    const std::function<bool(const execution&, const global_state&)>& visit) {
    execution path;
    path.reserve(depth);

    struct frame {
        global_state state;
        std::vector<action> succ;
        std::size_t next{0};
    };
    std::vector<frame> stack;
    global_state init = m.initial_state();
    if (!visit(path, init)) return;
    stack.push_back({std::move(init), {}, 0});
    stack.back().succ = enabled_actions(m, stack.back().state);

    while (!stack.empty()) {
        frame& f = stack.back();
        if (path.size() >= depth || f.next >= f.succ.size()) {
            stack.pop_back();
            if (!path.empty()) path.pop_back();
            continue;
        }
        action a = f.succ[f.next++];
        global_state next = step_global(m, f.state, a);
        path.push_back(a);
        if (!visit(path, next)) return;
        stack.push_back({std::move(next), {}, 0});
        stack.back().succ = enabled_actions(m, stack.back().state);
    }
}

inline std::uint64_t count_executions(const machine& m, std::uint32_t depth) {
    std::uint64_t n = 0;
    enumerate_executions(m, depth, [&](const execution&, const global_state&) {
        ++n;
        return true;
    });
    return n;
}

// Projection of a sequence onto one process's alphabet: keeps p's sends and
// p's receipts, in order.
inline execution project(const machine& m, std::span<const action> alpha, proc_index p) {
    execution out;
    for (const action& a : alpha)
        if (m.in_alphabet(p, a)) out.push_back(a);
    return out;
}

// Local, buffer-free semantics of a single process: any action with a
// defined step may fire, receipts included, as if the environment always
// supplied the message. Enumeration order and stopping mirror
// enumerate_executions.
inline std::vector<action> local_enabled(const machine& m, proc_index p, state_index s) {
    const process& pr = m.proc(p);
    std::vector<action> out;
    for (const local_transition& t : pr.send_edges[s]) out.push_back(send_action(t.msg));
    for (const local_transition& t : pr.recv_edges[s]) out.push_back(recv_action(p, t.msg));
    return out;  // send edges then recv edges, each sorted by message: canonical
}

inline std::optional<state_index> local_step(const machine& m, proc_index p, state_index s,
                                             const action& a) {
    const process& pr = m.proc(p);
    if (a.kind == action::op::send) {
        if (m.sender_of(a.msg) != p) return std::nullopt;
        return pr.on_send(s, a.msg);
    }
    if (a.receiver != p) return std::nullopt;
    return pr.on_recv(s, a.msg);
}

// Replays a local sequence from the initial state; nullopt when some step is
// undefined (the sequence is not a local execution).
inline std::optional<state_index> local_replay(const machine& m, proc_index p,
                                               std::span<const action> delta) {
    state_index s = m.proc(p).initial;
    for (const action& a : delta) {
        auto next = local_step(m, p, s, a);
        if (!next) return std::nullopt;
        s = *next;
    }
    return s;
}

inline void local_executions(
    const machine& m, proc_index p, std::uint32_t depth,
    const std::function<bool(const execution&, state_index)>& visit) {
    execution path;
    struct frame {
        state_index state;
        std::vector<action> succ;
        std::size_t next{0};
    };
    std::vector<frame> stack;
    state_index init = m.proc(p).initial;
    if (!visit(path, init)) return;
    stack.push_back({init, local_enabled(m, p, init), 0});

    while (!stack.empty()) {
        frame& f = stack.back();
        if (path.size() >= depth || f.next >= f.succ.size()) {
            stack.pop_back();
            if (!path.empty()) path.pop_back();
            continue;
        }
        action a = f.succ[f.next++];
        state_index next = *local_step(m, p, f.state, a);
        path.push_back(a);
        if (!visit(path, next)) return;
        stack.push_back({next, local_enabled(m, p, next), 0});
    }
}

}  // namespace dmsec
