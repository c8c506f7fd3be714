// Core model: messages, actions, processes, machine composition, global states.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dmsec {

using msg_index = std::uint32_t;
using proc_index = std::uint32_t;
using state_index = std::uint32_t;

// Base class for everything this library throws.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Violations of machine well-formedness detected at composition time.
class compose_error : public error {
public:
    enum class code {
        duplicate_process,
        invalid_process,
        no_sender,
        multiple_senders,
        no_receiver,
    };

    compose_error(code c, std::string subject, const std::string& what)
        : error(what), code_(c), subject_(std::move(subject)) {}

    code what_code() const { return code_; }
    const std::string& subject() const { return subject_; }

private:
    code code_;
    std::string subject_;
};

// Lookups or state arguments that do not belong to the machine.
class model_error : public error {
public:
    enum class code {
        unknown_message,
        unknown_process,
        unknown_state,
        malformed_state,
        not_enabled,
    };

    model_error(code c, const std::string& what) : error(what), code_(c) {}
    code what_code() const { return code_; }

private:
    code code_;
};

// A send of a message, or a receipt of a message by a specific process.
// The sender is implicit: machine composition assigns each message exactly
// one sending process.
struct action {
    enum class op : std::uint8_t { send, recv };

    op kind{op::send};
    msg_index msg{0};
    proc_index receiver{0};  // meaningful for recv only; 0 for send

    friend bool operator==(const action&, const action&) = default;

    std::uint64_t code() const {
        return (std::uint64_t(kind == op::recv) << 56) |
               (std::uint64_t(receiver) << 32) | msg;
    }
};

inline action send_action(msg_index m) { return {action::op::send, m, 0}; }
inline action recv_action(proc_index p, msg_index m) { return {action::op::recv, m, p}; }

using execution = std::vector<action>;

// One process: a finite set of states with a partial step function split
// into send edges and receive edges, plus declared input/output alphabets.
// Message and state identifiers are resolved to dense indices at composition.
struct local_transition {
    msg_index msg;
    state_index target;
};

struct process {
    std::string name;
    std::vector<std::string> state_names;
    state_index initial{0};
    std::vector<msg_index> inputs;   // sorted
    std::vector<msg_index> outputs;  // sorted
    // Per state, sorted by message index. At most one target per key.
    std::vector<std::vector<local_transition>> send_edges;
    std::vector<std::vector<local_transition>> recv_edges;

    bool can_output(msg_index m) const {
        return std::binary_search(outputs.begin(), outputs.end(), m);
    }
    bool can_input(msg_index m) const {
        return std::binary_search(inputs.begin(), inputs.end(), m);
    }

    static std::optional<state_index> lookup(const std::vector<local_transition>& edges,
                                             msg_index m) {
        auto it = std::lower_bound(edges.begin(), edges.end(), m,
                                   [](const local_transition& t, msg_index v) { return t.msg < v; });
        if (it == edges.end() || it->msg != m) return std::nullopt;
        return it->target;
    }

    std::optional<state_index> on_send(state_index s, msg_index m) const {
        return lookup(send_edges[s], m);
    }
    std::optional<state_index> on_recv(state_index s, msg_index m) const {
        return lookup(recv_edges[s], m);
    }

    std::optional<state_index> find_state(std::string_view n) const {
        for (state_index i = 0; i < state_names.size(); ++i)
            if (state_names[i] == n) return i;
        return std::nullopt;
    }
};

// Authoring form of a process, prior to composition.
struct process_decl {
    struct transition {
        std::string from;
        bool is_send{true};
        std::string msg;
        std::string to;
    };

    std::string name;
    std::vector<std::string> states;
    std::string initial;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<transition> transitions;
};

// Per-process configuration: current state plus FIFO input buffer.
struct local_config {
    state_index state{0};
    std::vector<msg_index> buffer;

    friend bool operator==(const local_config&, const local_config&) = default;
};

struct global_state {
    std::vector<local_config> procs;

    friend bool operator==(const global_state&, const global_state&) = default;
};

inline std::size_t hash_combine(std::size_t h, std::size_t v) {
    return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

struct global_state_hash {
    std::size_t operator()(const global_state& g) const {
        std::size_t h = 0xcbf29ce484222325ull;
        for (const auto& lc : g.procs) {
            h = hash_combine(h, lc.state);
            h = hash_combine(h, lc.buffer.size());
            for (msg_index m : lc.buffer) h = hash_combine(h, m);
        }
        return h;
    }
};

// A composed machine. Message names are interned into a table sorted
// lexicographically, so message index order coincides with name order.
// Process order is the declaration order.
class machine {
public:
    friend machine compose(const std::vector<process_decl>& decls);

    std::size_t proc_count() const { return procs_.size(); }
    std::size_t message_count() const { return messages_.size(); }

    const process& proc(proc_index p) const {
        require(p < procs_.size(), model_error::code::unknown_process,
                "process index out of range");
        return procs_[p];
    }
    const std::string& message_name(msg_index m) const {
        require(m < messages_.size(), model_error::code::unknown_message,
                "message index out of range");
        return messages_[m];
    }

    std::optional<proc_index> find_proc(std::string_view name) const {
        for (proc_index i = 0; i < procs_.size(); ++i)
            if (procs_[i].name == name) return i;
        return std::nullopt;
    }
    proc_index proc_id(std::string_view name) const {
        auto p = find_proc(name);
        require(p.has_value(), model_error::code::unknown_process,
                "unknown process: " + std::string(name));
        return *p;
    }
    std::optional<msg_index> find_message(std::string_view name) const {
        auto it = std::lower_bound(messages_.begin(), messages_.end(), name);
        if (it == messages_.end() || *it != name) return std::nullopt;
        return msg_index(it - messages_.begin());
    }
    msg_index message_id(std::string_view name) const {
        auto m = find_message(name);
        require(m.has_value(), model_error::code::unknown_message,
                "unknown message: " + std::string(name));
        return *m;
    }

    proc_index sender_of(msg_index m) const {
        require(m < messages_.size(), model_error::code::unknown_message,
                "message index out of range");
        return sender_[m];
    }
    const std::vector<proc_index>& receivers_of(msg_index m) const {
        require(m < messages_.size(), model_error::code::unknown_message,
                "message index out of range");
        return receivers_[m];
    }

    // The domain of an action: the sender of its message, for both variants.
    proc_index dom(const action& a) const { return sender_of(a.msg); }

    // True iff a is one of p's own actions (a send by p, or a receipt by p).
    bool in_alphabet(proc_index p, const action& a) const {
        if (a.kind == action::op::send) return sender_of(a.msg) == p;
        return a.receiver == p;
    }

    global_state initial_state() const {
        global_state g;
        g.procs.reserve(procs_.size());
        for (const auto& pr : procs_) g.procs.push_back({pr.initial, {}});
        return g;
    }

    const local_config& obs(proc_index p, const global_state& g) const {
        require(p < procs_.size(), model_error::code::unknown_process,
                "process index out of range");
        require(g.procs.size() == procs_.size(), model_error::code::malformed_state,
                "global state has wrong number of components");
        return g.procs[p];
    }

    // Total order used wherever actions are enumerated or sorted:
    // sends before receives, then acting process (sender for a send,
    // receiver for a receipt) in declaration order, then message name.
    std::uint64_t order_key(const action& a) const {
        proc_index p = a.kind == action::op::send ? sender_of(a.msg) : a.receiver;
        return (std::uint64_t(a.kind == action::op::recv) << 48) |
               (std::uint64_t(p) << 24) | a.msg;
    }

    std::string render(const action& a) const {
        if (a.kind == action::op::send) return "!" + message_name(a.msg);
        return "?" + proc(a.receiver).name + " " + message_name(a.msg);
    }

    std::string render(std::span<const action> seq) const {
        if (seq.empty()) return "(empty)";
        std::string out;
        for (const action& a : seq) {
            if (!out.empty()) out += ' ';
            out += render(a);
        }
        return out;
    }

    std::string render_buffer(std::span<const msg_index> buffer) const {
        std::string out = "[";
        for (msg_index mi : buffer) {
            if (out.size() > 1) out += ' ';
            out += message_name(mi);
        }
        return out + "]";
    }

    action parse_action(std::string_view text) const {
        if (text.size() >= 2 && text.front() == '!')
            return send_action(message_id(text.substr(1)));
        if (text.size() >= 2 && text.front() == '?') {
            auto sp = text.find(' ');
            require(sp != std::string_view::npos && sp > 1 && sp + 1 < text.size(),
                    model_error::code::unknown_message,
                    "malformed action: " + std::string(text));
            proc_index p = proc_id(text.substr(1, sp - 1));
            msg_index m = message_id(text.substr(sp + 1));
            require(proc(p).can_input(m), model_error::code::unknown_message,
                    "process " + proc(p).name + " does not input " + message_name(m));
            return recv_action(p, m);
        }
        throw model_error(model_error::code::unknown_message,
                          "malformed action: " + std::string(text));
    }

    // Throws malformed_state unless g is structurally valid for this machine.
    void validate_state(const global_state& g) const {
        require(g.procs.size() == procs_.size(), model_error::code::malformed_state,
                "global state has wrong number of components");
        for (proc_index p = 0; p < procs_.size(); ++p) {
            const auto& lc = g.procs[p];
            require(lc.state < procs_[p].state_names.size(),
                    model_error::code::malformed_state,
                    "state index out of range for process " + procs_[p].name);
            for (msg_index m : lc.buffer)
                require(m < messages_.size() && procs_[p].can_input(m),
                        model_error::code::malformed_state,
                        "buffer of " + procs_[p].name + " holds a message it cannot input");
        }
    }

private:
    static void require(bool ok, model_error::code c, const std::string& what) {
        if (!ok) throw model_error(c, what);
    }

    std::vector<process> procs_;
    std::vector<std::string> messages_;        // sorted
    std::vector<proc_index> sender_;           // per message
    std::vector<std::vector<proc_index>> receivers_;  // per message, sorted
};

namespace detail {

inline void check_identifier(const std::string& id, const char* role) {
    if (id.empty())
        throw compose_error(compose_error::code::invalid_process, id,
                            std::string(role) + " name is empty");
    for (char c : id)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
            static_cast<unsigned char>(c) < 0x20)
            throw compose_error(compose_error::code::invalid_process, id,
                                std::string(role) + " name '" + id +
                                    "' contains whitespace or control characters");
}

}  // namespace detail

// Builds a machine from process declarations. Checks composability: every
// message appearing in any alphabet has exactly one sender and at least one
// receiver, and every transition refers to declared states and alphabets.
inline machine compose(const std::vector<process_decl>& decls) {
    using code = compose_error::code;
    machine m;

    auto invalid = [](const std::string& who, const std::string& what) -> compose_error {
        return compose_error(code::invalid_process, who, "process " + who + ": " + what);
    };

    // Message table, sorted by name.
    std::vector<std::string> names;
    for (const auto& d : decls) {
        detail::check_identifier(d.name, "process");
        for (const auto& s : d.inputs) names.push_back(s);
        for (const auto& s : d.outputs) names.push_back(s);
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    for (const auto& n : names) detail::check_identifier(n, "message");
    m.messages_ = names;

    auto msg_id = [&](const std::string& n) -> msg_index {
        auto it = std::lower_bound(names.begin(), names.end(), n);
        return msg_index(it - names.begin());
    };
    auto msg_lookup = [&](const std::string& n) -> std::optional<msg_index> {
        auto it = std::lower_bound(names.begin(), names.end(), n);
        if (it == names.end() || *it != n) return std::nullopt;
        return msg_index(it - names.begin());
    };

    constexpr proc_index nobody = ~proc_index(0);
    m.sender_.assign(names.size(), nobody);
    m.receivers_.assign(names.size(), {});

    for (proc_index pi = 0; pi < decls.size(); ++pi) {
        const auto& d = decls[pi];
        if (m.find_proc(d.name))
            throw compose_error(code::duplicate_process, d.name,
                                "duplicate process name: " + d.name);

        process p;
        p.name = d.name;
        p.state_names = d.states;
        if (p.state_names.empty()) throw invalid(d.name, "no states declared");
        std::unordered_map<std::string_view, state_index> state_ix;
        for (state_index si = 0; si < p.state_names.size(); ++si) {
            detail::check_identifier(p.state_names[si], "state");
            if (!state_ix.emplace(p.state_names[si], si).second)
                throw invalid(d.name, "duplicate state name '" + p.state_names[si] + "'");
        }
        auto init = state_ix.find(d.initial);
        if (init == state_ix.end())
            throw invalid(d.name, "initial state '" + d.initial + "' not declared");
        p.initial = init->second;

        for (const auto& s : d.inputs) {
            msg_index mi = msg_id(s);
            p.inputs.push_back(mi);
            m.receivers_[mi].push_back(pi);
        }
        for (const auto& s : d.outputs) {
            msg_index mi = msg_id(s);
            p.outputs.push_back(mi);
            if (m.sender_[mi] != nobody && m.sender_[mi] != pi) {
                std::string who = m.procs_[m.sender_[mi]].name + ", " + d.name;
                throw compose_error(code::multiple_senders, s,
                                    "message " + s + " has multiple senders: " + who);
            }
            m.sender_[mi] = pi;
        }
        std::sort(p.inputs.begin(), p.inputs.end());
        std::sort(p.outputs.begin(), p.outputs.end());
        if (std::adjacent_find(p.inputs.begin(), p.inputs.end()) != p.inputs.end())
            throw invalid(d.name, "duplicate input message");
        if (std::adjacent_find(p.outputs.begin(), p.outputs.end()) != p.outputs.end())
            throw invalid(d.name, "duplicate output message");

        p.send_edges.assign(p.state_names.size(), {});
        p.recv_edges.assign(p.state_names.size(), {});
        for (const auto& t : d.transitions) {
            auto from = state_ix.find(t.from);
            auto to = state_ix.find(t.to);
            if (from == state_ix.end() || to == state_ix.end())
                throw invalid(d.name, "transition refers to undeclared state '" +
                                          (from != state_ix.end() ? t.to : t.from) + "'");
            auto found = msg_lookup(t.msg);
            if (!found)
                throw invalid(d.name, "transition on undeclared message '" + t.msg + "'");
            msg_index mi = *found;
            auto& edges = t.is_send ? p.send_edges[from->second] : p.recv_edges[from->second];
            if (t.is_send && !std::binary_search(p.outputs.begin(), p.outputs.end(), mi))
                throw invalid(d.name, "send of undeclared output '" + t.msg + "'");
            if (!t.is_send && !std::binary_search(p.inputs.begin(), p.inputs.end(), mi))
                throw invalid(d.name, "receipt of undeclared input '" + t.msg + "'");
            for (const auto& e : edges)
                if (e.msg == mi)
                    throw invalid(d.name, "duplicate transition on state '" + t.from +
                                              "' and message '" + t.msg + "'");
            edges.push_back({mi, to->second});
        }
        for (auto& edges : p.send_edges)
            std::sort(edges.begin(), edges.end(),
                      [](const local_transition& a, const local_transition& b) { return a.msg < b.msg; });
        for (auto& edges : p.recv_edges)
            std::sort(edges.begin(), edges.end(),
                      [](const local_transition& a, const local_transition& b) { return a.msg < b.msg; });

        m.procs_.push_back(std::move(p));
    }

    for (msg_index mi = 0; mi < m.messages_.size(); ++mi) {
        if (m.sender_[mi] == nobody)
            throw compose_error(code::no_sender, m.messages_[mi],
                                "message " + m.messages_[mi] + " has no sender");
        if (m.receivers_[mi].empty())
            throw compose_error(code::no_receiver, m.messages_[mi],
                                "message " + m.messages_[mi] + " has no receiver");
        std::sort(m.receivers_[mi].begin(), m.receivers_[mi].end());
    }

    return m;
}

}  // namespace dmsec

template <>
struct std::hash<dmsec::global_state> {
    std::size_t operator()(const dmsec::global_state& g) const {
        return dmsec::global_state_hash{}(g);
    }
};
