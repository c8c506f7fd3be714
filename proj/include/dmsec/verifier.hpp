// Checkers: execution compliance, local filter respect, unwinding conditions,
// local invariants, plus seeded generators and cross-validation sweeps.
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "core.hpp"
#include "expr.hpp"
#include "policy.hpp"
#include "semantics.hpp"

namespace dmsec {

class resource_limit_error : public error {
public:
    explicit resource_limit_error(const std::string& what) : error(what) {}
};

struct limits {
    std::uint64_t max_states = 10'000'000;
    double max_seconds = 600.0;
};

namespace detail {

class limit_guard {
public:
    explicit limit_guard(const limits& l)
        : limits_(l), start_(std::chrono::steady_clock::now()) {}

    void tick(const char* what) {
        if (++count_ > limits_.max_states)
            throw resource_limit_error(std::string(what) + ": exceeded " +
                                       std::to_string(limits_.max_states) + " explored states");
        if ((count_ & 1023) == 0) {
            auto elapsed = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start_)
                               .count();
            if (elapsed > limits_.max_seconds)
                throw resource_limit_error(std::string(what) + ": exceeded " +
                                           std::to_string(limits_.max_seconds) + " seconds");
        }
    }

    std::uint64_t count() const { return count_; }

private:
    limits limits_;
    std::chrono::steady_clock::time_point start_;
    std::uint64_t count_{0};
};

// Append-only intern pool for action sequences; id 0 is the empty sequence.
// A sequence is (parent id, action), so shared prefixes share entries.
class seq_pool {
public:
    std::uint32_t extend(std::uint32_t prev, const action& a) {
        std::uint64_t key = (std::uint64_t(prev) << 33) | compact(a);
        auto [it, inserted] = map_.try_emplace(key, std::uint32_t(entries_.size() + 1));
        if (inserted) {
            if (entries_.size() + 1 >= (1u << 30))
                throw resource_limit_error("interned sequence pool exhausted");
            entries_.push_back({prev, a});
        }
        return it->second;
    }

    execution expand(std::uint32_t id) const {
        execution out;
        while (id != 0) {
            const auto& e = entries_[id - 1];
            out.push_back(e.second);
            id = e.first;
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    static std::uint64_t compact(const action& a) {
        return (std::uint64_t(a.kind == action::op::recv) << 32) |
               (std::uint64_t(a.receiver) << 16) | a.msg;
    }

    std::unordered_map<std::uint64_t, std::uint32_t> map_;
    std::vector<std::pair<std::uint32_t, action>> entries_;
};

}  // namespace detail

struct compliance_counterexample {
    proc_index domain{0};
    execution alpha;
    execution beta;
    execution shared_purge;
    local_config obs_alpha;
    local_config obs_beta;
};

struct filter_counterexample {
    proc_index src{0};
    proc_index dst{0};
    execution delta;  // local execution of src
    action violating;
};

struct unwinding_counterexample {
    enum class condition {
        output_consistency,
        step_consistency,
        local_respect,
        strict_enabledness,
    };

    condition cond{condition::output_consistency};
    proc_index domain{0};
    execution to_s;
    execution to_t;
    std::optional<action> act;
};

struct invariant_counterexample {
    execution delta;  // local execution
    std::string state_name;
};

using counterexample = std::variant<compliance_counterexample, filter_counterexample,
                                    unwinding_counterexample, invariant_counterexample>;

struct verdict {
    bool passed{true};
    std::optional<counterexample> cex;
    std::uint64_t states_explored{0};
    std::uint32_t depth_reached{0};
};

// ---------------------------------------------------------------------------
// Independent re-checkers. These recompute everything from first principles
// (filter_eval over projected prefixes, explicit FIFO matching) so a reported
// counterexample never depends on the machinery that found it.

// Purge computed directly from the definition: per action, look up the edge
// from its source; evaluate filters with filter_eval over the projected
// prefix for the source's own actions; pair a cross-process receipt with its
// k-th matching send.
inline execution naive_purge(const machine& m, const security_policy& p, proc_index domain,
                             std::span<const action> alpha) {
    execution out;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const action& a = alpha[i];
        proc_index src = m.dom(a);
        const edge_label* label = p.label(src, domain);
        if (!label) continue;
        if (label->is_top) {
            out.push_back(a);
            continue;
        }
        const filter_monitor& f = p.monitors[label->monitor];
        std::span<const action> prefix = alpha.subspan(0, i);
        if (m.in_alphabet(src, a)) {
            if (filter_eval(f, project(m, prefix, src), a)) out.push_back(a);
            continue;
        }
        // Count which receipt of (msg, receiver) this is, find the matching
        // send, and evaluate the filter at that send.
        std::size_t k = 0;
        for (const action& b : prefix)
            if (b.kind == action::op::recv && b.msg == a.msg && b.receiver == a.receiver) ++k;
        std::size_t seen = 0;
        bool value = false;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            const action& b = alpha[j];
            if (b.kind != action::op::send || b.msg != a.msg) continue;
            if (seen++ == k) {
                value = filter_eval(f, project(m, alpha.subspan(0, j), src), b);
                break;
            }
        }
        if (value) out.push_back(a);
    }
    return out;
}

inline bool verify_compliance_cex(const machine& m, const security_policy& p,
                                  const compliance_counterexample& c, std::string* why = nullptr) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    if (!is_valid_execution(m, c.alpha)) return fail("alpha does not replay");
    if (!is_valid_execution(m, c.beta)) return fail("beta does not replay");
    execution pa = naive_purge(m, p, c.domain, c.alpha);
    execution pb = naive_purge(m, p, c.domain, c.beta);
    if (pa != pb) return fail("purges differ");
    if (pa != c.shared_purge) return fail("stated shared purge is wrong");
    local_config oa = m.obs(c.domain, replay(m, c.alpha));
    local_config ob = m.obs(c.domain, replay(m, c.beta));
    if (oa != c.obs_alpha || ob != c.obs_beta) return fail("stated observations are wrong");
    if (oa == ob) return fail("observations agree; not a violation");
    return true;
}

inline bool verify_filter_cex(const machine& m, const security_policy& p,
                              const filter_counterexample& c, std::string* why = nullptr) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    const edge_label* label = p.label(c.src, c.dst);
    if (!label || label->is_top) return fail("edge is not filtered");
    auto end = local_replay(m, c.src, c.delta);
    if (!end) return fail("delta is not a local execution of src");
    if (c.violating.kind != action::op::send) return fail("violating action is not a send");
    if (!local_step(m, c.src, *end, c.violating)) return fail("violating send is not enabled");
    const auto& rs = m.receivers_of(c.violating.msg);
    if (std::find(rs.begin(), rs.end(), c.dst) == rs.end())
        return fail("dst does not receive the violating message");
    if (filter_eval(p.monitors[label->monitor], c.delta, c.violating))
        return fail("filter permits the send; not a violation");
    return true;
}

// ---------------------------------------------------------------------------
// Compliance: distinct observations behind equal purged views.

// Explores every execution up to the depth bound in enumeration order,
// grouping them per domain by interned purge. The first group that maps one
// purged view to two different observations yields the counterexample, which
// is re-verified through the independent path before being returned.
inline verdict check_compliance(const machine& m, const security_policy& p, std::uint32_t depth,
                                const limits& lim = {}) {
    struct seen_entry {
        std::uint32_t obs_id;
        std::uint32_t path_id;
    };
    struct domain_data {
        std::unordered_map<std::uint32_t, seen_entry> groups;       // purge id -> first
        std::unordered_map<std::string, std::uint32_t> obs_intern;  // rendered obs -> id
    };

    detail::limit_guard guard(lim);
    detail::seq_pool pool;
    std::vector<domain_data> domains(m.proc_count());

    auto obs_key = [](const local_config& lc) {
        std::string k = std::to_string(lc.state);
        for (msg_index b : lc.buffer) {
            k += ',';
            k += std::to_string(b);
        }
        return k;
    };

    struct frame {
        global_state state;
        std::vector<purge_tracker> trackers;
        std::vector<std::uint32_t> purge_ids;
        std::uint32_t path_id{0};
        std::vector<action> succ;
        std::size_t next{0};
    };

    verdict v;
    std::optional<compliance_counterexample> found;

    auto visit = [&](frame& f, std::uint32_t length) -> bool {
        guard.tick("check_compliance");
        v.states_explored += 1;
        if (length > v.depth_reached) v.depth_reached = length;
        for (proc_index d = 0; d < m.proc_count(); ++d) {
            const local_config& lc = f.state.procs[d];
            auto& dd = domains[d];
            std::uint32_t obs_id =
                dd.obs_intern.try_emplace(obs_key(lc), std::uint32_t(dd.obs_intern.size()))
                    .first->second;
            auto [it, inserted] =
                dd.groups.try_emplace(f.purge_ids[d], seen_entry{obs_id, f.path_id});
            if (!inserted && it->second.obs_id != obs_id) {
                compliance_counterexample c;
                c.domain = d;
                c.alpha = pool.expand(it->second.path_id);
                c.beta = pool.expand(f.path_id);
                c.shared_purge = pool.expand(f.purge_ids[d]);
                c.obs_alpha = m.obs(d, replay(m, c.alpha));
                c.obs_beta = lc;
                found = std::move(c);
                return false;
            }
        }
        return true;
    };

    std::vector<frame> stack;
    {
        frame root;
        root.state = m.initial_state();
        for (proc_index d = 0; d < m.proc_count(); ++d) {
            root.trackers.emplace_back(m, p, d);
            root.purge_ids.push_back(0);
        }
        if (visit(root, 0)) {
            root.succ = enabled_actions(m, root.state);
            stack.push_back(std::move(root));
        }
    }

    std::uint32_t path_len = 0;
    while (!stack.empty() && !found) {
        frame& f = stack.back();
        if (path_len >= depth || f.next >= f.succ.size()) {
            stack.pop_back();
            if (path_len > 0) --path_len;
            continue;
        }
        action a = f.succ[f.next++];
        frame child;
        child.state = step_global(m, f.state, a);
        child.trackers = f.trackers;
        child.purge_ids = f.purge_ids;
        child.path_id = pool.extend(f.path_id, a);
        for (proc_index d = 0; d < m.proc_count(); ++d)
            if (child.trackers[d].feed(a)) child.purge_ids[d] = pool.extend(child.purge_ids[d], a);
        ++path_len;
        if (!visit(child, path_len)) break;
        child.succ = enabled_actions(m, child.state);
        stack.push_back(std::move(child));
    }

    if (found) {
        std::string why;
        if (!verify_compliance_cex(m, p, *found, &why))
            throw error("internal: compliance counterexample failed re-verification: " + why);
        v.passed = false;
        v.cex = std::move(*found);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Local filter respect: along every local execution of src, any enabled send
// that dst receives must be permitted by the edge's filter.

struct filter_check_mode {
    bool fixpoint{true};
    std::uint32_t depth{0};

    static filter_check_mode to_fixpoint() { return {true, 0}; }
    static filter_check_mode to_depth(std::uint32_t d) { return {false, d}; }
};

inline verdict check_local_filter_respect(const machine& m, const security_policy& p,
                                          proc_index src, proc_index dst,
                                          filter_check_mode mode = {}, const limits& lim = {}) {
    const edge_label* label = p.label(src, dst);
    if (!label || label->is_top)
        throw policy_error(policy_error::code::not_a_filtered_edge,
                           "edge " + m.proc(src).name + " -> " + m.proc(dst).name +
                               " is not filtered");
    const filter_monitor& f = p.monitors[label->monitor];
    const process& pr = m.proc(src);

    struct node {
        state_index state;
        monitor_config cfg;
        std::uint32_t parent;
        action via;
        std::uint32_t level;
    };
    struct key_hash {
        std::size_t operator()(const std::pair<state_index, monitor_config>& k) const {
            return hash_combine(monitor_config_hash{}(k.second), k.first);
        }
    };

    detail::limit_guard guard(lim);
    std::vector<node> nodes;
    std::unordered_map<std::pair<state_index, monitor_config>, std::uint32_t, key_hash> visited;

    auto path_to = [&](std::uint32_t idx) {
        execution out;
        while (idx != 0) {
            out.push_back(nodes[idx].via);
            idx = nodes[idx].parent;
        }
        std::reverse(out.begin(), out.end());
        return out;
    };

    verdict v;
    nodes.push_back({pr.initial, initial_config(f), 0, {}, 0});
    visited.emplace(std::make_pair(pr.initial, nodes[0].cfg), 0);

    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
        node n = nodes[i];
        guard.tick("check_local_filter_respect");
        v.states_explored += 1;
        if (n.level > v.depth_reached) v.depth_reached = n.level;

        for (const local_transition& t : pr.send_edges[n.state]) {
            const auto& rs = m.receivers_of(t.msg);
            if (std::find(rs.begin(), rs.end(), dst) == rs.end()) continue;
            action a = send_action(t.msg);
            monitor_config after = monitor_step(f, n.cfg, a);
            if (!monitor_emits(f, after, a)) {
                filter_counterexample c;
                c.src = src;
                c.dst = dst;
                c.delta = path_to(i);
                c.violating = a;
                std::string why;
                if (!verify_filter_cex(m, p, c, &why))
                    throw error("internal: filter counterexample failed re-verification: " + why);
                v.passed = false;
                v.cex = std::move(c);
                return v;
            }
        }

        if (!mode.fixpoint && n.level >= mode.depth) continue;
        for (const action& a : local_enabled(m, src, n.state)) {
            node next{*local_step(m, src, n.state, a), monitor_step(f, n.cfg, a), i, a,
                      n.level + 1};
            auto key = std::make_pair(next.state, next.cfg);
            if (visited.emplace(key, std::uint32_t(nodes.size())).second)
                nodes.push_back(std::move(next));
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Unwinding conditions over the states reachable within a depth bound.

struct unwinding_relation {
    std::string name;
    // Two states are related for a domain iff their keys are equal.
    std::function<std::string(const machine&, proc_index, const global_state&)> key_for;
};

// Equality of the domain's own component (state and buffer).
inline unwinding_relation canonical_relation() {
    return {"canonical", [](const machine&, proc_index p, const global_state& g) {
                const local_config& lc = g.procs[p];
                std::string k = std::to_string(lc.state);
                for (msg_index b : lc.buffer) {
                    k += ',';
                    k += std::to_string(b);
                }
                return k;
            }};
}

// Checks output consistency, step consistency, and local respect of the
// relation over all states reachable within `depth` steps. Step consistency
// is read over actions enabled in both related states; with `strict_step`
// related states must also enable exactly the same actions.
inline verdict check_unwinding(const machine& m, const security_policy& p,
                               const unwinding_relation& rel, std::uint32_t depth,
                               bool strict_step = false, const limits& lim = {}) {
    struct node {
        global_state state;
        std::uint32_t parent;
        action via;
        std::uint32_t level;
    };

    detail::limit_guard guard(lim);
    std::vector<node> nodes;
    std::unordered_map<global_state, std::uint32_t> visited;

    nodes.push_back({m.initial_state(), 0, {}, 0});
    visited.emplace(nodes[0].state, 0);

    verdict v;
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
        guard.tick("check_unwinding");
        v.states_explored += 1;
        if (nodes[i].level > v.depth_reached) v.depth_reached = nodes[i].level;
        if (nodes[i].level >= depth) continue;
        for (const action& a : enabled_actions(m, nodes[i].state)) {
            global_state next = step_global(m, nodes[i].state, a);
            if (visited.emplace(next, std::uint32_t(nodes.size())).second)
                nodes.push_back({std::move(next), i, a, nodes[i].level + 1});
        }
    }

    auto path_to = [&](std::uint32_t idx) {
        execution out;
        while (idx != 0) {
            out.push_back(nodes[idx].via);
            idx = nodes[idx].parent;
        }
        std::reverse(out.begin(), out.end());
        return out;
    };

    auto fail = [&](unwinding_counterexample::condition cond, proc_index d, std::uint32_t s,
                    std::uint32_t t, std::optional<action> a) {
        unwinding_counterexample c;
        c.cond = cond;
        c.domain = d;
        c.to_s = path_to(s);
        c.to_t = path_to(t);
        c.act = a;
        v.passed = false;
        v.cex = std::move(c);
    };

    using cond = unwinding_counterexample::condition;
    for (proc_index d = 0; d < m.proc_count() && v.passed; ++d) {
        std::vector<std::string> keys(nodes.size());
        for (std::uint32_t i = 0; i < nodes.size(); ++i)
            keys[i] = rel.key_for(m, d, nodes[i].state);

        // Output consistency: related states agree on the observation.
        {
            std::unordered_map<std::string, std::uint32_t> first;
            for (std::uint32_t i = 0; i < nodes.size(); ++i) {
                auto [it, inserted] = first.try_emplace(keys[i], i);
                if (!inserted &&
                    !(m.obs(d, nodes[it->second].state) == m.obs(d, nodes[i].state))) {
                    fail(cond::output_consistency, d, it->second, i, std::nullopt);
                    break;
                }
            }
        }
        if (!v.passed) break;

        if (strict_step) {
            auto enabled_sig = [&](std::uint32_t i) {
                std::string sig;
                for (const action& a : enabled_actions(m, nodes[i].state)) {
                    sig += m.render(a);
                    sig += ';';
                }
                return sig;
            };
            std::unordered_map<std::string, std::pair<std::uint32_t, std::string>> first;
            for (std::uint32_t i = 0; i < nodes.size(); ++i) {
                auto [it, inserted] = first.try_emplace(keys[i], i, enabled_sig(i));
                if (!inserted && it->second.second != enabled_sig(i)) {
                    fail(cond::strict_enabledness, d, it->second.first, i, std::nullopt);
                    break;
                }
            }
            if (!v.passed) break;
        }

        // Step consistency: from related states, a commonly enabled action
        // leads to related states. Local respect: an action whose source may
        // not flow to the domain leaves the relation class unchanged.
        std::unordered_map<std::string, std::pair<std::uint32_t, std::string>> step_first;
        for (std::uint32_t i = 0; i < nodes.size() && v.passed; ++i) {
            for (const action& a : enabled_actions(m, nodes[i].state)) {
                global_state next = step_global(m, nodes[i].state, a);
                std::string next_key = rel.key_for(m, d, next);
                if (!p.has_edge(m.dom(a), d) && next_key != keys[i]) {
                    fail(cond::local_respect, d, i, i, a);
                    break;
                }
                std::string sk = keys[i];
                sk += '|';
                sk += m.render(a);
                auto [it, inserted] = step_first.try_emplace(std::move(sk), i, next_key);
                if (!inserted && it->second.second != next_key) {
                    fail(cond::step_consistency, d, it->second.first, i, a);
                    break;
                }
            }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Local invariants: a state predicate must hold in every reachable state of
// one process under the buffer-free local semantics.

namespace detail {

// State names of the form "Location|field=value|..." expose `location` and
// each field to predicates; any state exposes its full name as `state`.
class state_env : public expr::environment {
public:
    explicit state_env(const std::string& name) : name_(name) {
        std::size_t start = 0;
        bool first = true;
        while (start <= name.size()) {
            std::size_t end = name.find('|', start);
            if (end == std::string::npos) end = name.size();
            std::string part = name.substr(start, end - start);
            if (first) {
                location_ = part;
                first = false;
            } else if (auto eq = part.find('='); eq != std::string::npos) {
                std::string key = part.substr(0, eq);
                std::string val = part.substr(eq + 1);
                try {
                    fields_[key] = expr::value(std::int64_t(std::stoll(val)));
                } catch (...) {
                    fields_[key] = expr::value(val);
                }
            }
            start = end + 1;
        }
    }

    std::optional<expr::value> lookup(std::string_view name) const override {
        if (name == "location") return expr::value(location_);
        if (name == "state") return expr::value(name_);
        auto it = fields_.find(std::string(name));
        if (it == fields_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::string name_;
    std::string location_;
    std::unordered_map<std::string, expr::value> fields_;
};

}  // namespace detail

inline verdict check_invariant(const machine& m, proc_index p, const expr::expression& predicate,
                               const limits& lim = {}) {
    const process& pr = m.proc(p);

    struct node {
        state_index state;
        std::uint32_t parent;
        action via;
        std::uint32_t level;
    };

    detail::limit_guard guard(lim);
    std::vector<node> nodes;
    std::vector<bool> visited(pr.state_names.size(), false);

    nodes.push_back({pr.initial, 0, {}, 0});
    visited[pr.initial] = true;

    verdict v;
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
        guard.tick("check_invariant");
        v.states_explored += 1;
        if (nodes[i].level > v.depth_reached) v.depth_reached = nodes[i].level;

        detail::state_env env(pr.state_names[nodes[i].state]);
        if (!expr::eval_bool(predicate, env)) {
            invariant_counterexample c;
            std::uint32_t idx = i;
            while (idx != 0) {
                c.delta.push_back(nodes[idx].via);
                idx = nodes[idx].parent;
            }
            std::reverse(c.delta.begin(), c.delta.end());
            c.state_name = pr.state_names[nodes[i].state];
            v.passed = false;
            v.cex = std::move(c);
            return v;
        }

        for (const action& a : local_enabled(m, p, nodes[i].state)) {
            state_index next = *local_step(m, p, nodes[i].state, a);
            if (!visited[next]) {
                visited[next] = true;
                nodes.push_back({next, i, a, nodes[i].level + 1});
            }
        }
    }
    return v;
}

inline verdict check_invariant(const machine& m, proc_index p, std::string_view predicate,
                               const limits& lim = {}) {
    return check_invariant(m, p, expr::expression::parse(predicate), lim);
}

inline bool verify_invariant_cex(const machine& m, proc_index p, const expr::expression& predicate,
                                 const invariant_counterexample& c, std::string* why = nullptr) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    auto end = local_replay(m, p, c.delta);
    if (!end) return fail("delta is not a local execution");
    if (m.proc(p).state_names[*end] != c.state_name) return fail("stated end state is wrong");
    detail::state_env env(c.state_name);
    if (expr::eval_bool(predicate, env)) return fail("predicate holds; not a violation");
    return true;
}

inline bool verify_unwinding_cex(const machine& m, const security_policy& p,
                                 const unwinding_relation& rel,
                                 const unwinding_counterexample& c, std::string* why = nullptr) {
    auto fail = [&](const char* msg) {
        if (why) *why = msg;
        return false;
    };
    if (!is_valid_execution(m, c.to_s)) return fail("path to s does not replay");
    if (!is_valid_execution(m, c.to_t)) return fail("path to t does not replay");
    global_state s = replay(m, c.to_s);
    global_state t = replay(m, c.to_t);
    std::string ks = rel.key_for(m, c.domain, s);
    std::string kt = rel.key_for(m, c.domain, t);

    using cond = unwinding_counterexample::condition;
    switch (c.cond) {
        case cond::output_consistency:
            if (ks != kt) return fail("states are not related");
            if (m.obs(c.domain, s) == m.obs(c.domain, t))
                return fail("observations agree; not a violation");
            return true;
        case cond::strict_enabledness: {
            if (ks != kt) return fail("states are not related");
            if (enabled_actions(m, s) == enabled_actions(m, t))
                return fail("enabled sets agree; not a violation");
            return true;
        }
        case cond::step_consistency: {
            if (ks != kt) return fail("states are not related");
            if (!c.act) return fail("no action recorded");
            if (!is_enabled(m, s, *c.act) || !is_enabled(m, t, *c.act))
                return fail("action is not enabled in both states");
            if (rel.key_for(m, c.domain, step_global(m, s, *c.act)) ==
                rel.key_for(m, c.domain, step_global(m, t, *c.act)))
                return fail("successors are related; not a violation");
            return true;
        }
        case cond::local_respect: {
            if (!c.act) return fail("no action recorded");
            if (p.has_edge(m.dom(*c.act), c.domain))
                return fail("the action's source may flow to the domain");
            if (!is_enabled(m, s, *c.act)) return fail("action is not enabled");
            if (rel.key_for(m, c.domain, step_global(m, s, *c.act)) == ks)
                return fail("relation class unchanged; not a violation");
            return true;
        }
    }
    return fail("unknown condition");
}

// ---------------------------------------------------------------------------
// Seeded generators. All randomness flows through one engine so results are
// reproducible from the seed alone, on any platform.

namespace detail {

class split_rng {
public:
    explicit split_rng(std::uint64_t seed)
        : eng_(seed * 0x9e3779b97f4a7c15ull + 0xd1b54a32d192ed03ull) {}

    std::uint64_t next() { return eng_(); }
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + std::int64_t(below(std::uint64_t(hi - lo + 1)));
    }
    bool chance(double p) { return double(next() >> 11) * 0x1.0p-53 < p; }

private:
    std::mt19937_64 eng_;
};

}  // namespace detail

struct random_machine_config {
    std::uint32_t max_procs = 4;
    std::uint32_t max_states = 4;
    std::uint32_t max_messages = 6;
    double density = 0.4;
};

// A random composable machine: every message gets one sender and a nonempty
// receiver set, then each (state, alphabet action) pair gets a target with
// probability `density`.
inline machine random_machine(std::uint64_t seed, const random_machine_config& cfg = {}) {
    detail::split_rng rng(seed);
    std::uint32_t nprocs =
        cfg.max_procs <= 2 ? cfg.max_procs : std::uint32_t(rng.range(2, cfg.max_procs));
    std::uint32_t nmsgs = std::uint32_t(rng.range(1, std::int64_t(cfg.max_messages)));

    std::vector<process_decl> decls(nprocs);
    for (std::uint32_t p = 0; p < nprocs; ++p) {
        decls[p].name = "p" + std::to_string(p + 1);
        std::uint32_t nstates = std::uint32_t(rng.range(1, std::int64_t(cfg.max_states)));
        for (std::uint32_t s = 0; s < nstates; ++s)
            decls[p].states.push_back("s" + std::to_string(s));
        decls[p].initial = "s0";
    }

    for (std::uint32_t mi = 0; mi < nmsgs; ++mi) {
        std::string name = "m" + std::to_string(mi + 1);
        std::uint32_t sender = std::uint32_t(rng.below(nprocs));
        decls[sender].outputs.push_back(name);
        std::vector<std::uint32_t> order(nprocs);
        for (std::uint32_t i = 0; i < nprocs; ++i) order[i] = i;
        for (std::uint32_t i = nprocs; i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        std::uint32_t nrecv = std::uint32_t(rng.range(1, nprocs));
        for (std::uint32_t i = 0; i < nrecv; ++i) decls[order[i]].inputs.push_back(name);
    }

    for (auto& d : decls) {
        std::sort(d.inputs.begin(), d.inputs.end());
        std::sort(d.outputs.begin(), d.outputs.end());
        for (const auto& s : d.states) {
            for (const auto& msg : d.outputs)
                if (rng.chance(cfg.density))
                    d.transitions.push_back(
                        {s, true, msg, d.states[rng.below(d.states.size())]});
            for (const auto& msg : d.inputs)
                if (rng.chance(cfg.density))
                    d.transitions.push_back(
                        {s, false, msg, d.states[rng.below(d.states.size())]});
        }
    }
    return compose(decls);
}

namespace detail {

inline std::vector<msg_index> messages_to(const machine& m, proc_index src, proc_index dst) {
    std::vector<msg_index> out;
    for (msg_index msg : m.proc(src).outputs) {
        const auto& rs = m.receivers_of(msg);
        if (std::find(rs.begin(), rs.end(), dst) != rs.end()) out.push_back(msg);
    }
    return out;
}

}  // namespace detail

// A filter that tracks src's own state and permits exactly the sends src can
// make: it satisfies local filter respect by construction. `drop_emits` can
// randomly remove emit rules to produce filters that usually violate it.
inline filter_monitor simulation_filter_monitor(const machine& m, proc_index src, proc_index dst,
                                                detail::split_rng* drop_emits = nullptr) {
    const process& pr = m.proc(src);
    filter_monitor f;
    f.name = "f_" + pr.name + "_" + m.proc(dst).name;
    f.state_names = pr.state_names;
    f.initial = pr.initial;
    std::vector<msg_index> to_dst = detail::messages_to(m, src, dst);
    std::vector<std::pair<state_index, msg_index>> emit_keys;
    for (state_index s = 0; s < pr.state_names.size(); ++s) {
        for (const local_transition& t : pr.send_edges[s]) {
            f.transitions.push_back(
                {s, action_pattern::exact(send_action(t.msg)), std::nullopt, {}, t.target});
            if (std::find(to_dst.begin(), to_dst.end(), t.msg) != to_dst.end())
                emit_keys.emplace_back(t.target, t.msg);
        }
        for (const local_transition& t : pr.recv_edges[s])
            f.transitions.push_back(
                {s, action_pattern::exact(recv_action(src, t.msg)), std::nullopt, {}, t.target});
    }
    std::sort(emit_keys.begin(), emit_keys.end());
    emit_keys.erase(std::unique(emit_keys.begin(), emit_keys.end()), emit_keys.end());
    for (const auto& [state, msg] : emit_keys) {
        if (drop_emits && drop_emits->chance(0.25)) continue;
        f.emits.push_back({state, action_pattern::exact(send_action(msg)), std::nullopt});
    }
    f.finalize();
    return f;
}

// A deterministic filter monitor for the edge src -> dst, drawn from a few
// shapes: permissive, state simulation, lossy simulation, modular counter.
inline filter_monitor random_filter_monitor(std::uint64_t seed, const machine& m, proc_index src,
                                            proc_index dst) {
    detail::split_rng rng(seed);
    const process& pr = m.proc(src);

    switch (rng.below(4)) {
        case 0: {  // permissive: everything allowed
            filter_monitor f;
            f.name = "f_" + pr.name + "_" + m.proc(dst).name;
            f.state_names = {"q0"};
            f.initial = 0;
            f.emits.push_back({0, action_pattern::wildcard(), std::nullopt});
            f.finalize();
            return f;
        }
        case 1:
            return simulation_filter_monitor(m, src, dst);
        case 2:
            return simulation_filter_monitor(m, src, dst, &rng);
        default: {  // modular counter over one trigger action
            filter_monitor f;
            f.name = "f_" + pr.name + "_" + m.proc(dst).name;
            std::int64_t k = rng.range(2, 4);
            f.state_names = {"q0"};
            f.initial = 0;
            f.registers.push_back({"c", 0, k - 1, 0});
            std::vector<action> alphabet;
            for (msg_index msg : pr.inputs) alphabet.push_back(recv_action(src, msg));
            for (msg_index msg : pr.outputs) alphabet.push_back(send_action(msg));
            if (!alphabet.empty()) {
                action trigger = alphabet[rng.below(alphabet.size())];
                monitor_transition t;
                t.from = 0;
                t.pattern = action_pattern::exact(trigger);
                t.updates.push_back(
                    expr::assignment::parse("c := (c + 1) mod " + std::to_string(k)));
                t.to = 0;
                f.transitions.push_back(std::move(t));
            }
            for (msg_index msg : detail::messages_to(m, src, dst)) {
                emit_rule e;
                e.state = 0;
                e.pattern = action_pattern::exact(send_action(msg));
                if (rng.chance(0.5))
                    e.guard = expr::expression::parse("c = " + std::to_string(rng.below(k)));
                f.emits.push_back(std::move(e));
            }
            f.finalize();
            return f;
        }
    }
}

// ---------------------------------------------------------------------------
// Cross-validation sweeps. Each sweep returns how many cases ran and which
// seeds found a discrepancy; any failure indicates a bug in this library, not
// in the inputs.

struct sweep_result {
    std::uint32_t total{0};
    std::uint32_t failures{0};
    std::uint64_t states_explored{0};
    std::vector<std::string> notes;

    bool ok() const { return failures == 0; }
};

// Every machine complies with its own implicit policy.
inline sweep_result implicit_policy_sweep(std::uint32_t seeds, std::uint32_t depth,
                                const random_machine_config& cfg = {}, const limits& lim = {}) {
    sweep_result r;
    for (std::uint32_t seed = 1; seed <= seeds; ++seed) {
        machine m = random_machine(seed, cfg);
        verdict v = check_compliance(m, implicit_policy(m), depth, lim);
        r.total += 1;
        r.states_explored += v.states_explored;
        if (!v.passed) {
            r.failures += 1;
            r.notes.push_back("seed " + std::to_string(seed) +
                              ": compliance vs implicit policy failed");
        }
    }
    return r;
}

// A machine with filtered edges that all satisfy local filter respect must
// comply with the filtered policy. Pairs are generated per seed; filters
// failing the respect check are regenerated, with a simulation filter as the
// deterministic fallback, so every seed contributes one qualifying pair.
inline sweep_result respected_filter_sweep(std::uint32_t seeds, std::uint32_t depth,
                               const random_machine_config& cfg = {}, const limits& lim = {}) {
    sweep_result r;
    for (std::uint32_t seed = 1; seed <= seeds; ++seed) {
        machine m = random_machine(seed * 2654435761u, cfg);
        security_policy pol = implicit_policy(m);
        std::vector<std::pair<proc_index, proc_index>> candidates;
        for (const auto& [key, label] : pol.edges) {
            (void)label;
            if (key.first != key.second) candidates.push_back(key);
        }
        if (candidates.empty()) {
            // No cross-process flow to filter; compliance alone.
            verdict v = check_compliance(m, pol, depth, lim);
            r.total += 1;
            r.states_explored += v.states_explored;
            if (!v.passed) {
                r.failures += 1;
                r.notes.push_back("seed " + std::to_string(seed) + ": edgeless pair failed");
            }
            continue;
        }

        detail::split_rng rng(seed * 0x5851f42d4c957f2dull);
        std::size_t nfilter = 1 + rng.below(std::min<std::size_t>(2, candidates.size()));
        std::vector<std::pair<proc_index, proc_index>> picked;
        for (std::size_t i = 0; i < nfilter; ++i) {
            auto e = candidates[rng.below(candidates.size())];
            if (std::find(picked.begin(), picked.end(), e) == picked.end()) picked.push_back(e);
        }

        // Draw filters until every filtered edge passes the respect check;
        // the simulation filter passes by construction, so the last attempt
        // always qualifies and each seed contributes exactly one pair.
        bool qualified = false;
        for (std::uint32_t attempt = 0; attempt < 6 && !qualified; ++attempt) {
            security_policy trial = implicit_policy(m);
            for (std::size_t i = 0; i < picked.size(); ++i) {
                filter_monitor f =
                    attempt + 1 < 6
                        ? random_filter_monitor(seed * 1099511628211ull + attempt * 40503u + i, m,
                                                picked[i].first, picked[i].second)
                        : simulation_filter_monitor(m, picked[i].first, picked[i].second);
                trial.monitors.push_back(std::move(f));
                trial.add_filter(picked[i].first, picked[i].second,
                                 std::uint32_t(trial.monitors.size() - 1));
            }
            bool all_respect = true;
            for (const auto& e : picked) {
                verdict v = check_local_filter_respect(m, trial, e.first, e.second,
                                                       filter_check_mode::to_fixpoint(), lim);
                r.states_explored += v.states_explored;
                if (!v.passed) {
                    all_respect = false;
                    break;
                }
            }
            if (!all_respect) continue;
            qualified = true;
            verdict v = check_compliance(m, trial, depth, lim);
            r.total += 1;
            r.states_explored += v.states_explored;
            if (!v.passed) {
                r.failures += 1;
                r.notes.push_back("seed " + std::to_string(seed) +
                                  ": filters respected but compliance failed");
            }
        }
        if (!qualified)
            throw error("internal: simulation filter failed its own respect check at seed " +
                        std::to_string(seed));
    }
    return r;
}

// A random execution: walk from the initial state choosing uniformly among
// enabled actions.
inline execution random_execution(const machine& m, detail::split_rng& rng,
                                  std::uint32_t max_len) {
    execution out;
    global_state g = m.initial_state();
    std::uint32_t len = std::uint32_t(rng.below(max_len + 1));
    for (std::uint32_t i = 0; i < len; ++i) {
        std::vector<action> succ = enabled_actions(m, g);
        if (succ.empty()) break;
        action a = succ[rng.below(succ.size())];
        g = step_global(m, g, a);
        out.push_back(a);
    }
    return out;
}

namespace detail {

inline bool is_subsequence(const execution& sub, const execution& full) {
    std::size_t j = 0;
    for (const action& a : full)
        if (j < sub.size() && sub[j] == a) ++j;
    return j == sub.size();
}

}  // namespace detail

// Samples random (machine, policy, domain, execution) tuples and checks the
// declarative properties of the purge: it is a subsequence, it grows by at
// most the appended action per step, it keeps every action of the domain
// itself, it coincides with the edge-visibility projection when no filter is
// present, and the incremental tracker agrees with the direct recomputation.
inline sweep_result purge_property_sweep(std::uint32_t samples,
                                         const random_machine_config& cfg = {}) {
    sweep_result r;
    for (std::uint32_t sample = 1; sample <= samples; ++sample) {
        detail::split_rng rng(sample * 0x9e3779b97f4a7c15ull + 12345);
        machine m = random_machine(sample, cfg);
        security_policy pol = implicit_policy(m);
        bool filtered = false;
        if (sample % 2 == 1) {
            std::vector<std::pair<proc_index, proc_index>> candidates;
            for (const auto& [key, label] : pol.edges) {
                (void)label;
                if (key.first != key.second) candidates.push_back(key);
            }
            if (!candidates.empty()) {
                auto e = candidates[rng.below(candidates.size())];
                pol.monitors.push_back(
                    random_filter_monitor(sample * 31337u, m, e.first, e.second));
                pol.add_filter(e.first, e.second, 0);
                filtered = true;
            }
        }
        execution alpha = random_execution(m, rng, 10);
        proc_index domain = proc_index(rng.below(m.proc_count()));
        r.total += 1;

        auto report = [&](const char* what) {
            r.failures += 1;
            r.notes.push_back("sample " + std::to_string(sample) + ": " + what);
        };

        execution direct = naive_purge(m, pol, domain, alpha);
        execution tracked = purge(m, pol, domain, alpha);
        if (tracked != direct) {
            report("incremental tracker disagrees with direct recomputation");
            continue;
        }
        if (!detail::is_subsequence(direct, alpha)) {
            report("purge is not a subsequence");
            continue;
        }

        bool step_ok = true;
        execution prev;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            execution cur =
                naive_purge(m, pol, domain, std::span<const action>(alpha.data(), i + 1));
            execution extended = prev;
            extended.push_back(alpha[i]);
            if (cur != prev && cur != extended) {
                step_ok = false;
                break;
            }
            prev = std::move(cur);
        }
        if (!step_ok) {
            report("purge of a one-step extension is neither kept nor dropped");
            continue;
        }

        auto own = [&](const execution& e) {
            execution out;
            for (const action& a : e)
                if (m.dom(a) == domain) out.push_back(a);
            return out;
        };
        if (own(direct) != own(alpha)) {
            report("an action of the domain itself was dropped");
            continue;
        }

        if (!filtered) {
            execution visible;
            for (const action& a : alpha)
                if (pol.has_edge(m.dom(a), domain)) visible.push_back(a);
            if (direct != visible) {
                report("filter-free purge differs from the visibility projection");
                continue;
            }
        }
    }
    return r;
}

}  // namespace dmsec
