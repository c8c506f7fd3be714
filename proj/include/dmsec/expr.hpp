// Guard, update, and predicate expressions over bounded integer registers
// and named state fields.
//
// Grammar (loosest to tightest binding):
//   expr   := or ("->" expr)?                  implication, right associative
//   or     := and ("||" and)*
//   and    := not ("&&" not)*
//   not    := "!" not | cmp
//   cmp    := sum (("="|"=="|"!="|"<"|"<="|">"|">=") sum)?
//   sum    := term (("+"|"-") term)*
//   term   := unary ("mod" unary)*             mathematical mod, result in [0,|b|)
//   unary  := "-" unary | atom
//   atom   := integer | "true" | "false" | identifier | "(" expr ")"
//
// Identifiers resolve through an environment. An identifier the environment
// does not know evaluates to its own name as a string constant, so symbolic
// comparisons like `location = Price_Sent` work against string-valued fields.
#pragma once

#include <cctype>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "core.hpp"

namespace dmsec::expr {

class parse_error : public error {
public:
    parse_error(const std::string& what, std::size_t pos)
        : error(what + " (at offset " + std::to_string(pos) + ")"), pos_(pos) {}
    std::size_t position() const { return pos_; }

private:
    std::size_t pos_;
};

class eval_error : public error {
public:
    explicit eval_error(const std::string& what) : error(what) {}
};

using value = std::variant<std::int64_t, bool, std::string>;

struct environment {
    virtual ~environment() = default;
    virtual std::optional<value> lookup(std::string_view name) const = 0;
};

enum class op : std::uint8_t {
    lit_int, lit_bool, var,
    neg, lnot,
    add, sub, mod,
    eq, ne, lt, le, gt, ge,
    land, lor, implies,
};

struct node {
    op o;
    std::int64_t num{0};     // lit_int, lit_bool (0/1)
    std::string name;        // var
    int slot{-1};            // var: register slot once bound, -1 otherwise
    std::unique_ptr<node> lhs, rhs;
};

namespace detail {

class parser {
public:
    explicit parser(std::string_view src) : src_(src) {}

    std::unique_ptr<node> run() {
        auto e = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail("trailing input after expression");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw parse_error(what, pos_); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(std::string_view tok) {
        skip_ws();
        if (src_.substr(pos_).starts_with(tok)) {
            // Keywords must not run into a longer identifier.
            if (std::isalpha(static_cast<unsigned char>(tok.front()))) {
                std::size_t end = pos_ + tok.size();
                if (end < src_.size() &&
                    (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
                    return false;
            }
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    static std::unique_ptr<node> make(op o, std::unique_ptr<node> l = nullptr,
                                      std::unique_ptr<node> r = nullptr) {
        auto n = std::make_unique<node>();
        n->o = o;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    std::unique_ptr<node> parse_expr() {
        auto l = parse_or();
        if (eat("->")) return make(op::implies, std::move(l), parse_expr());
        return l;
    }

    std::unique_ptr<node> parse_or() {
        auto l = parse_and();
        while (eat("||")) l = make(op::lor, std::move(l), parse_and());
        return l;
    }

    std::unique_ptr<node> parse_and() {
        auto l = parse_not();
        while (eat("&&")) l = make(op::land, std::move(l), parse_not());
        return l;
    }

    std::unique_ptr<node> parse_not() {
        skip_ws();
        // "!" but not "!=".
        if (pos_ < src_.size() && src_[pos_] == '!' &&
            (pos_ + 1 >= src_.size() || src_[pos_ + 1] != '=')) {
            ++pos_;
            return make(op::lnot, parse_not());
        }
        return parse_cmp();
    }

    std::unique_ptr<node> parse_cmp() {
        auto l = parse_sum();
        skip_ws();
        op o;
        if (eat("==") || eat("=")) o = op::eq;
        else if (eat("!=")) o = op::ne;
        else if (eat("<=")) o = op::le;
        else if (eat(">=")) o = op::ge;
        else if (eat("<")) o = op::lt;
        else if (eat(">")) o = op::gt;
        else return l;
        return make(o, std::move(l), parse_sum());
    }

    std::unique_ptr<node> parse_sum() {
        auto l = parse_term();
        for (;;) {
            skip_ws();
            // "-" but not "->".
            if (pos_ < src_.size() && src_[pos_] == '-' &&
                (pos_ + 1 >= src_.size() || src_[pos_ + 1] != '>')) {
                ++pos_;
                l = make(op::sub, std::move(l), parse_term());
            } else if (eat("+")) {
                l = make(op::add, std::move(l), parse_term());
            } else {
                return l;
            }
        }
    }

    std::unique_ptr<node> parse_term() {
        auto l = parse_unary();
        while (eat("mod")) l = make(op::mod, std::move(l), parse_unary());
        return l;
    }

    std::unique_ptr<node> parse_unary() {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '-' &&
            (pos_ + 1 >= src_.size() || src_[pos_ + 1] != '>')) {
            ++pos_;
            return make(op::neg, parse_unary());
        }
        return parse_atom();
    }

    std::unique_ptr<node> parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected an operand");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = parse_expr();
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != ')') fail("expected ')'");
            ++pos_;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            auto n = make(op::lit_int);
            n->num = std::stoll(std::string(src_.substr(start, pos_ - start)));
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            std::string word(src_.substr(start, pos_ - start));
            if (word == "true" || word == "false") {
                auto n = make(op::lit_bool);
                n->num = word == "true";
                return n;
            }
            if (word == "mod") fail("'mod' needs a left operand");
            auto n = make(op::var);
            n->name = std::move(word);
            return n;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view src_;
    std::size_t pos_{0};
};

inline std::unique_ptr<node> clone(const node* n) {
    if (!n) return nullptr;
    auto c = std::make_unique<node>();
    c->o = n->o;
    c->num = n->num;
    c->name = n->name;
    c->slot = n->slot;
    c->lhs = clone(n->lhs.get());
    c->rhs = clone(n->rhs.get());
    return c;
}

}  // namespace detail

// A parsed expression. Keeps its source text for serialization.
class expression {
public:
    expression() = default;
    expression(const expression& other)
        : root_(detail::clone(other.root_.get())), source_(other.source_) {}
    expression& operator=(const expression& other) {
        if (this != &other) {
            root_ = detail::clone(other.root_.get());
            source_ = other.source_;
        }
        return *this;
    }
    expression(expression&&) = default;
    expression& operator=(expression&&) = default;

    static expression parse(std::string_view src) {
        expression e;
        e.root_ = detail::parser(src).run();
        std::string_view trimmed = src;
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
            trimmed.remove_prefix(1);
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
            trimmed.remove_suffix(1);
        e.source_ = std::string(trimmed);
        return e;
    }

    bool empty() const { return !root_; }
    const std::string& source() const { return source_; }
    const node* root() const { return root_.get(); }

    // Resolves every identifier to a slot in `names`; unknown names throw.
    void bind(std::span<const std::string> names) { bind_node(root_.get(), names); }

private:
    static void bind_node(node* n, std::span<const std::string> names) {
        if (!n) return;
        if (n->o == op::var) {
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == n->name) {
                    n->slot = int(i);
                    return;
                }
            throw parse_error("unknown register '" + n->name + "'", 0);
        }
        bind_node(n->lhs.get(), names);
        bind_node(n->rhs.get(), names);
    }

    std::unique_ptr<node> root_;
    std::string source_;
};

namespace detail {

inline std::int64_t as_int(const value& v, const char* ctx) {
    if (const auto* p = std::get_if<std::int64_t>(&v)) return *p;
    throw eval_error(std::string("expected an integer operand in ") + ctx);
}

inline bool as_bool(const value& v, const char* ctx) {
    if (const auto* p = std::get_if<bool>(&v)) return *p;
    throw eval_error(std::string("expected a boolean operand in ") + ctx);
}

inline bool values_equal(const value& a, const value& b) {
    if (a.index() != b.index())
        throw eval_error("comparison between values of different types");
    return a == b;
}

inline value eval_node(const node* n, const environment* env,
                       std::span<const std::int64_t> slots) {
    switch (n->o) {
        case op::lit_int: return n->num;
        case op::lit_bool: return n->num != 0;
        case op::var: {
            if (n->slot >= 0) return slots[std::size_t(n->slot)];
            if (env)
                if (auto v = env->lookup(n->name)) return *v;
            return n->name;  // symbolic constant
        }
        case op::neg: return -as_int(eval_node(n->lhs.get(), env, slots), "unary minus");
        case op::lnot: return !as_bool(eval_node(n->lhs.get(), env, slots), "negation");
        case op::add:
            return as_int(eval_node(n->lhs.get(), env, slots), "+") +
                   as_int(eval_node(n->rhs.get(), env, slots), "+");
        case op::sub:
            return as_int(eval_node(n->lhs.get(), env, slots), "-") -
                   as_int(eval_node(n->rhs.get(), env, slots), "-");
        case op::mod: {
            std::int64_t a = as_int(eval_node(n->lhs.get(), env, slots), "mod");
            std::int64_t b = as_int(eval_node(n->rhs.get(), env, slots), "mod");
            if (b == 0) throw eval_error("mod by zero");
            std::int64_t ab = b < 0 ? -b : b;
            std::int64_t m = a % ab;
            if (m < 0) m += ab;
            return m;
        }
        case op::eq:
            return values_equal(eval_node(n->lhs.get(), env, slots),
                                eval_node(n->rhs.get(), env, slots));
        case op::ne:
            return !values_equal(eval_node(n->lhs.get(), env, slots),
                                 eval_node(n->rhs.get(), env, slots));
        case op::lt:
        case op::le:
        case op::gt:
        case op::ge: {
            std::int64_t a = as_int(eval_node(n->lhs.get(), env, slots), "comparison");
            std::int64_t b = as_int(eval_node(n->rhs.get(), env, slots), "comparison");
            switch (n->o) {
                case op::lt: return a < b;
                case op::le: return a <= b;
                case op::gt: return a > b;
                default: return a >= b;
            }
        }
        case op::land:
            return as_bool(eval_node(n->lhs.get(), env, slots), "&&") &&
                   as_bool(eval_node(n->rhs.get(), env, slots), "&&");
        case op::lor:
            return as_bool(eval_node(n->lhs.get(), env, slots), "||") ||
                   as_bool(eval_node(n->rhs.get(), env, slots), "||");
        case op::implies:
            return !as_bool(eval_node(n->lhs.get(), env, slots), "->") ||
                   as_bool(eval_node(n->rhs.get(), env, slots), "->");
    }
    throw eval_error("corrupt expression node");
}

}  // namespace detail

inline value eval(const expression& e, const environment& env) {
    if (e.empty()) throw eval_error("evaluating an empty expression");
    return detail::eval_node(e.root(), &env, {});
}

inline bool eval_bool(const expression& e, const environment& env) {
    return detail::as_bool(eval(e, env), "predicate");
}

// Fast path for expressions bound to register slots.
inline value eval_slots(const expression& e, std::span<const std::int64_t> slots) {
    if (e.empty()) throw eval_error("evaluating an empty expression");
    return detail::eval_node(e.root(), nullptr, slots);
}

inline bool eval_bool_slots(const expression& e, std::span<const std::int64_t> slots) {
    return detail::as_bool(eval_slots(e, slots), "guard");
}

inline std::int64_t eval_int_slots(const expression& e, std::span<const std::int64_t> slots) {
    return detail::as_int(eval_slots(e, slots), "update");
}

// One register update "name := expr".
struct assignment {
    std::string target;
    int slot{-1};
    expression rhs;

    static assignment parse(std::string_view src) {
        auto pos = src.find(":=");
        if (pos == std::string_view::npos)
            throw parse_error("expected 'name := expression'", 0);
        assignment a;
        std::string_view name = src.substr(0, pos);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front())))
            name.remove_prefix(1);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
            name.remove_suffix(1);
        if (name.empty()) throw parse_error("empty update target", 0);
        a.target = std::string(name);
        a.rhs = expression::parse(src.substr(pos + 2));
        return a;
    }

    std::string source() const { return target + " := " + rhs.source(); }
};

}  // namespace dmsec::expr
