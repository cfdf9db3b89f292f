#pragma once

// Small arithmetic expression language for model config files.
//
// Grammar (whitespace ignored):
//
//   expr    := term   (('+' | '-') term)*
//   term    := unary  (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?            right-associative: 2^3^2 = 2^9
//   primary := number | name | name '(' args ')' | '(' expr ')'
//   args    := expr (',' expr)*
//   number  := digits ['.' digits] [('e'|'E') ['+'|'-'] digits]
//
// Names:
//   x1 .. xd     state coordinates
//   k            regime, 1-based
//   xi           first control coordinate; xi1 .. xim for vector controls
//   pi
// Functions: exp log sqrt abs sin cos tanh (one argument), min max (two or more).
//
// Unary minus binds looser than '^', so -x1^2 = -(x1^2).

#include "rsc/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace rsc {

class ExpressionError : public InvalidArgument {
public:
    ExpressionError(const std::string& source, std::size_t pos, const std::string& what)
        : InvalidArgument("expression '" + source + "', column " + std::to_string(pos + 1) + ": " + what),
          column(pos + 1) {}
    std::size_t column;
};

struct ExprContext {
    const Point* x = nullptr;
    int regime = 0;  ///< 0-based; exposed to expressions as k = regime + 1
    const Point* control = nullptr;
};

class Expression {
public:
    Expression() = default;

    /// Parses `source`; `dim` bounds the admissible x-indices, `control_dim` the xi-indices.
    static Expression parse(const std::string& source, int dim, int control_dim = 1) {
        Parser p{source, 0, dim, control_dim};
        Expression e;
        e.source_ = source;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != source.size()) p.fail("unexpected '" + std::string(1, source[p.pos]) + "'");
        return e;
    }

    double operator()(const ExprContext& ctx) const { return eval(*root_, ctx); }

    double operator()(const Point& x, int regime, const Point& control) const {
        return eval(*root_, ExprContext{&x, regime, &control});
    }

    const std::string& source() const { return source_; }
    bool uses_control() const { return root_ && mentions(*root_, Op::Control); }
    bool uses_regime() const { return root_ && mentions(*root_, Op::Regime); }

private:
    enum class Op { Number, State, Regime, Control, Neg, Add, Sub, Mul, Div, Pow, Call };
    enum class Fn { Exp, Log, Sqrt, Abs, Sin, Cos, Tanh, Min, Max };

    struct Node {
        Op op = Op::Number;
        double value = 0.0;
        int index = 0;
        Fn fn = Fn::Exp;
        std::vector<std::shared_ptr<const Node>> args;
    };
    using NodePtr = std::shared_ptr<const Node>;

    struct Parser {
        const std::string& s;
        std::size_t pos;
        int dim;
        int control_dim;

        [[noreturn]] void fail(const std::string& what) const { throw ExpressionError(s, pos, what); }

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        static NodePtr binary(Op op, NodePtr a, NodePtr b) {
            auto n = std::make_shared<Node>();
            n->op = op;
            n->args = {std::move(a), std::move(b)};
            return n;
        }

        NodePtr expr() {
            NodePtr lhs = term();
            for (;;) {
                if (accept('+'))
                    lhs = binary(Op::Add, lhs, term());
                else if (accept('-'))
                    lhs = binary(Op::Sub, lhs, term());
                else
                    return lhs;
            }
        }
        NodePtr term() {
            NodePtr lhs = unary();
            for (;;) {
                if (accept('*'))
                    lhs = binary(Op::Mul, lhs, unary());
                else if (accept('/'))
                    lhs = binary(Op::Div, lhs, unary());
                else
                    return lhs;
            }
        }
        NodePtr unary() {
            if (accept('-')) {
                auto n = std::make_shared<Node>();
                n->op = Op::Neg;
                n->args = {unary()};
                return n;
            }
            if (accept('+')) return unary();
            return power();
        }
        NodePtr power() {
            NodePtr base = primary();
            if (accept('^')) return binary(Op::Pow, base, unary());
            return base;
        }
        NodePtr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of expression");
            const char c = s[pos];
            if (c == '(') {
                ++pos;
                NodePtr inner = expr();
                if (!accept(')')) fail("expected ')'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
            fail("unexpected '" + std::string(1, c) + "'");
        }
        NodePtr number() {
            const std::size_t start = pos;
            auto digits = [&] {
                const std::size_t d = pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                return pos > d;
            };
            bool any = digits();
            if (pos < s.size() && s[pos] == '.') {
                ++pos;
                any = digits() || any;
            }
            if (!any) fail("malformed number");
            if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
                ++pos;
                if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
                if (!digits()) fail("malformed exponent");
            }
            auto n = std::make_shared<Node>();
            n->value = std::stod(s.substr(start, pos - start));
            return n;
        }
        NodePtr name() {
            const std::size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
            const std::string id = s.substr(start, pos - start);
            skip();
            if (pos < s.size() && s[pos] == '(') return call(id, start);

            auto n = std::make_shared<Node>();
            auto indexed = [&](const std::string& prefix, int limit, Op op) {
                const std::string tail = id.substr(prefix.size());
                int idx = 0;
                for (char ch : tail) {
                    if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
                    idx = idx * 10 + (ch - '0');
                    if (idx > 1000) break;
                }
                if (idx < 1 || idx > limit) {
                    pos = start;
                    fail("'" + id + "' is out of range (1.." + std::to_string(limit) + ")");
                }
                n->op = op;
                n->index = idx - 1;
                return true;
            };
            if (id == "k") {
                n->op = Op::Regime;
            } else if (id == "xi") {
                n->op = Op::Control;
                n->index = 0;
            } else if (id == "pi") {
                n->value = 3.14159265358979323846;
            } else if (id.rfind("xi", 0) == 0 && id.size() > 2 && indexed("xi", control_dim, Op::Control)) {
            } else if (id[0] == 'x' && id.size() > 1 && indexed("x", dim, Op::State)) {
            } else {
                pos = start;
                fail("unknown name '" + id + "'");
            }
            return n;
        }
        NodePtr call(const std::string& id, std::size_t start) {
            static const std::pair<const char*, Fn> table[] = {
                {"exp", Fn::Exp},   {"log", Fn::Log},   {"sqrt", Fn::Sqrt}, {"abs", Fn::Abs}, {"sin", Fn::Sin},
                {"cos", Fn::Cos},   {"tanh", Fn::Tanh}, {"min", Fn::Min},   {"max", Fn::Max},
            };
            auto n = std::make_shared<Node>();
            n->op = Op::Call;
            bool found = false;
            for (const auto& [nm, fn] : table)
                if (id == nm) {
                    n->fn = fn;
                    found = true;
                }
            if (!found) {
                pos = start;
                fail("unknown function '" + id + "'");
            }
            accept('(');
            n->args.push_back(expr());
            while (accept(',')) n->args.push_back(expr());
            if (!accept(')')) fail("expected ')' or ','");
            const bool variadic = n->fn == Fn::Min || n->fn == Fn::Max;
            if (variadic ? n->args.size() < 2 : n->args.size() != 1) {
                pos = start;
                fail("wrong number of arguments to '" + id + "'");
            }
            return n;
        }
    };

    static bool mentions(const Node& n, Op op) {
        if (n.op == op) return true;
        for (const auto& a : n.args)
            if (mentions(*a, op)) return true;
        return false;
    }

    static double eval(const Node& n, const ExprContext& c) {
        switch (n.op) {
            case Op::Number: return n.value;
            case Op::State: return (*c.x)[n.index];
            case Op::Regime: return static_cast<double>(c.regime + 1);
            case Op::Control: return c.control ? (*c.control)[n.index] : 0.0;
            case Op::Neg: return -eval(*n.args[0], c);
            case Op::Add: return eval(*n.args[0], c) + eval(*n.args[1], c);
            case Op::Sub: return eval(*n.args[0], c) - eval(*n.args[1], c);
            case Op::Mul: return eval(*n.args[0], c) * eval(*n.args[1], c);
            case Op::Div: return eval(*n.args[0], c) / eval(*n.args[1], c);
            case Op::Pow: return std::pow(eval(*n.args[0], c), eval(*n.args[1], c));
            case Op::Call: break;
        }
        const double a = eval(*n.args[0], c);
        switch (n.fn) {
            case Fn::Exp: return std::exp(a);
            case Fn::Log: return std::log(a);
            case Fn::Sqrt: return std::sqrt(a);
            case Fn::Abs: return std::abs(a);
            case Fn::Sin: return std::sin(a);
            case Fn::Cos: return std::cos(a);
            case Fn::Tanh: return std::tanh(a);
            case Fn::Min:
            case Fn::Max: {
                double r = a;
                for (std::size_t i = 1; i < n.args.size(); ++i) {
                    const double v = eval(*n.args[i], c);
                    r = n.fn == Fn::Min ? std::min(r, v) : std::max(r, v);
                }
                return r;
            }
        }
        return 0.0;
    }

    std::string source_;
    NodePtr root_;
};

}  // namespace rsc
