#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cara/errors.hpp"

namespace cara {

/// Small arithmetic expression language for user-supplied coefficient
/// functions: numbers, named variables, + - * / ^ (right associative), unary
/// minus, parentheses, and sqrt, exp, log, pow, abs, min, max.
class Expression {
public:
    static Expression parse(std::string_view source, std::vector<std::string> variables) {
        Parser p{source, variables, 0};
        auto root = p.parse_sum();
        p.skip_ws();
        if (p.pos != source.size()) p.fail("unexpected trailing input");
        Expression e;
        e.source_ = std::string(source);
        e.variables_ = std::move(variables);
        e.root_ = std::move(root);
        return e;
    }

    double operator()(std::span<const double> values) const {
        if (values.size() != variables_.size()) throw ParamError("expression: wrong variable count");
        return root_->eval(values);
    }
    double operator()(double a, double b) const {
        const double v[2] = {a, b};
        return (*this)(std::span<const double>(v, 2));
    }
    double operator()(double a) const { return (*this)(std::span<const double>(&a, 1)); }

    const std::string& source() const { return source_; }
    const std::vector<std::string>& variables() const { return variables_; }

private:
    struct Node {
        virtual ~Node() = default;
        virtual double eval(std::span<const double> vars) const = 0;
    };
    using NodePtr = std::shared_ptr<const Node>;

    struct Constant final : Node {
        double value;
        explicit Constant(double v) : value(v) {}
        double eval(std::span<const double>) const override { return value; }
    };
    struct Variable final : Node {
        std::size_t index;
        explicit Variable(std::size_t i) : index(i) {}
        double eval(std::span<const double> v) const override { return v[index]; }
    };
    struct Negate final : Node {
        NodePtr arg;
        explicit Negate(NodePtr a) : arg(std::move(a)) {}
        double eval(std::span<const double> v) const override { return -arg->eval(v); }
    };
    struct Binary final : Node {
        char op;
        NodePtr lhs, rhs;
        Binary(char o, NodePtr l, NodePtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
        double eval(std::span<const double> v) const override {
            const double a = lhs->eval(v);
            const double b = rhs->eval(v);
            switch (op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                default: return std::pow(a, b);
            }
        }
    };
    struct Call final : Node {
        std::string name;
        std::vector<NodePtr> args;
        double eval(std::span<const double> v) const override {
            const double a = args[0]->eval(v);
            if (name == "sqrt") return std::sqrt(a);
            if (name == "exp") return std::exp(a);
            if (name == "log") return std::log(a);
            if (name == "abs") return std::abs(a);
            const double b = args[1]->eval(v);
            if (name == "pow") return std::pow(a, b);
            if (name == "min") return std::min(a, b);
            return std::max(a, b);
        }
    };

    struct Parser {
        std::string_view src;
        const std::vector<std::string>& vars;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& what) const {
            throw ConfigError("expression '" + std::string(src) + "': " + what + " at offset " +
                              std::to_string(pos));
        }
        void skip_ws() {
            while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_ws();
            if (pos < src.size() && src[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        NodePtr parse_sum() {
            auto lhs = parse_product();
            for (;;) {
                if (accept('+')) lhs = std::make_shared<Binary>('+', lhs, parse_product());
                else if (accept('-')) lhs = std::make_shared<Binary>('-', lhs, parse_product());
                else return lhs;
            }
        }
        NodePtr parse_product() {
            auto lhs = parse_unary();
            for (;;) {
                if (accept('*')) lhs = std::make_shared<Binary>('*', lhs, parse_unary());
                else if (accept('/')) lhs = std::make_shared<Binary>('/', lhs, parse_unary());
                else return lhs;
            }
        }
        NodePtr parse_unary() {
            if (accept('-')) return std::make_shared<Negate>(parse_unary());
            if (accept('+')) return parse_unary();
            return parse_power();
        }
        NodePtr parse_power() {
            auto base = parse_atom();
            // -x^2 parses as -(x^2); 2^-1 is allowed.
            if (accept('^')) return std::make_shared<Binary>('^', base, parse_unary());
            return base;
        }
        NodePtr parse_atom() {
            skip_ws();
            if (pos >= src.size()) fail("unexpected end of input");
            const char c = src[pos];
            if (c == '(') {
                ++pos;
                auto inner = parse_sum();
                if (!accept(')')) fail("expected ')'");
                return inner;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
            fail(std::string("unexpected character '") + c + "'");
        }
        NodePtr parse_number() {
            const std::size_t start = pos;
            while (pos < src.size() && (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.')) ++pos;
            if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
                ++pos;
                if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) ++pos;
                while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
            }
            const std::string text(src.substr(start, pos - start));
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(text, &used);
            } catch (const std::exception&) {
                fail("malformed number '" + text + "'");
            }
            if (used != text.size()) fail("malformed number '" + text + "'");
            return std::make_shared<Constant>(value);
        }
        NodePtr parse_name() {
            const std::size_t start = pos;
            while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) ++pos;
            const std::string name(src.substr(start, pos - start));
            if (accept('(')) {
                std::size_t arity = 0;
                if (name == "sqrt" || name == "exp" || name == "log" || name == "abs") arity = 1;
                else if (name == "pow" || name == "min" || name == "max") arity = 2;
                else fail("unknown function '" + name + "'");
                auto call = std::make_shared<Call>();
                call->name = name;
                call->args.push_back(parse_sum());
                while (accept(',')) call->args.push_back(parse_sum());
                if (!accept(')')) fail("expected ')' after arguments of " + name);
                if (call->args.size() != arity) fail("wrong argument count for " + name);
                return call;
            }
            for (std::size_t i = 0; i < vars.size(); ++i)
                if (vars[i] == name) return std::make_shared<Variable>(i);
            if (name == "pi") return std::make_shared<Constant>(3.14159265358979323846);
            fail("unknown variable '" + name + "'");
        }
    };

    std::string source_;
    std::vector<std::string> variables_;
    NodePtr root_;
};

}  // namespace cara
