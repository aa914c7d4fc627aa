#include "symboost/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "symboost/prob.hpp"

namespace symboost {

namespace {

constexpr double kMagnitudeCap = 1e12;  // per-node saturation, keeps NaN/Inf out
constexpr double kOutputClip = 3.0;     // logit-delta safety cap
constexpr double kDivEps = 1e-9;
constexpr int kMaxParseDepth = 64;

double saturate(double v) {
    if (std::isnan(v)) return 0.0;  // unreachable with protected operators
    return std::clamp(v, -kMagnitudeCap, kMagnitudeCap);
}

struct FuncInfo {
    const char* name;
    FuncKind kind;
    int arity;
};

constexpr FuncInfo kFuncs[] = {
    {"exp", FuncKind::Exp, 1},     {"log1p", FuncKind::Log1p, 1},
    {"tanh", FuncKind::Tanh, 1},   {"sigmoid", FuncKind::Sigmoid, 1},
    {"abs", FuncKind::Abs, 1},     {"sqrt", FuncKind::Sqrt, 1},
    {"min", FuncKind::Min, 2},     {"max", FuncKind::Max, 2},
    {"gauss", FuncKind::Gauss, 3}, {"clip", FuncKind::Clip, 3},
};

const FuncInfo* find_func(const std::string& name) {
    for (const auto& f : kFuncs)
        if (name == f.name) return &f;
    return nullptr;
}

const char* cmp_text(Cmp c) {
    switch (c) {
        case Cmp::Lt: return "<";
        case Cmp::Le: return "<=";
        case Cmp::Gt: return ">";
        case Cmp::Ge: return ">=";
    }
    return "?";
}

const char* func_text(FuncKind f) {
    for (const auto& info : kFuncs)
        if (info.kind == f) return info.name;
    return "?";
}

// ---------------------------------------------------------------------------
// lexer

enum class Tok {
    End, Ident, Number, Feature, Plus, Minus, Star, Slash, LParen, RParen,
    Comma, Lt, Le, Gt, Ge, ParamOpen, RBrace, Assign,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double number = 0.0;
    int line = 1;
    int column = 1;
};

struct Lexer {
    const std::string& src;
    std::size_t pos = 0;
    int line = 1;
    int column = 1;

    explicit Lexer(const std::string& s) : src(s) {}

    [[noreturn]] void fail(const std::string& kind, const std::string& msg) const {
        throw ParseError(kind, msg + " at line " + std::to_string(line) + ", column " +
                                   std::to_string(column),
                         line, column);
    }

    char peek() const { return pos < src.size() ? src[pos] : '\0'; }
    char peek2() const { return pos + 1 < src.size() ? src[pos + 1] : '\0'; }

    char advance() {
        char c = src[pos++];
        if (c == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
        return c;
    }

    Token next() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(peek())))
            advance();
        Token t;
        t.line = line;
        t.column = column;
        if (pos >= src.size()) return t;

        char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && std::isdigit(static_cast<unsigned char>(peek2())))) {
            std::size_t start = pos;
            while (pos < src.size() &&
                   (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.'))
                advance();
            if (peek() == 'e' || peek() == 'E') {
                advance();
                if (peek() == '+' || peek() == '-') advance();
                if (!std::isdigit(static_cast<unsigned char>(peek())))
                    fail("lexical", "malformed exponent");
                while (pos < src.size() && std::isdigit(static_cast<unsigned char>(peek())))
                    advance();
            }
            t.kind = Tok::Number;
            t.text = src.substr(start, pos - start);
            char* end = nullptr;
            t.number = std::strtod(t.text.c_str(), &end);
            if (end != t.text.c_str() + t.text.size() || !std::isfinite(t.number))
                fail("lexical", "malformed number '" + t.text + "'");
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos;
            while (pos < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
                advance();
            t.text = src.substr(start, pos - start);
            if (t.text == "p" && peek() == '{') {
                advance();
                t.kind = Tok::ParamOpen;
                return t;
            }
            t.kind = Tok::Ident;
            return t;
        }
        switch (c) {
            case '`': {
                advance();
                std::size_t start = pos;
                while (pos < src.size() && peek() != '`') advance();
                if (pos >= src.size()) fail("lexical", "unterminated feature name");
                t.text = src.substr(start, pos - start);
                advance();  // closing backquote
                t.kind = Tok::Feature;
                return t;
            }
            case '+': advance(); t.kind = Tok::Plus; return t;
            case '-': advance(); t.kind = Tok::Minus; return t;
            case '*': advance(); t.kind = Tok::Star; return t;
            case '/': advance(); t.kind = Tok::Slash; return t;
            case '(': advance(); t.kind = Tok::LParen; return t;
            case ')': advance(); t.kind = Tok::RParen; return t;
            case ',': advance(); t.kind = Tok::Comma; return t;
            case '}': advance(); t.kind = Tok::RBrace; return t;
            case '=': advance(); t.kind = Tok::Assign; return t;
            case '<':
                advance();
                if (peek() == '=') {
                    advance();
                    t.kind = Tok::Le;
                } else {
                    t.kind = Tok::Lt;
                }
                return t;
            case '>':
                advance();
                if (peek() == '=') {
                    advance();
                    t.kind = Tok::Ge;
                } else {
                    t.kind = Tok::Gt;
                }
                return t;
            default:
                fail("lexical", std::string("unexpected character '") + c + "'");
        }
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// parser

struct ExprParser {
    Lexer lex;
    Token cur;
    ExpertExpr out;
    int depth = 0;

    ExprParser(const std::string& text, const std::vector<std::string>& schema)
        : lex(text) {
        out.schema_ = schema;
        cur = lex.next();
    }

    [[noreturn]] void fail(const std::string& kind, const std::string& msg) const {
        throw ParseError(kind, msg + " at line " + std::to_string(cur.line) + ", column " +
                                   std::to_string(cur.column),
                         cur.line, cur.column);
    }

    void bump() { cur = lex.next(); }

    void expect_ident(const char* word) {
        if (cur.kind != Tok::Ident || cur.text != word)
            fail("syntax", std::string("expected '") + word + "'");
        bump();
    }

    int feature_id(const std::string& name) {
        for (std::size_t i = 0; i < out.schema_.size(); ++i)
            if (out.schema_[i] == name) return static_cast<int>(i);
        fail("unknown-feature", "unknown feature '" + name + "'");
    }

    int add_node(ExprNode n) {
        out.nodes_.push_back(n);
        return static_cast<int>(out.nodes_.size() - 1);
    }

    double signed_number() {
        bool neg = false;
        if (cur.kind == Tok::Minus) {
            neg = true;
            bump();
        }
        if (cur.kind != Tok::Number) fail("syntax", "expected a number");
        double v = cur.number;
        bump();
        return neg ? -v : v;
    }

    // "p{" already consumed by the lexer token
    int parse_param(ParamSlot::Kind kind) {
        if (cur.kind != Tok::Ident) fail("syntax", "expected parameter name");
        std::string name = cur.text;
        for (const auto& p : out.params_)
            if (p.name == name)
                fail("duplicate-parameter", "duplicate parameter name '" + name + "'");
        bump();
        if (cur.kind != Tok::Assign) fail("syntax", "expected '=' in parameter");
        bump();
        double value = signed_number();
        bool frozen = false;
        if (cur.kind == Tok::Comma) {
            bump();
            if (cur.kind != Tok::Ident || cur.text != "frozen")
                fail("syntax", "expected 'frozen' after ',' in parameter");
            frozen = true;
            bump();
        }
        if (cur.kind != Tok::RBrace) fail("syntax", "expected '}' closing parameter");
        bump();
        out.params_.push_back({name, value, frozen, kind});
        return static_cast<int>(out.params_.size() - 1);
    }

    GuardClause parse_clause() {
        if (cur.kind != Tok::Feature) fail("syntax", "expected a backquoted feature");
        GuardClause c;
        c.feature_name = cur.text;
        c.feature = feature_id(cur.text);
        bump();
        switch (cur.kind) {
            case Tok::Lt: c.cmp = Cmp::Lt; break;
            case Tok::Le: c.cmp = Cmp::Le; break;
            case Tok::Gt: c.cmp = Cmp::Gt; break;
            case Tok::Ge: c.cmp = Cmp::Ge; break;
            default: fail("syntax", "expected a comparison operator");
        }
        bump();
        if (cur.kind == Tok::ParamOpen) {
            bump();
            c.is_param = true;
            c.param = parse_param(ParamSlot::Kind::Boundary);
        } else {
            c.literal = signed_number();
        }
        return c;
    }

    int parse_expr() {
        if (++depth > kMaxParseDepth) fail("syntax", "expression too deeply nested");
        int left = parse_term();
        while (cur.kind == Tok::Plus || cur.kind == Tok::Minus) {
            auto kind = cur.kind == Tok::Plus ? ExprNode::Kind::Add : ExprNode::Kind::Sub;
            bump();
            int right = parse_term();
            ExprNode n;
            n.kind = kind;
            n.a = left;
            n.b = right;
            left = add_node(n);
        }
        --depth;
        return left;
    }

    int parse_term() {
        int left = parse_factor();
        while (cur.kind == Tok::Star || cur.kind == Tok::Slash) {
            auto kind = cur.kind == Tok::Star ? ExprNode::Kind::Mul : ExprNode::Kind::Div;
            bump();
            int right = parse_factor();
            ExprNode n;
            n.kind = kind;
            n.a = left;
            n.b = right;
            left = add_node(n);
        }
        return left;
    }

    int parse_factor() {
        if (++depth > kMaxParseDepth) fail("syntax", "expression too deeply nested");
        int result;
        switch (cur.kind) {
            case Tok::Minus: {
                bump();
                int child = parse_factor();
                ExprNode n;
                n.kind = ExprNode::Kind::Neg;
                n.a = child;
                result = add_node(n);
                break;
            }
            case Tok::Number: {
                ExprNode n;
                n.kind = ExprNode::Kind::Number;
                n.number = cur.number;
                bump();
                result = add_node(n);
                break;
            }
            case Tok::ParamOpen: {
                bump();
                ExprNode n;
                n.kind = ExprNode::Kind::Param;
                n.param = parse_param(ParamSlot::Kind::Coefficient);
                result = add_node(n);
                break;
            }
            case Tok::Feature: {
                ExprNode n;
                n.kind = ExprNode::Kind::Feature;
                n.feature = feature_id(cur.text);
                bump();
                result = add_node(n);
                break;
            }
            case Tok::LParen: {
                bump();
                result = parse_expr();
                if (cur.kind != Tok::RParen) fail("syntax", "expected ')'");
                bump();
                break;
            }
            case Tok::Ident: {
                const FuncInfo* fn = find_func(cur.text);
                if (!fn) fail("unknown-function", "unknown function '" + cur.text + "'");
                bump();
                if (cur.kind != Tok::LParen) fail("syntax", "expected '(' after function");
                bump();
                std::vector<int> args;
                args.push_back(parse_expr());
                while (cur.kind == Tok::Comma) {
                    bump();
                    args.push_back(parse_expr());
                }
                if (cur.kind != Tok::RParen) fail("syntax", "expected ')' closing call");
                bump();
                if (static_cast<int>(args.size()) != fn->arity)
                    fail("syntax", std::string("function '") + fn->name + "' expects " +
                                       std::to_string(fn->arity) + " argument(s), got " +
                                       std::to_string(args.size()));
                ExprNode n;
                n.kind = ExprNode::Kind::Call;
                n.func = fn->kind;
                n.a = args[0];
                if (args.size() > 1) n.b = args[1];
                if (args.size() > 2) n.c = args[2];
                result = add_node(n);
                break;
            }
            default:
                fail("syntax", "expected a number, parameter, feature, function or '('");
        }
        --depth;
        return result;
    }

    ExpertExpr run() {
        expect_ident("if");
        out.guard_.push_back(parse_clause());
        while (cur.kind == Tok::Ident && cur.text == "and") {
            bump();
            out.guard_.push_back(parse_clause());
        }
        expect_ident("then");
        out.body_root_ = parse_expr();
        expect_ident("else");
        if (cur.kind != Tok::Number || cur.number != 0.0)
            fail("syntax", "else branch must be the literal 0");
        bump();
        if (cur.kind != Tok::End) fail("syntax", "trailing input after expression");
        return std::move(out);
    }
};

ExpertExpr ExpertExpr::parse(const std::string& text,
                             const std::vector<std::string>& schema) {
    ExprParser p(text, schema);
    return p.run();
}

// ---------------------------------------------------------------------------
// evaluation

std::vector<double> ExpertExpr::resolve_params(
    const std::map<std::string, double>& theta) const {
    std::vector<double> values(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) values[i] = params_[i].value;
    for (const auto& [name, v] : theta) {
        bool found = false;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].name == name) {
                values[i] = v;
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("expr: unknown theta key '" + name + "'");
    }
    return values;
}

bool ExpertExpr::guard_true(std::span<const double> row,
                            std::span<const double> values) const {
    for (const auto& c : guard_) {
        const double lhs = row[static_cast<std::size_t>(c.feature)];
        const double rhs =
            c.is_param ? values[static_cast<std::size_t>(c.param)] : c.literal;
        bool ok = false;
        switch (c.cmp) {
            case Cmp::Lt: ok = lhs < rhs; break;
            case Cmp::Le: ok = lhs <= rhs; break;
            case Cmp::Gt: ok = lhs > rhs; break;
            case Cmp::Ge: ok = lhs >= rhs; break;
        }
        if (!ok) return false;
    }
    return true;
}

double ExpertExpr::eval_node(int id, std::span<const double> row,
                             std::span<const double> values) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.kind) {
        case ExprNode::Kind::Number: return n.number;
        case ExprNode::Kind::Param: return values[static_cast<std::size_t>(n.param)];
        case ExprNode::Kind::Feature: return row[static_cast<std::size_t>(n.feature)];
        case ExprNode::Kind::Neg: return -eval_node(n.a, row, values);
        case ExprNode::Kind::Add:
            return saturate(eval_node(n.a, row, values) + eval_node(n.b, row, values));
        case ExprNode::Kind::Sub:
            return saturate(eval_node(n.a, row, values) - eval_node(n.b, row, values));
        case ExprNode::Kind::Mul:
            return saturate(eval_node(n.a, row, values) * eval_node(n.b, row, values));
        case ExprNode::Kind::Div: {
            const double num = eval_node(n.a, row, values);
            double den = eval_node(n.b, row, values);
            const double sign = den < 0.0 ? -1.0 : 1.0;  // sign(0) = +1
            den = sign * std::max(std::fabs(den), kDivEps);
            return saturate(num / den);
        }
        case ExprNode::Kind::Call: {
            const double a = eval_node(n.a, row, values);
            switch (n.func) {
                case FuncKind::Exp: return saturate(std::exp(std::min(a, 700.0)));
                case FuncKind::Log1p: return std::log1p(std::fabs(a));
                case FuncKind::Tanh: return std::tanh(a);
                case FuncKind::Sigmoid: return sigmoid(a);
                case FuncKind::Abs: return std::fabs(a);
                case FuncKind::Sqrt: return std::sqrt(std::fabs(a));
                case FuncKind::Min:
                    return std::min(a, eval_node(n.b, row, values));
                case FuncKind::Max:
                    return std::max(a, eval_node(n.b, row, values));
                case FuncKind::Gauss: {
                    const double mu = eval_node(n.b, row, values);
                    double s = eval_node(n.c, row, values);
                    s = std::max(std::fabs(s), kDivEps);
                    const double t = (a - mu) / s;
                    return std::exp(-std::min(t * t, 700.0));
                }
                case FuncKind::Clip: {
                    double lo = eval_node(n.b, row, values);
                    double hi = eval_node(n.c, row, values);
                    if (lo > hi) std::swap(lo, hi);
                    return std::clamp(a, lo, hi);
                }
            }
            return 0.0;
        }
    }
    return 0.0;
}

double ExpertExpr::evaluate_with_values(std::span<const double> row,
                                        std::span<const double> param_values) const {
    if (!guard_true(row, param_values)) return 0.0;
    const double v = eval_node(body_root_, row, param_values);
    return std::clamp(v, -kOutputClip, kOutputClip);
}

double ExpertExpr::evaluate(std::span<const double> row,
                            const std::map<std::string, double>& theta) const {
    if (row.size() != schema_.size())
        throw std::runtime_error("expr: row does not match schema");
    const std::vector<double> values = resolve_params(theta);
    return evaluate_with_values(row, values);
}

// ---------------------------------------------------------------------------
// serialization

std::string ExpertExpr::render_number(double v) {
    if (v == 0.0) return "0";  // normalizes -0
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

std::string render_param(const ParamSlot& p) {
    std::string s = "p{" + p.name + "=" + ExpertExpr::render_number(p.value);
    if (p.frozen) s += ",frozen";
    s += "}";
    return s;
}

}  // namespace

std::string ExpertExpr::node_text(int id) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.kind) {
        case ExprNode::Kind::Number: return render_number(n.number);
        case ExprNode::Kind::Param:
            return render_param(params_[static_cast<std::size_t>(n.param)]);
        case ExprNode::Kind::Feature:
            return "`" + schema_[static_cast<std::size_t>(n.feature)] + "`";
        case ExprNode::Kind::Neg: return "(-" + node_text(n.a) + ")";
        case ExprNode::Kind::Add:
            return "(" + node_text(n.a) + " + " + node_text(n.b) + ")";
        case ExprNode::Kind::Sub:
            return "(" + node_text(n.a) + " - " + node_text(n.b) + ")";
        case ExprNode::Kind::Mul:
            return "(" + node_text(n.a) + " * " + node_text(n.b) + ")";
        case ExprNode::Kind::Div:
            return "(" + node_text(n.a) + " / " + node_text(n.b) + ")";
        case ExprNode::Kind::Call: {
            std::string s = func_text(n.func);
            s += "(" + node_text(n.a);
            if (n.b >= 0) s += ", " + node_text(n.b);
            if (n.c >= 0) s += ", " + node_text(n.c);
            s += ")";
            return s;
        }
    }
    return "?";
}

std::string ExpertExpr::guard_text() const {
    std::string s;
    for (std::size_t i = 0; i < guard_.size(); ++i) {
        if (i) s += " and ";
        const GuardClause& c = guard_[i];
        s += "`" + c.feature_name + "` ";
        s += cmp_text(c.cmp);
        s += " ";
        s += c.is_param ? render_param(params_[static_cast<std::size_t>(c.param)])
                        : render_number(c.literal);
    }
    return s;
}

std::string ExpertExpr::body_text() const { return node_text(body_root_); }

std::string ExpertExpr::serialize() const {
    return "if " + guard_text() + " then " + body_text() + " else 0";
}

// ---------------------------------------------------------------------------
// mutation hooks used by the outer loop

void ExpertExpr::set_param_value(const std::string& name, double value) {
    for (auto& p : params_) {
        if (p.name == name) {
            p.value = value;
            return;
        }
    }
    throw std::runtime_error("expr: no parameter named '" + name + "'");
}

void ExpertExpr::freeze_all() {
    for (auto& p : params_) p.frozen = true;
}

int ExpertExpr::promote_guard_literal(std::size_t clause_index, const std::string& name) {
    GuardClause& c = guard_.at(clause_index);
    if (c.is_param) throw std::runtime_error("expr: clause threshold is already a slot");
    for (const auto& p : params_)
        if (p.name == name)
            throw std::runtime_error("expr: parameter '" + name + "' already exists");
    params_.push_back({name, c.literal, false, ParamSlot::Kind::Boundary});
    c.is_param = true;
    c.param = static_cast<int>(params_.size() - 1);
    return c.param;
}

bool ExpertExpr::structural_equal(const ExpertExpr& a, const ExpertExpr& b) {
    if (a.guard_.size() != b.guard_.size()) return false;
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
        const auto& pa = a.params_[i];
        const auto& pb = b.params_[i];
        if (pa.name != pb.name || pa.value != pb.value || pa.frozen != pb.frozen ||
            pa.kind != pb.kind)
            return false;
    }
    for (std::size_t i = 0; i < a.guard_.size(); ++i) {
        const auto& ca = a.guard_[i];
        const auto& cb = b.guard_[i];
        if (ca.feature != cb.feature || ca.cmp != cb.cmp || ca.is_param != cb.is_param)
            return false;
        if (ca.is_param ? (ca.param != cb.param) : (ca.literal != cb.literal))
            return false;
    }
    // node pools are built in parse order, so compare recursively from roots
    auto eq = [&](auto&& self, int ia, int ib) -> bool {
        if ((ia < 0) != (ib < 0)) return false;
        if (ia < 0) return true;
        const ExprNode& na = a.nodes_[static_cast<std::size_t>(ia)];
        const ExprNode& nb = b.nodes_[static_cast<std::size_t>(ib)];
        if (na.kind != nb.kind) return false;
        switch (na.kind) {
            case ExprNode::Kind::Number:
                if (na.number != nb.number) return false;
                break;
            case ExprNode::Kind::Param:
                if (na.param != nb.param) return false;
                break;
            case ExprNode::Kind::Feature:
                if (na.feature != nb.feature) return false;
                break;
            case ExprNode::Kind::Call:
                if (na.func != nb.func) return false;
                break;
            default: break;
        }
        return self(self, na.a, nb.a) && self(self, na.b, nb.b) && self(self, na.c, nb.c);
    };
    return eq(eq, a.body_root_, b.body_root_);
}

}  // namespace symboost
