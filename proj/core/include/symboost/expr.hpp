#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace symboost {

// Guarded expert language. Grammar:
//
//   expert := "if" pred "then" expr "else" "0"
//   pred   := clause ("and" clause)*
//   clause := feature cmp atom
//   cmp    := "<" | "<=" | ">" | ">="
//   atom   := number | param
//   expr   := term (("+" | "-") term)*
//   term   := factor (("*" | "/") factor)*
//   factor := number | param | feature | fn "(" expr ("," expr)* ")"
//           | "(" expr ")" | "-" factor
//   param  := "p{" name "=" number [",frozen"] "}"
//
// Features are backquoted names checked against the dataset schema. The
// function set is exp, log1p, tanh, sigmoid, abs, sqrt, min, max, gauss,
// clip. Everything outside the guard evaluates to exactly zero.

enum class Cmp { Lt, Le, Gt, Ge };

enum class FuncKind { Exp, Log1p, Tanh, Sigmoid, Abs, Sqrt, Min, Max, Gauss, Clip };

struct ParamSlot {
    enum class Kind { Coefficient, Boundary };
    std::string name;
    double value = 0.0;
    bool frozen = false;
    Kind kind = Kind::Coefficient;
};

struct ExprNode {
    enum class Kind { Number, Param, Feature, Neg, Add, Sub, Mul, Div, Call };
    Kind kind = Kind::Number;
    double number = 0.0;
    int param = -1;
    int feature = -1;
    FuncKind func = FuncKind::Exp;
    int a = -1, b = -1, c = -1;  // children
};

struct GuardClause {
    int feature = -1;
    std::string feature_name;
    Cmp cmp = Cmp::Gt;
    bool is_param = false;
    double literal = 0.0;
    int param = -1;
};

struct ParseError : std::runtime_error {
    ParseError(std::string kind_, const std::string& message, int line_, int column_)
        : std::runtime_error(message), kind(std::move(kind_)), line(line_), column(column_) {}
    std::string kind;  // lexical | syntax | unknown-feature | unknown-function | duplicate-parameter
    int line = 0;
    int column = 0;
};

class ExpertExpr {
public:
    ExpertExpr() = default;

    static ExpertExpr parse(const std::string& text, const std::vector<std::string>& schema);

    // Total on finite inputs: protected division/sqrt/log, per-node magnitude
    // saturation, and a final +-3 clip on the body value. Returns exactly 0
    // when the guard is false.
    double evaluate(std::span<const double> row,
                    const std::map<std::string, double>& theta = {}) const;
    // hot path: caller resolves the parameter vector once per theta
    double evaluate_with_values(std::span<const double> row,
                                std::span<const double> param_values) const;
    bool guard_true(std::span<const double> row,
                    std::span<const double> param_values) const;

    const std::vector<ParamSlot>& params() const { return params_; }
    // defaults overridden by theta; throws on unknown names
    std::vector<double> resolve_params(const std::map<std::string, double>& theta) const;

    std::string serialize() const;
    std::string guard_text() const;
    std::string body_text() const;

    const std::vector<GuardClause>& guard() const { return guard_; }
    const std::vector<std::string>& schema() const { return schema_; }

    void set_param_value(const std::string& name, double value);
    void freeze_all();
    // converts a literal guard threshold into a named boundary slot;
    // returns the new slot index
    int promote_guard_literal(std::size_t clause_index, const std::string& name);

    static bool structural_equal(const ExpertExpr& a, const ExpertExpr& b);

    // canonical number rendering, up to 9 significant digits
    static std::string render_number(double v);

private:
    friend struct ExprParser;
    std::vector<GuardClause> guard_;
    std::vector<ExprNode> nodes_;
    int body_root_ = -1;
    std::vector<ParamSlot> params_;
    std::vector<std::string> schema_;

    double eval_node(int id, std::span<const double> row,
                     std::span<const double> values) const;
    std::string node_text(int id) const;
};

}  // namespace symboost
