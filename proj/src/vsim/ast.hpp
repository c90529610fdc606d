#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poet/vsim/value.hpp"
#include "poet/vsim/vsim.hpp"

namespace poet::vsim {

struct Loc {
    std::string file;
    int line = 0;
    std::string str() const { return file + ":" + std::to_string(line); }
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { Number, String, Ident, BitSelect, PartSelect, IndexedPart, Unary, Binary, Ternary, Concat, Replicate, SysCall };
    Kind kind;
    Loc loc;
    // Number
    Value number;
    bool sized = true;
    // String / Ident / SysCall / operator spelling
    std::string text;
    // Operands: unary [0]; binary [0],[1]; ternary [0..2]; concat parts; replicate [0]=count, rest parts;
    // bit select [0]=index; part select [0]=msb [1]=lsb; indexed part [0]=base [1]=width.
    std::vector<ExprPtr> args;
    bool ascending = false;  // for "-:" indexed part selects

    Expr(Kind k, Loc l) : kind(k), loc(std::move(l)) {}
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct EventExpr {
    enum class Edge { Any, Pos, Neg } edge = Edge::Any;
    ExprPtr expr;
};

struct CaseItem {
    std::vector<ExprPtr> labels;  // empty for default
    StmtPtr body;
};

struct Stmt {
    enum class Kind { Block, Assign, NonBlocking, If, Case, For, While, Repeat, Forever, Delay, Event, SysTask, Null };
    Kind kind;
    Loc loc;
    std::vector<StmtPtr> body;  // block statements; if: [then, else?]; loops: [body]; delay/event: [stmt?]
    ExprPtr lhs;                // lvalue for assigns
    ExprPtr rhs;                // assigned value, condition, case selector, delay amount, repeat count
    std::vector<CaseItem> items;
    std::string case_kind;      // case, casez, casex
    StmtPtr init;               // for-loop init
    StmtPtr step;               // for-loop step
    std::vector<EventExpr> events;
    bool star = false;          // @*
    std::string task;           // system task name
    std::vector<ExprPtr> task_args;

    Stmt(Kind k, Loc l) : kind(k), loc(std::move(l)) {}
};

struct Range {
    ExprPtr msb;
    ExprPtr lsb;
};

struct NetDecl {
    std::string kind;  // wire, reg, integer
    std::optional<Range> range;
    std::string name;
    ExprPtr init;
    Loc loc;
};

struct PortInfo {
    std::string name;
    std::string direction;  // input, output, inout; empty until declared
};

struct ParamDecl {
    std::string name;
    ExprPtr value;
    bool local = false;
};

struct Connection {
    std::string port;  // empty for positional
    ExprPtr expr;      // may be null for .port()
};

struct Instance {
    std::string module;
    std::string name;
    std::vector<Connection> params;
    std::vector<Connection> ports;
    Loc loc;
};

struct ContAssign {
    ExprPtr lhs;
    ExprPtr rhs;
    Loc loc;
};

struct Module {
    std::string name;
    Loc loc;
    std::vector<PortInfo> ports;
    std::vector<ParamDecl> params;
    std::vector<NetDecl> nets;
    std::vector<ContAssign> assigns;
    std::vector<StmtPtr> always;
    std::vector<StmtPtr> initial;
    std::vector<Instance> instances;
};

/// Parses the supported Verilog subset; throws CompileError.
std::vector<Module> parse_source(const std::string& text, const std::string& file);

}  // namespace poet::vsim
