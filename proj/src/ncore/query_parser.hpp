#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ncore/errors.hpp"

namespace ncore {

// Boolean/fielded query AST. And/Or hold two or more children in input
// order; Not holds exactly one. Leaves keep the raw (unnormalized) text so
// printing reproduces the query; tokenization happens at evaluation.
struct QueryNode {
    enum class Type { And, Or, Not, Term, Phrase };

    Type type = Type::Term;
    std::vector<QueryNode> children;
    std::string field;  // leaves only; empty means title/description/subject
    std::string text;   // leaves only; phrase text is unquoted

    bool operator==(const QueryNode&) const = default;
};

// Thrown with the 0-based byte offset of the offending input.
class QuerySyntaxError : public NcoreError {
public:
    QuerySyntaxError(std::string message, size_t position)
        : NcoreError(Err::SyntaxError,
                     std::move(message) + " at position " + std::to_string(position)),
          position_(position) {}
    size_t position() const { return position_; }

private:
    size_t position_;
};

// Grammar:
//   query := or
//   or    := and ("OR" and)*
//   and   := unary ("AND" unary | unary)*     adjacency is AND
//   unary := "NOT" unary | atom
//   atom  := "(" query ")" | field ":" value | value
//   value := word | '"' phrase '"'
// Operators are the exact uppercase words; any other casing is a term.
// Field names must be DC fields or "body". Input over 4 KiB is rejected.
// Throws QuerySyntaxError or NcoreError(UnknownField / BadQuery).
QueryNode parse_query(std::string_view text);

// Canonical text form; parse_query(print_query(ast)) == ast.
std::string print_query(const QueryNode& node);

}  // namespace ncore
