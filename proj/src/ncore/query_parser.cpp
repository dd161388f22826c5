#include "ncore/query_parser.hpp"

#include "ncore/dc.hpp"

namespace ncore {

namespace {

constexpr size_t kMaxQueryBytes = 4096;

struct Token {
    enum class Type { Word, Phrase, Colon, LParen, RParen, End };
    Type type = Type::End;
    std::string text;
    size_t pos = 0;            // byte offset of the token's first character
    bool glued_before = false;  // no whitespace between this and the previous token
};

bool word_char(char c) {
    return static_cast<unsigned char>(c) > 0x20 && c != '(' && c != ')' && c != ':' && c != '"';
}

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    size_t i = 0;
    bool gap = true;
    while (i < s.size()) {
        char c = s[i];
        if (static_cast<unsigned char>(c) <= 0x20) {
            ++i;
            gap = true;
            continue;
        }
        Token t;
        t.pos = i;
        t.glued_before = !gap;
        gap = false;
        if (c == '(') {
            t.type = Token::Type::LParen;
            ++i;
        } else if (c == ')') {
            t.type = Token::Type::RParen;
            ++i;
        } else if (c == ':') {
            t.type = Token::Type::Colon;
            ++i;
        } else if (c == '"') {
            size_t close = s.find('"', i + 1);
            if (close == std::string_view::npos)
                throw QuerySyntaxError("unterminated phrase", s.size());
            t.type = Token::Type::Phrase;
            t.text = std::string(s.substr(i + 1, close - i - 1));
            i = close + 1;
        } else {
            size_t start = i;
            while (i < s.size() && word_char(s[i])) ++i;
            t.type = Token::Type::Word;
            t.text = std::string(s.substr(start, i - start));
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.type = Token::Type::End;
    end.pos = s.size();
    out.push_back(end);
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    QueryNode parse() {
        QueryNode q = parse_or();
        if (peek().type != Token::Type::End)
            throw QuerySyntaxError("unexpected input after query", peek().pos);
        return q;
    }

private:
    const Token& peek(size_t ahead = 0) const {
        size_t i = std::min(at_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    const Token& take() { return toks_[std::min(at_++, toks_.size() - 1)]; }

    static bool is_keyword(const Token& t, std::string_view kw) {
        return t.type == Token::Type::Word && t.text == kw;
    }

    static bool starts_atom(const Token& t) {
        switch (t.type) {
            case Token::Type::LParen:
            case Token::Type::Phrase:
                return true;
            case Token::Type::Word:
                return t.text != "AND" && t.text != "OR";  // NOT starts a unary
            default:
                return false;
        }
    }

    QueryNode parse_or() {
        QueryNode first = parse_and();
        if (!is_keyword(peek(), "OR")) return first;
        QueryNode node;
        node.type = QueryNode::Type::Or;
        node.children.push_back(std::move(first));
        while (is_keyword(peek(), "OR")) {
            take();
            node.children.push_back(parse_and());
        }
        return node;
    }

    QueryNode parse_and() {
        QueryNode first = parse_unary();
        if (!is_keyword(peek(), "AND") && !starts_atom(peek()) && !is_keyword(peek(), "NOT"))
            return first;
        QueryNode node;
        node.type = QueryNode::Type::And;
        node.children.push_back(std::move(first));
        while (true) {
            if (is_keyword(peek(), "AND")) {
                take();
                node.children.push_back(parse_unary());
            } else if (starts_atom(peek()) || is_keyword(peek(), "NOT")) {
                node.children.push_back(parse_unary());
            } else {
                break;
            }
        }
        return node;
    }

    QueryNode parse_unary() {
        if (is_keyword(peek(), "NOT")) {
            take();
            QueryNode node;
            node.type = QueryNode::Type::Not;
            node.children.push_back(parse_unary());
            return node;
        }
        return parse_atom();
    }

    QueryNode parse_atom() {
        const Token& t = peek();
        if (t.type == Token::Type::LParen) {
            take();
            QueryNode inner = parse_or();
            if (peek().type != Token::Type::RParen)
                throw QuerySyntaxError("expected ')'", peek().pos);
            take();
            return inner;
        }
        if (t.type == Token::Type::Phrase) {
            take();
            QueryNode leaf;
            leaf.type = QueryNode::Type::Phrase;
            leaf.text = t.text;
            return leaf;
        }
        if (t.type != Token::Type::Word)
            throw QuerySyntaxError("expected a term", t.pos);

        // field ":" value, with the colon glued to the field word
        if (peek(1).type == Token::Type::Colon && peek(1).glued_before) {
            std::string field = t.text;
            size_t field_pos = t.pos;
            take();  // word
            const Token& colon = take();
            if (!is_queryable_field(field))
                fail(Err::UnknownField, "unknown field: " + field, field);
            (void)field_pos;
            const Token& v = peek();
            if (v.type == Token::Type::Phrase) {
                take();
                QueryNode leaf;
                leaf.type = QueryNode::Type::Phrase;
                leaf.field = field;
                leaf.text = v.text;
                return leaf;
            }
            bool operator_word = v.type == Token::Type::Word &&
                                 (v.text == "AND" || v.text == "OR" || v.text == "NOT");
            if (v.type == Token::Type::Word && !operator_word) {
                take();
                QueryNode leaf;
                leaf.type = QueryNode::Type::Term;
                leaf.field = field;
                leaf.text = v.text;
                return leaf;
            }
            throw QuerySyntaxError("expected a value after ':'", colon.pos + 1);
        }
        take();
        QueryNode leaf;
        leaf.type = QueryNode::Type::Term;
        leaf.text = t.text;
        return leaf;
    }

    std::vector<Token> toks_;
    size_t at_ = 0;
};

bool composite(const QueryNode& n) {
    return n.type == QueryNode::Type::And || n.type == QueryNode::Type::Or ||
           n.type == QueryNode::Type::Not;
}

void print_node(const QueryNode& n, std::string& out) {
    auto child_form = [&](const QueryNode& c) {
        if (composite(c)) {
            out.push_back('(');
            print_node(c, out);
            out.push_back(')');
        } else {
            print_node(c, out);
        }
    };
    switch (n.type) {
        case QueryNode::Type::And:
        case QueryNode::Type::Or: {
            const char* sep = n.type == QueryNode::Type::And ? " AND " : " OR ";
            for (size_t i = 0; i < n.children.size(); ++i) {
                if (i) out.append(sep);
                child_form(n.children[i]);
            }
            break;
        }
        case QueryNode::Type::Not:
            out.append("NOT ");
            child_form(n.children.at(0));
            break;
        case QueryNode::Type::Term:
            if (!n.field.empty()) {
                out.append(n.field);
                out.push_back(':');
            }
            out.append(n.text);
            break;
        case QueryNode::Type::Phrase:
            if (!n.field.empty()) {
                out.append(n.field);
                out.push_back(':');
            }
            out.push_back('"');
            out.append(n.text);
            out.push_back('"');
            break;
    }
}

}  // namespace

QueryNode parse_query(std::string_view text) {
    if (text.size() > kMaxQueryBytes)
        fail(Err::BadQuery, "query exceeds " + std::to_string(kMaxQueryBytes) + " bytes");
    Parser p(lex(text));
    return p.parse();
}

std::string print_query(const QueryNode& node) {
    std::string out;
    print_node(node, out);
    return out;
}

}  // namespace ncore
