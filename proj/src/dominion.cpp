#include "splitcp/dominion.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace splitcp {

ParseError::ParseError(const std::string& msg, int line, int col)
    : std::runtime_error("line " + std::to_string(line) + ", col " +
                         std::to_string(col) + ": " + msg),
      line_(line),
      col_(col) {}

// ---------------------------------------------------------------------------
// IntExpr

struct IntExpr::Node {
    enum class Kind { Lit, Name, Neg, Bin } kind;
    std::int64_t value = 0;
    std::string ident;
    char op = 0;
    std::shared_ptr<const Node> a, b;
};

IntExpr IntExpr::literal(std::int64_t v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Lit;
    n->value = v;
    return IntExpr(std::move(n));
}

IntExpr IntExpr::name(std::string ident) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Name;
    n->ident = std::move(ident);
    return IntExpr(std::move(n));
}

IntExpr IntExpr::negate(IntExpr e) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Neg;
    n->a = e.node_;
    return IntExpr(std::move(n));
}

IntExpr IntExpr::binary(char op, IntExpr lhs, IntExpr rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Bin;
    n->op = op;
    n->a = lhs.node_;
    n->b = rhs.node_;
    return IntExpr(std::move(n));
}

std::int64_t IntExpr::eval(const Env& env) const {
    const Node& n = *node_;
    switch (n.kind) {
        case Node::Kind::Lit:
            return n.value;
        case Node::Kind::Name: {
            auto it = env.find(n.ident);
            if (it == env.end())
                throw ModelError("unbound identifier '" + n.ident + "'");
            return it->second;
        }
        case Node::Kind::Neg:
            return -IntExpr(n.a).eval(env);
        case Node::Kind::Bin: {
            std::int64_t a = IntExpr(n.a).eval(env);
            std::int64_t b = IntExpr(n.b).eval(env);
            switch (n.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
            }
            throw ModelError("bad operator");
        }
    }
    throw ModelError("bad expression node");
}

// ---------------------------------------------------------------------------
// Expansion

namespace {

std::string suffix_part(std::int64_t v) {
    // negative generator values still have to produce a valid identifier
    return v < 0 ? "m" + std::to_string(-v) : std::to_string(v);
}

Expr instantiate_expr(const TemplateExpr& te, const IntExpr::Env& env) {
    if (te.var) {
        VarRef r{te.var->array, te.var->index.eval(env)};
        return Expr::element(std::move(r), te.offset.eval(env));
    }
    return Expr::literal(te.offset.eval(env));
}

Constraint instantiate(const TemplateConstraint& tc, const IntExpr::Env& env,
                       const std::string& suffix, const Model& context) {
    Constraint out;
    out.label = tc.label + suffix;
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, TAllDiff>) {
                const VarArray* arr = context.find_array(body.array);
                if (arr == nullptr)
                    throw ModelError("unknown array '" + body.array + "' in alldiff");
                AllDiff ad;
                for (std::int64_t i = 0; i < arr->length; ++i)
                    ad.vars.push_back({arr->name, i});
                out.body = std::move(ad);
            } else if constexpr (std::is_same_v<T, TEq>) {
                out.body = Eq{instantiate_expr(body.lhs, env),
                              instantiate_expr(body.rhs, env)};
            } else if constexpr (std::is_same_v<T, TLeq>) {
                out.body = Leq{instantiate_expr(body.lhs, env),
                               instantiate_expr(body.rhs, env)};
            } else if constexpr (std::is_same_v<T, TNot>) {
                out.body = Not{make_constraint(
                    instantiate(*body.inner, env, suffix, context))};
            } else {
                And conj;
                for (const auto& p : body.parts)
                    conj.parts.push_back(
                        make_constraint(instantiate(*p, env, suffix, context)));
                out.body = std::move(conj);
            }
        },
        tc.body);
    return out;
}

void check_instance_refs(const Model& context, const Constraint& c) {
    auto check = [&](const VarRef& r) {
        if (!context.flat_index(r))
            throw ModelError("reference " + r.to_string() +
                             " out of range in '" + c.label + "'");
    };
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, AllDiff>) {
                for (const auto& v : body.vars) check(v);
            } else if constexpr (std::is_same_v<T, Eq> || std::is_same_v<T, Leq>) {
                if (body.lhs.var) check(*body.lhs.var);
                if (body.rhs.var) check(*body.rhs.var);
            } else if constexpr (std::is_same_v<T, Not>) {
                check_instance_refs(context, *body.inner);
            } else {
                for (const auto& p : body.parts) check_instance_refs(context, *p);
            }
        },
        c.body);
}

void expand_rec(const Comprehension& c, const Model& context, std::size_t gen,
                IntExpr::Env& env, std::vector<std::int64_t>& chosen,
                std::vector<Constraint>& out) {
    if (gen == c.generators.size()) {
        std::string suffix;
        for (std::int64_t v : chosen) suffix += "_" + suffix_part(v);
        Constraint inst = instantiate(c.templ, env, suffix, context);
        check_instance_refs(context, inst);
        out.push_back(std::move(inst));
        return;
    }
    const Generator& g = c.generators[gen];
    const std::int64_t lo = g.lo.eval(env);
    const std::int64_t hi = g.hi.eval(env);
    for (std::int64_t v = lo; v <= hi; ++v) {
        env[g.name] = v;
        chosen.push_back(v);
        expand_rec(c, context, gen + 1, env, chosen, out);
        chosen.pop_back();
        env.erase(g.name);
    }
}

}  // namespace

std::vector<Constraint> expand_comprehension(const Comprehension& c,
                                             const Model& context) {
    IntExpr::Env env(context.params.begin(), context.params.end());
    std::vector<std::int64_t> chosen;
    std::vector<Constraint> out;
    expand_rec(c, context, 0, env, chosen, out);
    return out;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
    Ident, Int,
    LParen, RParen, LBracket, RBracket, LBrace, RBrace,
    Comma, DotDot, Dot, Colon, Equals, Pipe, Plus, Minus, Star,
    End
};

struct Token {
    Tok kind;
    std::string text;
    std::int64_t value = 0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : s_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_ws();
            Token t = next();
            out.push_back(t);
            if (t.kind == Tok::End) break;
        }
        return out;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (c == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
            } else if (c == '\n') {
                ++pos_;
                ++line_;
                col_ = 1;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
                ++col_;
            } else {
                break;
            }
        }
    }

    Token next() {
        if (pos_ >= s_.size()) return {Tok::End, "", 0, line_, col_};
        const int line = line_, col = col_;
        char c = s_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                advance();
            return {Tok::Ident, s_.substr(start, pos_ - start), 0, line, col};
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                advance();
            const std::string digits = s_.substr(start, pos_ - start);
            std::int64_t value = 0;
            try {
                value = std::stoll(digits);
            } catch (const std::out_of_range&) {
                throw ParseError("integer literal out of 64-bit range", line, col);
            }
            return {Tok::Int, digits, value, line, col};
        }
        advance();
        switch (c) {
            case '(': return {Tok::LParen, "(", 0, line, col};
            case ')': return {Tok::RParen, ")", 0, line, col};
            case '[': return {Tok::LBracket, "[", 0, line, col};
            case ']': return {Tok::RBracket, "]", 0, line, col};
            case '{': return {Tok::LBrace, "{", 0, line, col};
            case '}': return {Tok::RBrace, "}", 0, line, col};
            case ',': return {Tok::Comma, ",", 0, line, col};
            case ':': return {Tok::Colon, ":", 0, line, col};
            case '=': return {Tok::Equals, "=", 0, line, col};
            case '|': return {Tok::Pipe, "|", 0, line, col};
            case '+': return {Tok::Plus, "+", 0, line, col};
            case '-': return {Tok::Minus, "-", 0, line, col};
            case '*': return {Tok::Star, "*", 0, line, col};
            case '.':
                if (pos_ < s_.size() && s_[pos_] == '.') {
                    advance();
                    return {Tok::DotDot, "..", 0, line, col};
                }
                return {Tok::Dot, ".", 0, line, col};
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }

    void advance() {
        ++pos_;
        ++col_;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(Lexer(text).run()) {}

    Model parse() {
        header();
        lettings();
        dims();
        finds();
        expect_ident("such");
        expect_ident("that");
        citems();
        expect(Tok::End, "end of input");
        model_.validate();
        return std::move(model_);
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }

    Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    [[noreturn]] void fail(const std::string& msg, const Token& at) const {
        throw ParseError(msg, at.line, at.col);
    }

    Token expect(Tok kind, const std::string& what) {
        Token t = take();
        if (t.kind != kind)
            fail("expected " + what + ", got '" + (t.kind == Tok::End ? "<eof>" : t.text) + "'", t);
        return t;
    }

    Token expect_ident(const std::string& word) {
        Token t = take();
        if (t.kind != Tok::Ident || t.text != word)
            fail("expected '" + word + "'", t);
        return t;
    }

    bool peek_ident(const std::string& word) const {
        return peek().kind == Tok::Ident && peek().text == word;
    }

    void header() {
        expect_ident("language");
        expect_ident("Dominion");
        Token major = expect(Tok::Int, "version");
        expect(Tok::Dot, "'.'");
        Token minor = expect(Tok::Int, "version");
        if (major.value != 0 || minor.value != 1)
            fail("unsupported language version", major);
    }

    void lettings() {
        while (peek_ident("letting")) {
            take();
            Token name = expect(Tok::Ident, "identifier");
            expect(Tok::Equals, "'='");
            bool neg = false;
            if (peek().kind == Tok::Minus) {
                take();
                neg = true;
            }
            Token val = expect(Tok::Int, "integer");
            if (!model_.params.emplace(name.text, neg ? -val.value : val.value).second)
                fail("duplicate letting '" + name.text + "'", name);
        }
    }

    void dims() {
        while (peek_ident("dim")) {
            take();
            Token name = expect(Tok::Ident, "identifier");
            expect(Tok::LBracket, "'['");
            std::int64_t len = eval_intexpr(parse_intexpr(), name);
            expect(Tok::RBracket, "']'");
            expect(Tok::Colon, "':'");
            expect_ident("int");
            if (len < 0) fail("negative array length", name);
            if (model_.find_array(name.text) != nullptr)
                fail("duplicate array '" + name.text + "'", name);
            model_.vars.push_back({name.text, len, Domain{}});
        }
    }

    void finds() {
        std::set<std::string> found;
        while (peek_ident("find")) {
            take();
            Token name = expect(Tok::Ident, "identifier");
            expect(Tok::LBracket, "'['");
            expect(Tok::DotDot, "'..'");
            expect(Tok::RBracket, "']'");
            expect(Tok::Colon, "':'");
            expect_ident("int");
            expect(Tok::LBrace, "'{'");
            std::int64_t lo = eval_intexpr(parse_intexpr(), name);
            expect(Tok::DotDot, "'..'");
            std::int64_t hi = eval_intexpr(parse_intexpr(), name);
            expect(Tok::RBrace, "'}'");
            VarArray* arr = nullptr;
            for (auto& a : model_.vars)
                if (a.name == name.text) arr = &a;
            if (arr == nullptr) fail("find for undeclared array '" + name.text + "'", name);
            if (!found.insert(name.text).second)
                fail("duplicate find for array '" + name.text + "'", name);
            Domain d = Domain::range(lo, hi);
            if (d.empty()) fail("empty domain for array '" + name.text + "'", name);
            arr->domain = d;
        }
        for (const auto& a : model_.vars)
            if (!found.count(a.name))
                fail("array '" + a.name + "' has no find declaration", peek());
    }

    void citems() {
        std::set<std::string> used;
        while (peek().kind == Tok::Ident) {
            Token label = take();
            Comprehension comp;
            if (peek().kind == Tok::LBracket) {
                take();
                comp.templ = parse_template_atom(label.text);
                expect(Tok::Pipe, "'|'");
                do {
                    Token g = expect(Tok::Ident, "generator name");
                    expect_ident("in");
                    expect(Tok::LBrace, "'{'");
                    IntExpr lo = parse_intexpr();
                    expect(Tok::DotDot, "'..'");
                    IntExpr hi = parse_intexpr();
                    expect(Tok::RBrace, "'}'");
                    comp.generators.push_back({g.text, lo, hi});
                } while (take_if(Tok::Comma));
                expect(Tok::RBracket, "']'");
            } else {
                comp.templ = parse_template_atom(label.text);
            }
            std::vector<Constraint> instances;
            try {
                instances = expand_comprehension(comp, model_);
            } catch (const ModelError& e) {
                fail(e.what(), label);
            }
            for (auto& inst : instances) {
                std::vector<std::string> ls;
                collect_labels(inst, ls);
                for (const auto& l : ls)
                    if (!used.insert(l).second)
                        fail("duplicate label '" + l + "'", label);
                model_.constraints.push_back(std::move(inst));
            }
        }
    }

    TemplateConstraint parse_template_atom(std::string label) {
        Token kw = expect(Tok::Ident, "constraint kind");
        TemplateConstraint tc;
        tc.label = std::move(label);
        if (kw.text == "alldiff") {
            expect(Tok::LParen, "'('");
            Token arr = expect(Tok::Ident, "array name");
            expect(Tok::LBracket, "'['");
            expect(Tok::DotDot, "'..'");
            expect(Tok::RBracket, "']'");
            expect(Tok::RParen, "')'");
            tc.body = TAllDiff{arr.text};
        } else if (kw.text == "eq" || kw.text == "leq") {
            expect(Tok::LParen, "'('");
            TemplateExpr lhs = parse_template_expr();
            expect(Tok::Comma, "','");
            TemplateExpr rhs = parse_template_expr();
            expect(Tok::RParen, "')'");
            if (kw.text == "eq")
                tc.body = TEq{std::move(lhs), std::move(rhs)};
            else
                tc.body = TLeq{std::move(lhs), std::move(rhs)};
        } else if (kw.text == "not") {
            expect(Tok::LParen, "'('");
            Token inner = expect(Tok::Ident, "inner label");
            TemplateConstraint ic = parse_template_atom(inner.text);
            expect(Tok::RParen, "')'");
            tc.body = TNot{std::make_shared<const TemplateConstraint>(std::move(ic))};
        } else if (kw.text == "and") {
            expect(Tok::LParen, "'('");
            TAnd conj;
            do {
                Token part = expect(Tok::Ident, "part label");
                conj.parts.push_back(std::make_shared<const TemplateConstraint>(
                    parse_template_atom(part.text)));
            } while (take_if(Tok::Comma));
            expect(Tok::RParen, "')'");
            if (conj.parts.size() < 2) fail("and() needs at least 2 parts", kw);
            tc.body = std::move(conj);
        } else {
            fail("unknown constraint kind '" + kw.text + "'", kw);
        }
        return tc;
    }

    // expr := IDENT "[" intexpr "]" | intexpr | "add(" expr "," intexpr ")"
    TemplateExpr parse_template_expr() {
        if (peek_ident("add") && peek(1).kind == Tok::LParen) {
            take();
            take();
            TemplateExpr base = parse_template_expr();
            expect(Tok::Comma, "','");
            IntExpr off = parse_intexpr();
            expect(Tok::RParen, "')'");
            base.offset = IntExpr::binary('+', base.offset, off);
            return base;
        }
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::LBracket &&
            peek(2).kind != Tok::DotDot) {
            Token arr = take();
            take();
            IntExpr idx = parse_intexpr();
            expect(Tok::RBracket, "']'");
            return {TemplateRef{arr.text, idx}, IntExpr::literal(0)};
        }
        return {std::nullopt, parse_intexpr()};
    }

    // intexpr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
    // factor := INT | IDENT | '-' factor | '(' intexpr ')'
    IntExpr parse_intexpr() {
        IntExpr e = parse_term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            char op = take().kind == Tok::Plus ? '+' : '-';
            e = IntExpr::binary(op, e, parse_term());
        }
        return e;
    }

    IntExpr parse_term() {
        IntExpr e = parse_factor();
        while (peek().kind == Tok::Star) {
            take();
            e = IntExpr::binary('*', e, parse_factor());
        }
        return e;
    }

    IntExpr parse_factor() {
        Token t = take();
        switch (t.kind) {
            case Tok::Int:
                return IntExpr::literal(t.value);
            case Tok::Ident:
                return IntExpr::name(t.text);
            case Tok::Minus:
                return IntExpr::negate(parse_factor());
            case Tok::LParen: {
                IntExpr e = parse_intexpr();
                expect(Tok::RParen, "')'");
                return e;
            }
            default:
                fail("expected integer expression", t);
        }
    }

    std::int64_t eval_intexpr(const IntExpr& e, const Token& at) {
        try {
            IntExpr::Env env(model_.params.begin(), model_.params.end());
            return e.eval(env);
        } catch (const ModelError& err) {
            fail(err.what(), at);
        }
    }

    bool take_if(Tok kind) {
        if (peek().kind == kind) {
            take();
            return true;
        }
        return false;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Model model_;
};

}  // namespace

Model parse_model(const std::string& text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Serializer

namespace {

std::string serialize_expr(const Expr& e) {
    if (!e.var) return std::to_string(e.offset);
    std::string ref = e.var->array + "[" + std::to_string(e.var->index) + "]";
    if (e.offset == 0) return ref;
    return "add(" + ref + ", " + std::to_string(e.offset) + ")";
}

std::string serialize_atom(const Constraint& c);

std::string serialize_labeled(const Constraint& c) {
    return c.label + " " + serialize_atom(c);
}

std::string serialize_atom(const Constraint& c) {
    return std::visit(
        [&](const auto& body) -> std::string {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, AllDiff>) {
                if (body.vars.empty())
                    throw ModelError("alldiff over no variables is not expressible");
                const std::string& name = body.vars.front().array;
                for (std::size_t i = 0; i < body.vars.size(); ++i)
                    if (body.vars[i].array != name ||
                        body.vars[i].index != static_cast<std::int64_t>(i))
                        throw ModelError(
                            "alldiff is only expressible over a whole array");
                return "alldiff(" + name + "[..])";
            } else if constexpr (std::is_same_v<T, Eq>) {
                return "eq(" + serialize_expr(body.lhs) + ", " +
                       serialize_expr(body.rhs) + ")";
            } else if constexpr (std::is_same_v<T, Leq>) {
                return "leq(" + serialize_expr(body.lhs) + ", " +
                       serialize_expr(body.rhs) + ")";
            } else if constexpr (std::is_same_v<T, Not>) {
                return "not(" + serialize_labeled(*body.inner) + ")";
            } else {
                std::string out = "and(";
                for (std::size_t i = 0; i < body.parts.size(); ++i) {
                    if (i > 0) out += ", ";
                    out += serialize_labeled(*body.parts[i]);
                }
                return out + ")";
            }
        },
        c.body);
}

}  // namespace

std::string serialize_constraint(const Constraint& c) {
    return serialize_labeled(c);
}

std::string serialize_model(const Model& m) {
    std::ostringstream os;
    os << "language Dominion 0.1\n";
    for (const auto& [name, value] : m.params)
        os << "letting " << name << " = " << value << "\n";
    for (const auto& arr : m.vars)
        os << "dim " << arr.name << "[" << arr.length << "]: int\n";
    for (const auto& arr : m.vars) {
        if (arr.domain.empty())
            throw ModelError("array '" + arr.name + "' has an empty domain");
        if (!arr.domain.contiguous())
            throw ModelError("declared domain of '" + arr.name +
                             "' is not a contiguous range");
        os << "find " << arr.name << "[..]: int {" << arr.domain.min() << ".."
           << arr.domain.max() << "}\n";
    }
    os << "such that\n";
    for (const auto& c : m.constraints) os << serialize_labeled(c) << "\n";
    return os.str();
}

SourceModel load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    SourceModel sm;
    sm.text = buf.str();
    sm.model = parse_model(sm.text);
    sm.origin = path.string();
    return sm;
}

void write_model_file(const std::filesystem::path& path, const Model& m) {
    const std::string text = serialize_model(m);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ModelError("cannot write model file " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw ModelError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace splitcp
