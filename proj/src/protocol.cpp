#include "qfup/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_num(const std::string& tok, int line, int col) {
  if (tok == "inf" || tok == "+inf") return kInf;
  if (tok == "-inf") return -kInf;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError("malformed number '" + tok + "'", line, col);
  return v;
}

long parse_int(const std::string& tok, int line, int col) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0')
    throw ParseError("malformed integer '" + tok + "'", line, col);
  return v;
}

std::vector<double> parse_nums(const std::string& value, std::size_t count,
                               int line, int col) {
  auto toks = split_ws(value);
  if (toks.size() != count)
    throw ParseError("expected " + std::to_string(count) + " numbers", line,
                     col);
  std::vector<double> out;
  for (const auto& t : toks) out.push_back(parse_num(t, line, col));
  return out;
}

Rect parse_rect(const std::string& value, int line, int col) {
  auto v = parse_nums(value, 4, line, col);
  Rect r{v[0], v[1], v[2], v[3]};
  if (!r.valid())
    throw ParseError("rectangle needs t_lo <= t_hi and x_lo <= x_hi", line,
                     col);
  return r;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_') return false;
  return true;
}

// ---------------------------------------------------------------------
// observable grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := primary ('^' uint)?
//   primary:= 'phi(' name ')' | 'jordan(' expr ',' expr ')'
//          | number | '(' expr ')'
struct ObsParser {
  const std::string& s;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("observable: " + msg, 1, (int)pos + 1);
  }
  void ws() {
    while (pos < s.size() && std::isspace((unsigned char)s[pos])) ++pos;
  }
  bool eat(char c) {
    ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  bool eat_word(const char* w) {
    ws();
    std::size_t n = std::strlen(w);
    if (s.compare(pos, n, w) == 0) {
      pos += n;
      return true;
    }
    return false;
  }

  ObservableExpr expr() {
    ObservableExpr out;
    out.kind = ObservableExpr::Kind::sum;
    ObservableExpr first = term();
    first.sign = 1;
    out.kids.push_back(std::move(first));
    for (;;) {
      ws();
      if (eat('+')) {
        ObservableExpr t = term();
        t.sign = 1;
        out.kids.push_back(std::move(t));
      } else if (eat('-')) {
        ObservableExpr t = term();
        t.sign = -1;
        out.kids.push_back(std::move(t));
      } else {
        break;
      }
    }
    if (out.kids.size() == 1 && out.kids[0].sign == 1)
      return std::move(out.kids[0]);
    return out;
  }

  ObservableExpr term() {
    ObservableExpr out;
    out.kind = ObservableExpr::Kind::product;
    out.kids.push_back(factor());
    while (eat('*')) out.kids.push_back(factor());
    if (out.kids.size() == 1) return std::move(out.kids[0]);
    return out;
  }

  ObservableExpr factor() {
    ObservableExpr base = primary();
    ws();
    if (eat('^')) {
      ws();
      std::size_t start = pos;
      while (pos < s.size() && std::isdigit((unsigned char)s[pos])) ++pos;
      if (pos == start) fail("expected a non-negative integer exponent");
      ObservableExpr out;
      out.kind = ObservableExpr::Kind::power;
      out.exponent = (int)std::strtol(s.substr(start, pos - start).c_str(),
                                      nullptr, 10);
      out.kids.push_back(std::move(base));
      return out;
    }
    return base;
  }

  ObservableExpr primary() {
    ws();
    if (pos >= s.size()) fail("unexpected end of expression");
    if (eat_word("phi")) {
      expect('(');
      ws();
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum((unsigned char)s[pos]) || s[pos] == '_'))
        ++pos;
      if (pos == start) fail("expected a field name");
      ObservableExpr out;
      out.kind = ObservableExpr::Kind::field;
      out.name = s.substr(start, pos - start);
      expect(')');
      return out;
    }
    if (eat_word("jordan")) {
      expect('(');
      ObservableExpr out;
      out.kind = ObservableExpr::Kind::jordan;
      out.kids.push_back(expr());
      expect(',');
      out.kids.push_back(expr());
      expect(')');
      return out;
    }
    if (eat('(')) {
      ObservableExpr inner = expr();
      expect(')');
      return inner;
    }
    // number
    std::size_t start = pos;
    char* end = nullptr;
    const double v = std::strtod(s.c_str() + pos, &end);
    if (end == s.c_str() + pos) fail("expected a number, field, or '('");
    pos = (std::size_t)(end - s.c_str());
    ObservableExpr out;
    out.kind = ObservableExpr::Kind::scalar;
    out.value = v;
    (void)start;
    return out;
  }
};

void collect_names(const ObservableExpr& e, std::vector<std::string>& out) {
  if (e.kind == ObservableExpr::Kind::field) out.push_back(e.name);
  for (const auto& k : e.kids) collect_names(k, out);
}

std::string observable_to_text(const ObservableExpr& e) {
  using K = ObservableExpr::Kind;
  switch (e.kind) {
    case K::scalar:
      return fmt(e.value);
    case K::field:
      return "phi(" + e.name + ")";
    case K::power:
      return observable_to_text(e.kids[0]) + "^" + std::to_string(e.exponent);
    case K::product: {
      std::string out;
      for (std::size_t i = 0; i < e.kids.size(); ++i) {
        if (i) out += "*";
        out += observable_to_text(e.kids[i]);
      }
      return out;
    }
    case K::jordan:
      return "jordan(" + observable_to_text(e.kids[0]) + "," +
             observable_to_text(e.kids[1]) + ")";
    case K::sum: {
      std::string out = "(";
      for (std::size_t i = 0; i < e.kids.size(); ++i) {
        if (i || e.kids[i].sign < 0) out += e.kids[i].sign < 0 ? "-" : "+";
        out += observable_to_text(e.kids[i]);
      }
      return out + ")";
    }
  }
  return "";
}

// ---------------------------------------------------------------------
// kraus profile file: header line "krausprofile 1", then beta0/dbeta/count
// keys and count lines of "re im"
SampledKrausProfile read_profile_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open profile file: " + path);
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "krausprofile" || version != 1)
    throw Error("bad profile header in " + path);
  double beta0 = 0.0, dbeta = 0.0;
  long count = 0;
  if (!(is >> word >> beta0) || word != "beta0")
    throw Error("bad profile beta0 in " + path);
  if (!(is >> word >> dbeta) || word != "dbeta")
    throw Error("bad profile dbeta in " + path);
  if (!(is >> word >> count) || word != "count" || count < 2)
    throw Error("bad profile count in " + path);
  std::vector<Complex> values;
  values.reserve((std::size_t)count);
  for (long i = 0; i < count; ++i) {
    double re = 0.0, im = 0.0;
    if (!(is >> re >> im)) throw Error("profile data truncated in " + path);
    values.emplace_back(re, im);
  }
  return SampledKrausProfile::normalized(beta0, dbeta, std::move(values));
}

enum class Section { none, field, function, op, readout, move, scatter };

struct ParserState {
  ProtocolSpec spec;
  Section section = Section::none;
  FunctionDef* cur_fn = nullptr;
  OpSpec* cur_op = nullptr;
  bool saw_field = false, saw_readout = false, saw_move = false,
       saw_scatter = false;
  // function staging: bumps need kind/center/half_width assembled
  struct FnStage {
    std::string kind;
    Point center{};
    bool has_center = false;
    double half_width = 0.0;
    double amplitude = 1.0;
    std::string path;
    int line = 0;
  };
  FnStage fn_stage;
  std::string base_dir;
};

void finish_function(ParserState& st) {
  if (st.cur_fn == nullptr) return;
  auto& fs = st.fn_stage;
  FunctionDef& def = *st.cur_fn;
  if (fs.kind.empty())
    throw ParseError("function '" + def.name + "' needs a kind", fs.line, 1);
  if (fs.kind == "file") {
    if (fs.path.empty())
      throw ParseError("function '" + def.name + "' needs a path", fs.line, 1);
    std::filesystem::path p(fs.path);
    if (p.is_relative() && !st.base_dir.empty())
      p = std::filesystem::path(st.base_dir) / p;
    def.fn = SmearingFunction(read_sampled_file(p.string()));
    def.source_path = fs.path;
  } else {
    BumpSpec b;
    if (fs.kind == "cosine_bump")
      b.kind = BumpKind::cosine_bump;
    else if (fs.kind == "truncated_gaussian")
      b.kind = BumpKind::truncated_gaussian;
    else
      throw ParseError("unknown function kind '" + fs.kind + "'", fs.line, 1);
    if (!fs.has_center || !(fs.half_width > 0.0))
      throw ParseError(
          "function '" + def.name + "' needs center and half_width > 0",
          fs.line, 1);
    b.center = fs.center;
    b.half_width = fs.half_width;
    b.amplitude = fs.amplitude;
    def.fn = SmearingFunction(b);
  }
  st.cur_fn = nullptr;
  st.fn_stage = {};
}

void finish_op(ParserState& st) {
  if (st.cur_op == nullptr) return;
  OpSpec& op = *st.cur_op;
  const int ln = op.line;
  auto need_field = [&] {
    if (op.field.empty())
      throw ParseError("operation needs a field", ln, 1);
  };
  auto need_pair = [&] {
    if (op.fields.size() != 2)
      throw ParseError("operation needs two fields", ln, 1);
  };
  auto need_sigma = [&] {
    if (!(op.sigma > 0.0))
      throw ParseError("operation needs sigma > 0", ln, 1);
  };
  auto need_interval = [&] {
    if (!op.has_interval)
      throw ParseError("operation needs an interval", ln, 1);
  };
  if (op.map == "kick") {
    need_field();
    if (!op.has_strength)
      throw ParseError("kick needs a strength (number or 'lambda')", ln, 1);
  } else if (op.map == "kick_squared") {
    need_field();
  } else if (op.map == "gaussian_measure") {
    need_field();
    need_sigma();
  } else if (op.map == "general_measure") {
    need_field();
    if (op.profile_path.empty())
      throw ParseError("general_measure needs a profile path", ln, 1);
  } else if (op.map == "commuting_poly_measure") {
    if (op.poly.empty())
      throw ParseError("commuting_poly_measure needs a poly", ln, 1);
    need_sigma();
  } else if (op.map == "jordan_measure") {
    need_pair();
    need_sigma();
  } else if (op.map == "selective_gaussian") {
    need_field();
    need_sigma();
    need_interval();
  } else if (op.map == "locc") {
    need_pair();
    need_sigma();
    need_interval();
  } else if (op.map == "conditional") {
    throw ParseError(
        "map 'conditional' is reserved; the executable conditional pattern "
        "is 'locc'",
        ln, 1);
  } else if (op.map.empty()) {
    throw ParseError("operation needs a map", ln, 1);
  } else {
    throw ParseError("unknown map '" + op.map + "'", ln, 1);
  }
  st.cur_op = nullptr;
}

void close_section(ParserState& st) {
  finish_function(st);
  finish_op(st);
}

void handle_header(ParserState& st, const std::string& inner, int ln) {
  close_section(st);
  auto toks = split_ws(inner);
  if (toks.empty()) throw ParseError("empty section header", ln, 1);
  const std::string& kind = toks[0];
  if (kind == "field") {
    if (toks.size() != 1) throw ParseError("[field] takes no name", ln, 1);
    if (st.saw_field) throw ParseError("duplicate [field] section", ln, 1);
    st.saw_field = true;
    st.section = Section::field;
  } else if (kind == "function") {
    if (toks.size() != 2 || !valid_name(toks[1]))
      throw ParseError("expected [function NAME]", ln, 1);
    for (const auto& f : st.spec.functions)
      if (f.name == toks[1])
        throw ParseError("duplicate function '" + toks[1] +
                             "' (first defined at line " +
                             std::to_string(f.line) + ")",
                         ln, 1);
    st.spec.functions.push_back({toks[1], {}, "", ln});
    st.cur_fn = &st.spec.functions.back();
    st.fn_stage = {};
    st.fn_stage.line = ln;
    st.section = Section::function;
  } else if (kind == "op") {
    if (toks.size() != 2) throw ParseError("expected [op N]", ln, 1);
    const long n = parse_int(toks[1], ln, 1);
    if (n < 0) throw ParseError("operation number must be >= 0", ln, 1);
    for (const auto& o : st.spec.ops)
      if (o.number == n)
        throw ParseError("duplicate operation number " + toks[1] +
                             " (first defined at line " +
                             std::to_string(o.line) + ")",
                         ln, 1);
    OpSpec op;
    op.number = (int)n;
    op.line = ln;
    st.spec.ops.push_back(std::move(op));
    st.cur_op = &st.spec.ops.back();
    st.section = Section::op;
  } else if (kind == "readout") {
    if (st.saw_readout) throw ParseError("duplicate [readout] section", ln, 1);
    st.saw_readout = true;
    st.spec.readout.present = true;
    st.section = Section::readout;
  } else if (kind == "move") {
    if (st.saw_move) throw ParseError("duplicate [move] section", ln, 1);
    st.saw_move = true;
    st.spec.move.present = true;
    st.section = Section::move;
  } else if (kind == "scatter") {
    if (st.saw_scatter) throw ParseError("duplicate [scatter] section", ln, 1);
    st.saw_scatter = true;
    st.spec.scatter.present = true;
    st.section = Section::scatter;
  } else {
    throw ParseError("unknown section '" + kind + "'", ln, 1);
  }
}

void handle_key(ParserState& st, const std::string& key,
                const std::string& value, int ln, int vcol) {
  auto unknown = [&]() -> ParseError {
    return ParseError("unknown key '" + key + "'", ln, 1);
  };
  switch (st.section) {
    case Section::none:
      throw ParseError("key outside any section", ln, 1);
    case Section::field: {
      FieldConfig& fc = st.spec.field;
      if (key == "mass")
        fc.mass = parse_num(value, ln, vcol);
      else if (key == "quad_dx")
        fc.quad.dx = parse_num(value, ln, vcol);
      else if (key == "quad_levels")
        fc.quad.levels = (int)parse_int(value, ln, vcol);
      else if (key == "quad_tol")
        fc.quad.tol = parse_num(value, ln, vcol);
      else if (key == "quad_kmax")
        fc.quad.kmax = parse_num(value, ln, vcol);
      else if (key == "backend") {
        if (value != "quadrature" && value != "lattice")
          throw ParseError("backend must be quadrature or lattice", ln, vcol);
        fc.backend = value;
      } else if (key == "lattice_dx")
        fc.lattice_dx = parse_num(value, ln, vcol);
      else if (key == "lattice_window")
        fc.lattice_window = parse_rect(value, ln, vcol);
      else
        throw unknown();
      break;
    }
    case Section::function: {
      auto& fs = st.fn_stage;
      if (key == "kind")
        fs.kind = value;
      else if (key == "center") {
        auto v = parse_nums(value, 2, ln, vcol);
        fs.center = {v[0], v[1]};
        fs.has_center = true;
      } else if (key == "half_width")
        fs.half_width = parse_num(value, ln, vcol);
      else if (key == "amplitude")
        fs.amplitude = parse_num(value, ln, vcol);
      else if (key == "path")
        fs.path = value;
      else
        throw unknown();
      break;
    }
    case Section::op: {
      OpSpec& op = *st.cur_op;
      if (key == "agent")
        op.agent = value;
      else if (key == "map")
        op.map = value;
      else if (key == "field")
        op.field = value;
      else if (key == "fields") {
        op.fields = split_ws(value);
        if (op.fields.size() != 2)
          throw ParseError("fields takes two names", ln, vcol);
      } else if (key == "strength") {
        op.has_strength = true;
        if (value == "lambda")
          op.strength_is_lambda = true;
        else
          op.strength = parse_num(value, ln, vcol);
      } else if (key == "sigma")
        op.sigma = parse_num(value, ln, vcol);
      else if (key == "interval") {
        auto toks = split_ws(value);
        if (toks.size() != 2)
          throw ParseError("interval takes two endpoints", ln, vcol);
        op.a = parse_num(toks[0], ln, vcol);
        op.b = parse_num(toks[1], ln, vcol);
        if (!(op.a < op.b))
          throw ParseError("interval needs a < b", ln, vcol);
        op.has_interval = true;
      } else if (key == "poly")
        op.poly = value;
      else if (key == "profile")
        op.profile_path = value;
      else if (key == "region")
        op.region.push_back(parse_rect(value, ln, vcol));
      else
        throw unknown();
      break;
    }
    case Section::readout: {
      ReadoutSpec& r = st.spec.readout;
      if (key == "agent")
        r.agent = value;
      else if (key == "observable")
        r.observable = value;
      else if (key == "sweep") {
        auto c1 = value.find(':');
        auto c2 = value.rfind(':');
        if (c1 == std::string::npos || c2 == c1)
          throw ParseError("sweep format is LO:HI:STEP", ln, vcol);
        r.sweep_lo = parse_num(trim(value.substr(0, c1)), ln, vcol);
        r.sweep_hi = parse_num(trim(value.substr(c1 + 1, c2 - c1 - 1)), ln,
                               vcol);
        r.sweep_step = parse_num(trim(value.substr(c2 + 1)), ln, vcol);
        if (!(r.sweep_step > 0.0) || r.sweep_hi < r.sweep_lo)
          throw ParseError("sweep needs LO <= HI and STEP > 0", ln, vcol);
        r.has_sweep = true;
      } else if (key == "sigma")
        r.sigma = parse_num(value, ln, vcol);
      else if (key == "samples")
        r.samples = parse_int(value, ln, vcol);
      else if (key == "seed")
        r.seed = (std::uint64_t)parse_int(value, ln, vcol);
      else if (key == "plan")
        r.plan_labels = split_ws(value);
      else if (key == "plan_sigma") {
        r.plan_sigmas.clear();
        for (const auto& t : split_ws(value))
          r.plan_sigmas.push_back(parse_num(t, ln, vcol));
      } else if (key == "convention") {
        if (value != "commuting" && value != "jordan")
          throw ParseError("convention must be commuting or jordan", ln,
                           vcol);
        r.convention = value;
      } else
        throw unknown();
      break;
    }
    case Section::move: {
      MoveSpec& m = st.spec.move;
      if (key == "function")
        m.function = value;
      else if (key == "window") {
        auto v = parse_nums(value, 2, ln, vcol);
        m.t1 = v[0];
        m.t2 = v[1];
        if (!(m.t1 < m.t2))
          throw ParseError("window needs t1 < t2", ln, vcol);
      } else if (key == "lattice_dx")
        m.lattice_dx = parse_num(value, ln, vcol);
      else if (key == "lattice_window")
        m.lattice_window = parse_rect(value, ln, vcol);
      else if (key == "out")
        m.out = value;
      else
        throw unknown();
      break;
    }
    case Section::scatter: {
      ScatterSpec& sc = st.spec.scatter;
      if (key == "function")
        sc.function = value;
      else if (key == "kappa")
        sc.kappa = parse_num(value, ln, vcol);
      else if (key == "chi_center") {
        auto v = parse_nums(value, 2, ln, vcol);
        sc.chi.center = {v[0], v[1]};
      } else if (key == "chi_half_width")
        sc.chi.half_width = parse_num(value, ln, vcol);
      else if (key == "chi_amplitude")
        sc.chi.amplitude = parse_num(value, ln, vcol);
      else if (key == "window") {
        auto v = parse_nums(value, 2, ln, vcol);
        sc.t1 = v[0];
        sc.t2 = v[1];
        if (!(sc.t1 < sc.t2))
          throw ParseError("window needs t1 < t2", ln, vcol);
      } else if (key == "lattice_dx")
        sc.lattice_dx = parse_num(value, ln, vcol);
      else if (key == "lattice_window")
        sc.lattice_window = parse_rect(value, ln, vcol);
      else if (key == "out")
        sc.out = value;
      else if (key == "target")
        sc.target = value;
      else
        throw unknown();
      break;
    }
  }
}

bool has_function(const ProtocolSpec& spec, const std::string& name) {
  for (const auto& f : spec.functions)
    if (f.name == name) return true;
  return false;
}

void resolve_names(const ProtocolSpec& spec) {
  auto need = [&](const std::string& name, int line) {
    if (!has_function(spec, name))
      throw ParseError("unresolved function name '" + name + "'", line, 1);
  };
  for (const auto& op : spec.ops) {
    if (!op.field.empty()) need(op.field, op.line);
    for (const auto& f : op.fields) need(f, op.line);
    if (!op.poly.empty()) {
      std::vector<std::string> names;
      collect_names(parse_observable(op.poly), names);
      for (const auto& n : names) need(n, op.line);
    }
  }
  if (spec.readout.present || !spec.ops.empty()) {
    std::vector<std::string> names;
    collect_names(parse_observable(spec.readout.observable), names);
    for (const auto& n : names) need(n, 1);
    for (const auto& n : spec.readout.plan_labels) need(n, 1);
  }
  if (spec.move.present) need(spec.move.function, 1);
  if (spec.scatter.present) {
    need(spec.scatter.function, 1);
    if (!spec.scatter.target.empty()) need(spec.scatter.target, 1);
  }
}

ProtocolSpec parse_protocol_impl(const std::string& text,
                                 const std::string& base_dir) {
  ParserState st;
  st.base_dir = base_dir;
  std::istringstream is(text);
  std::string raw;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("unterminated section header", ln, 1);
      handle_header(st, trim(line.substr(1, line.size() - 2)), ln);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", ln, 1);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", ln, 1);
    if (value.empty()) throw ParseError("empty value", ln, (int)eq + 2);
    // column of the value within the original line, 1-based
    int vcol = (int)raw.find(value.substr(0, 1), eq) + 1;
    if (vcol <= 0) vcol = (int)eq + 2;
    handle_key(st, key, value, ln, vcol);
  }
  close_section(st);
  std::sort(st.spec.ops.begin(), st.spec.ops.end(),
            [](const OpSpec& a, const OpSpec& b) { return a.number < b.number; });
  resolve_names(st.spec);
  return std::move(st.spec);
}

}  // namespace

ObservableExpr parse_observable(const std::string& text) {
  ObsParser p{text};
  ObservableExpr e = p.expr();
  p.ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return e;
}

OperatorPoly lower_observable(const ObservableExpr& e,
                              const PairingTable& table) {
  using K = ObservableExpr::Kind;
  switch (e.kind) {
    case K::scalar:
      return OperatorPoly::constant(e.value);
    case K::field: {
      const int id = table.find(e.name);
      if (id < 0) throw Error("unknown field '" + e.name + "' in observable");
      return OperatorPoly::label(id);
    }
    case K::sum: {
      OperatorPoly out;
      for (const auto& k : e.kids) {
        OperatorPoly p = lower_observable(k, table);
        if (k.sign < 0)
          out -= p;
        else
          out += p;
      }
      return out;
    }
    case K::product: {
      OperatorPoly out = lower_observable(e.kids[0], table);
      for (std::size_t i = 1; i < e.kids.size(); ++i)
        out = poly_mul(out, lower_observable(e.kids[i], table), table);
      return out;
    }
    case K::power: {
      if (e.exponent == 0) return OperatorPoly::constant(1.0);
      OperatorPoly base = lower_observable(e.kids[0], table);
      OperatorPoly out = base;
      for (int i = 1; i < e.exponent; ++i) out = poly_mul(out, base, table);
      return out;
    }
    case K::jordan: {
      OperatorPoly a = lower_observable(e.kids[0], table);
      OperatorPoly b = lower_observable(e.kids[1], table);
      OperatorPoly sym = poly_mul(a, b, table) + poly_mul(b, a, table);
      return 0.5 * sym;
    }
  }
  throw Error("malformed observable tree");
}

ProtocolSpec parse_protocol(const std::string& text) {
  return parse_protocol_impl(text, "");
}

ProtocolSpec parse_protocol_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open protocol file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_protocol_impl(buf.str(),
                             std::filesystem::path(path).parent_path().string());
}

std::string print_protocol(const ProtocolSpec& spec) {
  std::string out;
  const FieldConfig& fc = spec.field;
  out += "[field]\n";
  out += "mass = " + fmt(fc.mass) + "\n";
  out += "backend = " + fc.backend + "\n";
  out += "quad_dx = " + fmt(fc.quad.dx) + "\n";
  out += "quad_levels = " + std::to_string(fc.quad.levels) + "\n";
  out += "quad_tol = " + fmt(fc.quad.tol) + "\n";
  out += "quad_kmax = " + fmt(fc.quad.kmax) + "\n";
  out += "lattice_dx = " + fmt(fc.lattice_dx) + "\n";
  if (fc.lattice_window) {
    const Rect& r = *fc.lattice_window;
    out += "lattice_window = " + fmt(r.t_lo) + " " + fmt(r.t_hi) + " " +
           fmt(r.x_lo) + " " + fmt(r.x_hi) + "\n";
  }
  for (const auto& f : spec.functions) {
    out += "\n[function " + f.name + "]\n";
    if (!f.source_path.empty()) {
      out += "kind = file\n";
      out += "path = " + f.source_path + "\n";
    } else {
      const BumpSpec& b = f.fn.bump();
      out += std::string("kind = ") +
             (b.kind == BumpKind::cosine_bump ? "cosine_bump"
                                              : "truncated_gaussian") +
             "\n";
      out += "center = " + fmt(b.center.t) + " " + fmt(b.center.x) + "\n";
      out += "half_width = " + fmt(b.half_width) + "\n";
      out += "amplitude = " + fmt(b.amplitude) + "\n";
    }
  }
  for (const auto& op : spec.ops) {
    out += "\n[op " + std::to_string(op.number) + "]\n";
    if (!op.agent.empty()) out += "agent = " + op.agent + "\n";
    out += "map = " + op.map + "\n";
    if (!op.field.empty()) out += "field = " + op.field + "\n";
    if (op.fields.size() == 2)
      out += "fields = " + op.fields[0] + " " + op.fields[1] + "\n";
    if (op.map == "kick")
      out += std::string("strength = ") +
             (op.strength_is_lambda ? "lambda" : fmt(op.strength)) + "\n";
    if (op.map != "kick" && op.map != "kick_squared" &&
        op.map != "general_measure")
      out += "sigma = " + fmt(op.sigma) + "\n";
    if (op.has_interval)
      out += "interval = " + fmt(op.a) + " " + fmt(op.b) + "\n";
    if (!op.poly.empty()) out += "poly = " + op.poly + "\n";
    if (!op.profile_path.empty()) out += "profile = " + op.profile_path + "\n";
    for (const auto& r : op.region)
      out += "region = " + fmt(r.t_lo) + " " + fmt(r.t_hi) + " " +
             fmt(r.x_lo) + " " + fmt(r.x_hi) + "\n";
  }
  if (const ReadoutSpec& r = spec.readout; r.present || !spec.ops.empty()) {
    out += "\n[readout]\n";
    out += "agent = " + r.agent + "\n";
    out += "observable = " + r.observable + "\n";
    if (r.has_sweep)
      out += "sweep = " + fmt(r.sweep_lo) + ":" + fmt(r.sweep_hi) + ":" +
             fmt(r.sweep_step) + "\n";
    out += "sigma = " + fmt(r.sigma) + "\n";
    if (r.samples > 0) out += "samples = " + std::to_string(r.samples) + "\n";
    out += "seed = " + std::to_string(r.seed) + "\n";
    if (!r.plan_labels.empty()) {
      out += "plan =";
      for (const auto& n : r.plan_labels) out += " " + n;
      out += "\n";
    }
    if (!r.plan_sigmas.empty()) {
      out += "plan_sigma =";
      for (double s : r.plan_sigmas) out += " " + fmt(s);
      out += "\n";
    }
    out += "convention = " + r.convention + "\n";
  }
  if (spec.move.present) {
    const MoveSpec& m = spec.move;
    out += "\n[move]\n";
    out += "function = " + m.function + "\n";
    out += "window = " + fmt(m.t1) + " " + fmt(m.t2) + "\n";
    if (m.lattice_dx) out += "lattice_dx = " + fmt(*m.lattice_dx) + "\n";
    if (m.lattice_window) {
      const Rect& w = *m.lattice_window;
      out += "lattice_window = " + fmt(w.t_lo) + " " + fmt(w.t_hi) + " " +
             fmt(w.x_lo) + " " + fmt(w.x_hi) + "\n";
    }
    if (!m.out.empty()) out += "out = " + m.out + "\n";
  }
  if (spec.scatter.present) {
    const ScatterSpec& sc = spec.scatter;
    out += "\n[scatter]\n";
    out += "function = " + sc.function + "\n";
    out += "kappa = " + fmt(sc.kappa) + "\n";
    out += "chi_center = " + fmt(sc.chi.center.t) + " " +
           fmt(sc.chi.center.x) + "\n";
    out += "chi_half_width = " + fmt(sc.chi.half_width) + "\n";
    out += "chi_amplitude = " + fmt(sc.chi.amplitude) + "\n";
    out += "window = " + fmt(sc.t1) + " " + fmt(sc.t2) + "\n";
    if (sc.lattice_dx) out += "lattice_dx = " + fmt(*sc.lattice_dx) + "\n";
    if (sc.lattice_window) {
      const Rect& w = *sc.lattice_window;
      out += "lattice_window = " + fmt(w.t_lo) + " " + fmt(w.t_hi) + " " +
             fmt(w.x_lo) + " " + fmt(w.x_hi) + "\n";
    }
    if (!sc.out.empty()) out += "out = " + sc.out + "\n";
    if (!sc.target.empty()) out += "target = " + sc.target + "\n";
  }
  return out;
}

const FunctionDef* find_function(const ProtocolSpec& spec,
                                 const std::string& name) {
  for (const auto& f : spec.functions)
    if (f.name == name) return &f;
  return nullptr;
}

Rect default_lattice_window(const ProtocolSpec& spec, double dx) {
  if (spec.functions.empty()) throw Error("no functions to build a window");
  Rect box = spec.functions[0].fn.support();
  for (const auto& f : spec.functions)
    box = Rect::hull(box, f.fn.support());
  const double tpad = 4.0 * dx;
  const double reach = (box.t_hi - box.t_lo) + 2.0 * tpad;
  return {box.t_lo - tpad, box.t_hi + tpad, box.x_lo - reach - 2.0 * dx,
          box.x_hi + reach + 2.0 * dx};
}

namespace {

UpdateMap resolve_op(const OpSpec& op, const PairingTable& table,
                     double lambda_value) {
  auto id = [&](const std::string& name) { return table.find(name); };
  UpdateMap m;
  m.region.rects = op.region;
  if (op.map == "kick") {
    m.op = KickField{id(op.field),
                     op.strength_is_lambda ? lambda_value : op.strength};
  } else if (op.map == "kick_squared") {
    m.op = KickFieldSquared{id(op.field)};
  } else if (op.map == "gaussian_measure") {
    m.op = GaussianMeasureField{id(op.field), op.sigma};
  } else if (op.map == "general_measure") {
    m.op = GeneralMeasureField{id(op.field), read_profile_file(op.profile_path)};
  } else if (op.map == "commuting_poly_measure") {
    m.op = GaussianMeasureCommutingPoly{
        lower_observable(parse_observable(op.poly), table), op.sigma};
  } else if (op.map == "jordan_measure") {
    m.op = GaussianMeasureJordanPair{id(op.fields[0]), id(op.fields[1]),
                                     op.sigma};
  } else if (op.map == "selective_gaussian") {
    m.op = SelectiveGaussian{id(op.field), op.sigma, op.a, op.b};
  } else if (op.map == "locc") {
    m.op = LoccConditional{id(op.fields[0]), id(op.fields[1]), op.sigma, op.a,
                           op.b};
  } else {
    throw Error("unknown map '" + op.map + "'");
  }
  return m;
}

[[noreturn]] void rethrow_with_op(int number, const Error& e) {
  throw Error("operation " + std::to_string(number) + ": " + e.what());
}

}  // namespace

BuiltProtocol build_protocol(const ProtocolSpec& spec, ExecPolicy exec) {
  BuiltProtocol bp;
  bp.table = std::make_unique<PairingTable>(spec.field.mass, spec.field.quad);
  for (const auto& f : spec.functions) bp.table->add(f.name, f.fn);

  if (spec.field.backend == "quadrature") {
    bp.table->build(true, exec);
  } else if (spec.field.backend == "lattice") {
    const double dx = spec.field.lattice_dx;
    const Rect win = spec.field.lattice_window
                         ? *spec.field.lattice_window
                         : default_lattice_window(spec, dx);
    const Lattice lat = make_lattice(win, dx);
    const double mass = spec.field.mass;
    const QuadratureConfig quad = spec.field.quad;
    PairingTable::PairFn dfn = [lat, mass, exec](const SmearingFunction& a,
                                                 const SmearingFunction& b) {
      return lattice_delta(a, b, mass, lat, exec);
    };
    PairingTable::PairFn cfn = [mass, quad, exec](const SmearingFunction& a,
                                                  const SmearingFunction& b) {
      return vacuum_covariance(a, b, mass, quad, exec);
    };
    bp.table->build_with(dfn, &cfn);
  } else {
    throw Error("unknown pairing backend '" + spec.field.backend + "'");
  }

  int lambda_ops = 0;
  for (std::size_t i = 0; i < spec.ops.size(); ++i) {
    const OpSpec& op = spec.ops[i];
    if (op.strength_is_lambda) {
      if (op.map != "kick")
        throw Error("operation " + std::to_string(op.number) +
                    ": only kicks take strength = lambda");
      bp.alice_index = (int)i;
      ++lambda_ops;
    }
    UpdateMap m;
    try {
      m = resolve_op(op, *bp.table, 0.0);
      validate_map(m, *bp.table);
    } catch (const Error& e) {
      rethrow_with_op(op.number, e);
    }
    bp.comp.maps.push_back(std::move(m));
  }
  if (lambda_ops > 1)
    throw Error("at most one operation may take strength = lambda");

  // state order must not contradict the causal order of the regions
  for (std::size_t i = 0; i < bp.comp.maps.size(); ++i)
    for (std::size_t j = i + 1; j < bp.comp.maps.size(); ++j) {
      const RegionSet ri = bp.comp.maps[i].effective_region(*bp.table);
      const RegionSet rj = bp.comp.maps[j].effective_region(*bp.table);
      if (region_relation(ri, rj) ==
          RegionRelation::totally_timelike_b_before_a)
        throw Error("operation " + std::to_string(spec.ops[j].number) +
                    " lies entirely before operation " +
                    std::to_string(spec.ops[i].number) +
                    " in time but is applied later; reorder the operations");
    }

  bp.observable = parse_observable(spec.readout.observable);
  OperatorPoly lowered = lower_observable(bp.observable, *bp.table);
  if (lowered.degree() > 2)
    throw Error("readout observables are limited to degree 2");

  // try to view the observable as c0 + c1 phi(g) + c2 phi(g)^2
  bp.obs_single_label = true;
  bp.obs_label = -1;
  bp.obs_c[0] = bp.obs_c[1] = bp.obs_c[2] = 0.0;
  for (const auto& [word, coeff] : lowered.terms()) {
    if (!word.atoms.empty()) {
      bp.obs_single_label = false;
      break;
    }
    for (LabelId l : word.labels) {
      if (bp.obs_label == -1) bp.obs_label = l;
      if (l != bp.obs_label) bp.obs_single_label = false;
    }
    if (!bp.obs_single_label) break;
    if (std::abs(coeff.imag()) > 1e-12 * (1.0 + std::abs(coeff.real())))
      bp.obs_single_label = false;
    if (!bp.obs_single_label) break;
    bp.obs_c[word.labels.size()] += coeff.real();
  }
  if (bp.obs_label == -1) bp.obs_single_label = false;
  return bp;
}

namespace {

std::vector<double> sweep_values(const ProtocolSpec& spec,
                                 const std::optional<std::vector<double>>&
                                     override_values) {
  if (override_values) return *override_values;
  const ReadoutSpec& r = spec.readout;
  if (!r.has_sweep) return {0.0};
  std::vector<double> out;
  for (double v = r.sweep_lo; v <= r.sweep_hi + 1e-12 * (1.0 + r.sweep_step);
       v += r.sweep_step)
    out.push_back(v);
  return out;
}

// first and second transformed moments of the observed label under the
// composition with the swept kick bound to lambda
void jet_moments(const BuiltProtocol& bp, const ProtocolSpec& spec,
                 double lambda, double& mu1, double& mu2, int degree) {
  Composition comp = bp.comp;
  if (bp.alice_index >= 0)
    std::get<KickField>(comp.maps[bp.alice_index].op).strength = lambda;
  WeylJet jet = WeylJet::trivial(bp.obs_label, 2);
  for (std::size_t r = comp.maps.size(); r-- > 0;) {
    try {
      jet = apply(comp.maps[r], jet, *bp.table);
    } catch (const Error& e) {
      rethrow_with_op(spec.ops[r].number, e);
    }
  }
  const GaussianState state = bp.state();
  mu1 = 0.0;
  mu2 = 0.0;
  if (degree >= 1)
    mu1 = wick_expectation(jet_extract(jet, 1, *bp.table), state).real();
  if (degree >= 2)
    mu2 = wick_expectation(jet_extract(jet, 2, *bp.table), state).real();
}

}  // namespace

std::string RunResult::csv() const {
  std::string out = "lambda,analytic,mc_estimate,mc_se\n";
  for (const auto& r : rows) {
    out += fmt(r.lambda) + "," + fmt(r.analytic) + ",";
    if (r.has_mc) out += fmt(r.mc_estimate) + "," + fmt(r.mc_se);
    else
      out += ",";
    out += "\n";
  }
  return out;
}

RunResult run_protocol(const ProtocolSpec& spec,
                       const std::optional<std::vector<double>>& sweep_override,
                       ExecPolicy exec) {
  BuiltProtocol bp = build_protocol(spec, exec);
  const std::vector<double> lambdas = sweep_values(spec, sweep_override);
  const long nsamp = spec.readout.samples;
  const double sigma_b = spec.readout.sigma;

  if (!bp.obs_single_label && !bp.comp.maps.empty())
    throw Error(
        "readout observables must be a polynomial in one field when "
        "operations are present");
  if (!bp.obs_single_label && nsamp > 0)
    throw Error("the Monte Carlo readout needs a single-field observable");

  RunResult res;
  for (std::size_t row = 0; row < lambdas.size(); ++row) {
    const double lambda = lambdas[row];
    RunRow r;
    r.lambda = lambda;

    double mu1 = 0.0, mu2 = 0.0;
    if (bp.obs_single_label) {
      const int degree = bp.obs_c[2] != 0.0 ? 2 : (bp.obs_c[1] != 0.0 ? 1 : 0);
      jet_moments(bp, spec, lambda, mu1, mu2, std::max(degree, nsamp > 0 ? 2 : 0));
      r.analytic = bp.obs_c[0] + bp.obs_c[1] * mu1 + bp.obs_c[2] * mu2;
    } else {
      OperatorPoly lowered = lower_observable(bp.observable, *bp.table);
      r.analytic = wick_expectation(lowered, bp.state()).real();
    }

    if (nsamp > 0) {
      // latent readout model: the transformed label's first two moments fix
      // a Gaussian latent; readout noise of width sigma_b rides on top, and
      // the estimator corrects the squared column for the noise variance
      const double var = std::max(mu2 - mu1 * mu1, 0.0);
      const double sd = std::sqrt(var);
      std::vector<double> y((std::size_t)nsamp);
      const bool par = exec == ExecPolicy::parallel;
      const std::uint64_t seed = spec.readout.seed;
      const std::uint64_t d0 = 2 * (std::uint64_t)row;
#pragma omp parallel for schedule(static) if (par)
      for (long i = 0; i < nsamp; ++i) {
        const double alpha =
            mu1 + sd * counter_normal(seed, (std::uint64_t)i, d0) +
            sigma_b * counter_normal(seed, (std::uint64_t)i, d0 + 1);
        y[(std::size_t)i] = bp.obs_c[0] + bp.obs_c[1] * alpha +
                            bp.obs_c[2] * (alpha * alpha - sigma_b * sigma_b);
      }
      double s = 0.0;
      for (double v : y) s += v;
      const double mean = s / (double)nsamp;
      double var_y = 0.0;
      for (double v : y) var_y += (v - mean) * (v - mean);
      var_y /= (double)(nsamp - 1);
      r.has_mc = true;
      r.mc_estimate = mean;
      r.mc_se = std::sqrt(var_y / (double)nsamp);
    }
    res.rows.push_back(r);
  }
  return res;
}

std::string CheckResult::to_text() const {
  std::string out;
  out += "overall = ";
  out += overall == SupportVerdict::causal
             ? "causal"
             : overall == SupportVerdict::acausal ? "acausal" : "inconclusive";
  out += "\n";
  for (const auto& rep : op_reports) {
    out += "\n";
    out += rep.to_text();
  }
  for (const auto& sig : signals) {
    out += "\n";
    out += sig.to_text();
  }
  return out;
}

CheckResult check_protocol(const ProtocolSpec& spec, ExecPolicy exec) {
  BuiltProtocol bp = build_protocol(spec, exec);
  if (!bp.obs_single_label)
    throw Error("causality checks need a single-field readout observable");
  CheckResult out;
  const RegionSet g_support = bp.table->support(bp.obs_label);

  for (std::size_t i = 0; i < bp.comp.maps.size(); ++i) {
    WeylJet jet = WeylJet::trivial(bp.obs_label, 2);
    try {
      jet = apply(bp.comp.maps[i], jet, *bp.table);
    } catch (const Error& e) {
      rethrow_with_op(spec.ops[i].number, e);
    }
    SupportReport rep = psni_check(jet, g_support, *bp.table);
    out.op_reports.push_back(std::move(rep));
  }

  bool any_acausal = false, all_causal = true;
  for (const auto& rep : out.op_reports) {
    if (rep.verdict == SupportVerdict::acausal) any_acausal = true;
    if (rep.verdict != SupportVerdict::causal) all_causal = false;
  }

  bool signal_found = false, semantic_clean = false;
  if (bp.alice_index >= 0) {
    const RegionSet alice =
        bp.comp.maps[(std::size_t)bp.alice_index].effective_region(*bp.table);
    if (region_relation(alice, g_support) ==
        RegionRelation::strictly_spacelike) {
      std::vector<double> grid = sweep_values(spec, std::nullopt);
      if (grid.size() < 3) grid = {0.0, 0.5, 1.0, 1.5, 2.0};
      const GaussianState state = bp.state();
      if (bp.obs_c[1] != 0.0) {
        out.signals.push_back(signal_gradient(
            bp.comp, (std::size_t)bp.alice_index, ObservableKind::field,
            bp.obs_label, state, grid));
        out.signals.back().protocol_id = spec.readout.agent;
      }
      if (bp.obs_c[2] != 0.0) {
        out.signals.push_back(signal_gradient(
            bp.comp, (std::size_t)bp.alice_index,
            ObservableKind::field_squared, bp.obs_label, state, grid));
        out.signals.back().protocol_id = spec.readout.agent;
      }
      semantic_clean = !out.signals.empty();
      for (const auto& s : out.signals)
        if (s.verdict == SignalVerdict::signal) {
          signal_found = true;
          semantic_clean = false;
        }
    }
  }

  if (any_acausal || signal_found)
    out.overall = SupportVerdict::acausal;
  else if (all_causal || semantic_clean)
    out.overall = SupportVerdict::causal;
  else
    out.overall = SupportVerdict::inconclusive;
  return out;
}

std::string sample_protocol_csv(const ProtocolSpec& spec, int n,
                                std::uint64_t seed) {
  if (!spec.ops.empty())
    throw Error("outcome sampling requires an operation-free protocol");
  BuiltProtocol bp = build_protocol(spec);

  MeasurementPlan plan;
  plan.convention = spec.readout.convention == "jordan"
                        ? CompositionConvention::jordan_symmetrized
                        : CompositionConvention::commuting;
  if (!spec.readout.plan_labels.empty()) {
    for (std::size_t i = 0; i < spec.readout.plan_labels.size(); ++i) {
      const double s = i < spec.readout.plan_sigmas.size()
                           ? spec.readout.plan_sigmas[i]
                           : spec.readout.sigma;
      plan.entries.push_back({bp.table->find(spec.readout.plan_labels[i]), s});
    }
  } else {
    if (!bp.obs_single_label)
      throw Error("outcome sampling needs a plan or a single-field observable");
    plan.entries.push_back({bp.obs_label, spec.readout.sigma});
  }

  OutcomeBatch batch = sample_measurements(plan, bp.state(), n, seed);
  std::string out = "sample_index";
  for (int j = 0; j < batch.k; ++j)
    out += ",alpha_" + std::to_string(j + 1);
  out += "\n";
  for (int i = 0; i < batch.n; ++i) {
    out += std::to_string(i);
    for (int j = 0; j < batch.k; ++j) out += "," + fmt(batch.at(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace qfup
