#include "fibersem/model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "fibersem/error.hpp"

namespace fibersem {

Model::Model(StructureBundle bundle, std::vector<Section> sections, std::vector<Connection> connections,
             std::vector<SmoothMap> maps, std::optional<std::size_t> witness_grid, std::string origin)
    : bundle_(std::move(bundle)),
      sections_(std::move(sections)),
      connections_(std::move(connections)),
      maps_(std::move(maps)),
      witness_grid_(witness_grid),
      origin_(std::move(origin)) {}

namespace {

template <class T>
const T& find_named(const std::vector<T>& items, std::string_view name, const char* kind) {
  for (const auto& it : items) {
    if (it.name() == name) return it;
  }
  throw ValidationError(std::string("no ") + kind + " named '" + std::string(name) + "'");
}

}  // namespace

const Section& Model::section(std::string_view name) const { return find_named(sections_, name, "section"); }
const Connection& Model::connection(std::string_view name) const {
  return find_named(connections_, name, "connection");
}
const SmoothMap& Model::map(std::string_view name) const { return find_named(maps_, name, "map"); }

bool Model::has_section(std::string_view name) const {
  return std::any_of(sections_.begin(), sections_.end(), [&](const Section& s) { return s.name() == name; });
}

// ---------------------------------------------------------------------------

namespace {

struct Entry {
  std::string key;
  std::string value;
  bool quoted = false;
  std::size_t line = 0;
};

struct Block {
  std::string kind;
  std::string name;
  std::size_t line = 0;
  std::vector<Entry> entries;
};

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw ParseError(origin_ + ":" + std::to_string(line) + ": " + msg, 0, line);
  }

  std::vector<Block> split(std::string_view text) const {
    std::vector<Block> blocks;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      std::string line(text.substr(pos, end - pos));
      pos = end + 1;
      ++line_no;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(line_no, "unterminated block header");
        std::istringstream in(line.substr(1, line.size() - 2));
        Block b;
        b.line = line_no;
        in >> b.kind >> b.name;
        std::string extra;
        if (in >> extra) fail(line_no, "unexpected text in block header");
        if (b.kind.empty()) fail(line_no, "empty block header");
        blocks.push_back(std::move(b));
        continue;
      }
      if (blocks.empty()) fail(line_no, "entry before the first block header");
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "expected key = value");
      Entry e;
      e.key = trim(line.substr(0, eq));
      e.line = line_no;
      std::string value = trim(line.substr(eq + 1));
      if (e.key.empty()) fail(line_no, "missing key");
      if (!value.empty() && value.front() == '"') {
        if (value.size() < 2 || value.back() != '"') fail(line_no, "unterminated string");
        e.value = value.substr(1, value.size() - 2);
        e.quoted = true;
      } else {
        e.value = value;
      }
      if (e.value.empty()) fail(line_no, "empty value for '" + e.key + "'");
      for (const auto& prev : blocks.back().entries) {
        if (prev.key == e.key) fail(line_no, "duplicate key '" + e.key + "'");
      }
      blocks.back().entries.push_back(std::move(e));
    }
    return blocks;
  }

  double number(const Entry& e) const {
    const auto v = numbers(e);
    if (v.size() != 1) fail(e.line, "'" + e.key + "' takes one number");
    return v[0];
  }

  std::size_t count(const Entry& e) const {
    const double v = number(e);
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      fail(e.line, "'" + e.key + "' must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }

  std::vector<double> numbers(const Entry& e) const {
    if (e.quoted) fail(e.line, "'" + e.key + "' takes numbers, not an expression");
    std::vector<double> out;
    std::string item;
    std::istringstream in(e.value);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      double v = 0.0;
      const auto* first = item.data();
      const auto* last = item.data() + item.size();
      if (!item.empty() && *first == '+') ++first;
      const auto res = std::from_chars(first, last, v);
      if (item.empty() || res.ec != std::errc() || res.ptr != last) fail(e.line, "bad number '" + item + "'");
      out.push_back(v);
    }
    return out;
  }

  std::vector<double> axis_values(const Entry& e, std::size_t dim) const {
    auto v = numbers(e);
    if (v.size() == 1) v.assign(dim, v[0]);
    if (v.size() != dim) fail(e.line, "'" + e.key + "' needs 1 or " + std::to_string(dim) + " values");
    return v;
  }

  const std::string& expression(const Entry& e) const {
    if (!e.quoted) fail(e.line, "'" + e.key + "' must be a double-quoted expression");
    return e.value;
  }

  template <class F>
  auto with_line(const Entry& e, F&& f) const {
    try {
      return f();
    } catch (const ParseError& err) {
      fail(e.line, err.what());
    } catch (const ValidationError& err) {
      fail(e.line, err.what());
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_string = !in_string;
      if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
  }

  std::string origin_;
};

const Entry* find(const Block& b, std::string_view key) {
  for (const auto& e : b.entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

/// Parses keys y1..yk of a block as expressions over `vars`.
std::vector<Expr> components(const Reader& rd, const Block& b, std::size_t k, const VarList& vars,
                             const VarAliases& aliases, const std::vector<std::string>& allowed_extra) {
  std::vector<Expr> out(k);
  std::vector<bool> seen(k, false);
  for (const auto& e : b.entries) {
    if (std::find(allowed_extra.begin(), allowed_extra.end(), e.key) != allowed_extra.end()) continue;
    std::size_t i = 0;
    if (e.key.size() >= 2 && e.key[0] == 'y') {
      const auto res = std::from_chars(e.key.data() + 1, e.key.data() + e.key.size(), i);
      if (res.ec != std::errc() || res.ptr != e.key.data() + e.key.size()) i = 0;
    }
    if (i < 1 || i > k) rd.fail(e.line, "unknown key '" + e.key + "' in [" + b.kind + " " + b.name + "]");
    out[i - 1] = rd.with_line(e, [&] { return parse_expr(rd.expression(e), vars, aliases); });
    seen[i - 1] = true;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!seen[i]) rd.fail(b.line, "[" + b.kind + " " + b.name + "] is missing y" + std::to_string(i + 1));
  }
  return out;
}

void reject_unknown(const Reader& rd, const Block& b, const std::vector<std::string>& keys) {
  for (const auto& e : b.entries) {
    if (std::find(keys.begin(), keys.end(), e.key) == keys.end()) {
      rd.fail(e.line, "unknown key '" + e.key + "' in [" + b.kind + (b.name.empty() ? "" : " " + b.name) + "]");
    }
  }
}

}  // namespace

Model parse_model(std::string_view text, std::string origin) {
  const Reader rd(origin);
  const auto blocks = rd.split(text);

  const Block* base_block = nullptr;
  const Block* fiber_block = nullptr;
  std::vector<SymbolDecl> relations, functions;
  std::vector<std::string> constants;
  std::map<std::string, std::size_t> names;
  for (const auto& b : blocks) {
    if (b.kind == "base" || b.kind == "fiber") {
      if (!b.name.empty()) rd.fail(b.line, "[" + b.kind + "] takes no name");
      auto*& slot = b.kind == "base" ? base_block : fiber_block;
      if (slot != nullptr) rd.fail(b.line, "duplicate [" + b.kind + "] block");
      slot = &b;
      continue;
    }
    static const std::vector<std::string> kinds{"relation", "function", "constant", "section", "connection", "map"};
    if (std::find(kinds.begin(), kinds.end(), b.kind) == kinds.end()) rd.fail(b.line, "unknown block '" + b.kind + "'");
    if (b.name.empty()) rd.fail(b.line, "[" + b.kind + "] needs a name");
    if (!names.emplace(b.name, b.line).second) rd.fail(b.line, "name '" + b.name + "' is declared twice");
    if (b.kind == "relation" || b.kind == "function") {
      const Entry* a = find(b, "arity");
      const std::size_t arity = a ? rd.count(*a) : 1;
      (b.kind == "relation" ? relations : functions).push_back({b.name, arity});
    } else if (b.kind == "constant") {
      constants.push_back(b.name);
    }
  }
  if (base_block == nullptr) rd.fail(1, "missing [base] block");
  if (fiber_block == nullptr) rd.fail(1, "missing [fiber] block");

  auto read_box = [&](const Block& b, const std::vector<std::string>& keys) {
    reject_unknown(rd, b, keys);
    const Entry* d = find(b, "dim");
    const Entry* lo = find(b, "lo");
    const Entry* hi = find(b, "hi");
    if (!d || !lo || !hi) rd.fail(b.line, "[" + b.kind + "] needs dim, lo and hi");
    const std::size_t dim = rd.count(*d);
    return rd.with_line(*d, [&] { return BaseBox(rd.axis_values(*lo, dim), rd.axis_values(*hi, dim)); });
  };
  const BaseBox base = read_box(*base_block, {"dim", "lo", "hi"});
  const BaseBox fiber_box = read_box(*fiber_block, {"dim", "lo", "hi", "grid"});
  std::optional<std::size_t> witness_grid;
  if (const Entry* g = find(*fiber_block, "grid")) witness_grid = rd.count(*g);
  const std::size_t n = base.dim();
  const std::size_t k = fiber_box.dim();
  if (k > 9) rd.fail(fiber_block->line, "fiber dimension above 9 is not supported by the variable naming");

  auto interp = std::make_shared<Interpretation>();
  interp->base_dim = n;
  interp->fiber_dim = k;
  try {
    interp->signature = Signature(relations, functions, constants);
  } catch (const ValidationError& err) {
    rd.fail(1, err.what());
  }

  std::vector<Section> sections;
  std::vector<Connection> connections;
  std::vector<SmoothMap> maps;
  const VarList bvars = base_vars(n);
  for (const auto& b : blocks) {
    if (b.kind == "relation") {
      const std::size_t arity = interp->signature.relations()[*interp->signature.relation(b.name)].arity;
      reject_unknown(rd, b, {"arity", "guard"});
      const Entry* g = find(b, "guard");
      if (!g) rd.fail(b.line, "[relation " + b.name + "] needs a guard");
      interp->guards.push_back(rd.with_line(*g, [&] {
        return parse_expr(rd.expression(*g), argument_vars(n, k, arity), argument_aliases(n, k, arity));
      }));
    } else if (b.kind == "function") {
      const std::size_t arity = interp->signature.functions()[*interp->signature.function(b.name)].arity;
      interp->functions.push_back(
          components(rd, b, k, argument_vars(n, k, arity), argument_aliases(n, k, arity), {"arity"}));
    } else if (b.kind == "constant") {
      interp->constants.push_back(components(rd, b, k, bvars, {}, {}));
    } else if (b.kind == "section") {
      BaseBox domain = base;
      const Entry* lo = find(b, "lo");
      const Entry* hi = find(b, "hi");
      if ((lo == nullptr) != (hi == nullptr)) rd.fail(b.line, "section sub-box needs both lo and hi");
      if (lo) {
        domain = rd.with_line(*lo, [&] { return BaseBox(rd.axis_values(*lo, n), rd.axis_values(*hi, n)); });
        if (!base.contains_box(domain)) rd.fail(lo->line, "section domain is not inside the base box");
      }
      sections.emplace_back(domain, components(rd, b, k, bvars, {}, {"lo", "hi"}), b.name);
    } else if (b.kind == "connection") {
      std::vector<std::vector<std::string>> entries(k, std::vector<std::string>(n));
      for (const auto& e : b.entries) {
        if (e.key.size() != 3 || e.key[0] != 'L' || e.key[1] < '1' || e.key[2] < '1' ||
            static_cast<std::size_t>(e.key[1] - '0') > k || static_cast<std::size_t>(e.key[2] - '0') > n) {
          rd.fail(e.line, "connection keys are L<fiber axis><base axis>, got '" + e.key + "'");
        }
        entries[e.key[1] - '1'][e.key[2] - '1'] = rd.expression(e);
      }
      connections.push_back(rd.with_line(b.entries.empty() ? Entry{"", "", false, b.line} : b.entries.front(),
                                         [&] { return Connection::parse(base, fiber_box, entries, b.name); }));
    } else if (b.kind == "map") {
      const Entry* s = find(b, "source");
      const Entry* lo = find(b, "lo");
      const Entry* hi = find(b, "hi");
      if (!s || !lo || !hi) rd.fail(b.line, "[map " + b.name + "] needs source, lo and hi");
      const std::size_t sdim = rd.count(*s);
      const BaseBox source = rd.with_line(*lo, [&] { return BaseBox(rd.axis_values(*lo, sdim), rd.axis_values(*hi, sdim)); });
      const VarList svars = SmoothMap::source_vars(sdim);
      const VarAliases saliases = SmoothMap::source_aliases(sdim);
      std::vector<Expr> comps(n);
      std::vector<bool> seen(n, false);
      for (const auto& e : b.entries) {
        if (e.key == "source" || e.key == "lo" || e.key == "hi") continue;
        std::size_t i = 0;
        if (e.key.size() >= 2 && e.key[0] == 'x') {
          const auto res = std::from_chars(e.key.data() + 1, e.key.data() + e.key.size(), i);
          if (res.ec != std::errc() || res.ptr != e.key.data() + e.key.size()) i = 0;
        }
        if (i < 1 || i > n) rd.fail(e.line, "map components are x1..x" + std::to_string(n) + ", got '" + e.key + "'");
        comps[i - 1] = rd.with_line(e, [&] { return parse_expr(rd.expression(e), svars, saliases); });
        seen[i - 1] = true;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) rd.fail(b.line, "[map " + b.name + "] is missing x" + std::to_string(i + 1));
      }
      maps.emplace_back(source, std::move(comps), b.name);
      try {
        check_image(maps.back(), base);
      } catch (const ImageEscape& err) {
        rd.fail(b.line, std::string("[map ") + b.name + "]: " + err.what());
      }
    }
  }
  try {
    interp->validate();
  } catch (const ValidationError& err) {
    rd.fail(1, err.what());
  }
  return Model(StructureBundle(base, interp, fiber_box), std::move(sections), std::move(connections), std::move(maps),
               witness_grid, std::move(origin));
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path);
}

}  // namespace fibersem
