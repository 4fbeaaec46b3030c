#include "spmat/structure.hpp"

#include "spmat/elements.hpp"
#include "spmat/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

namespace spmat {

double determinant(const Mat3 &m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double volume(const Mat3 &lattice) { return std::abs(determinant(lattice)); }

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// cos(90 deg) evaluates to 6e-17 in floating point; orthogonal cells should
// come out exactly diagonal.
double cos_deg(double angle) { return angle == 90.0 ? 0.0 : std::cos(angle * kDeg); }
double sin_deg(double angle) { return angle == 90.0 ? 1.0 : std::sin(angle * kDeg); }

double norm(const Vec3 &v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
double dot(const Vec3 &a, const Vec3 &b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

} // namespace

Mat3 lattice_from_parameters(const CellParameters &p) {
  const double ca = cos_deg(p.alpha), cb = cos_deg(p.beta), cg = cos_deg(p.gamma);
  const double sg = sin_deg(p.gamma);
  const double cy = (ca - cb * cg) / sg;
  const double cz2 = 1.0 - cb * cb - cy * cy;
  if (!(p.a > 0 && p.b > 0 && p.c > 0) || !(sg > 0) || !(cz2 > 0))
    throw Error(ErrorCode::InvalidStructure,
                fmt::format("degenerate cell parameters a={} b={} c={} alpha={} beta={} gamma={}",
                            p.a, p.b, p.c, p.alpha, p.beta, p.gamma));
  Mat3 m{};
  m[0] = {p.a, 0.0, 0.0};
  m[1] = {p.b * cg, p.b * sg, 0.0};
  m[2] = {p.c * cb, p.c * cy, p.c * std::sqrt(cz2)};
  return m;
}

CellParameters cell_parameters(const Mat3 &l) {
  CellParameters p;
  p.a = norm(l[0]);
  p.b = norm(l[1]);
  p.c = norm(l[2]);
  p.alpha = std::acos(std::clamp(dot(l[1], l[2]) / (p.b * p.c), -1.0, 1.0)) / kDeg;
  p.beta = std::acos(std::clamp(dot(l[0], l[2]) / (p.a * p.c), -1.0, 1.0)) / kDeg;
  p.gamma = std::acos(std::clamp(dot(l[0], l[1]) / (p.a * p.b), -1.0, 1.0)) / kDeg;
  return p;
}

double wrap_fraction(double f) {
  double w = f - std::floor(f);
  // f slightly below an integer can round up to exactly 1.0
  if (w >= 1.0)
    w = 0.0;
  return w;
}

void validate(const CrystalStructure &s) {
  if (!(determinant(s.lattice) > 0.0))
    throw Error(ErrorCode::InvalidStructure,
                fmt::format("structure '{}': lattice determinant must be positive", s.id));
  if (s.sites.empty())
    throw Error(ErrorCode::InvalidStructure, fmt::format("structure '{}' has no sites", s.id));
  for (std::size_t i = 0; i < s.sites.size(); ++i) {
    const auto &site = s.sites[i];
    for (double f : site.frac) {
      if (!std::isfinite(f) || f < 0.0 || f >= 1.0)
        throw Error(ErrorCode::InvalidStructure,
                    fmt::format("structure '{}' site {}: fractional coordinate {} not in [0,1)",
                                s.id, i, f));
    }
    if (site.z < 1 || site.z > kMaxAtomicNumber)
      throw Error(ErrorCode::InvalidStructure,
                  fmt::format("structure '{}' site {}: atomic number {}", s.id, i, site.z));
  }
}

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int line_no = 0;
  std::size_t pos = 0;
  bool in_text_field = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    ++line_no;
    pos = end + 1;

    // Semicolon-delimited text fields become a single opaque token.
    if (!line.empty() && line.front() == ';') {
      if (!in_text_field)
        out.push_back({"<text>", line_no});
      in_text_field = !in_text_field;
      continue;
    }
    if (in_text_field)
      continue;

    std::size_t i = 0;
    while (i < line.size()) {
      const char ch = line[i];
      if (std::isspace(static_cast<unsigned char>(ch))) {
        ++i;
        continue;
      }
      if (ch == '#')
        break;
      if (ch == '\'' || ch == '"') {
        std::size_t close = i + 1;
        // a quote only closes when followed by whitespace or end of line
        while (close < line.size() &&
               !(line[close] == ch &&
                 (close + 1 == line.size() ||
                  std::isspace(static_cast<unsigned char>(line[close + 1])))))
          ++close;
        out.push_back({std::string(line.substr(i + 1, close - i - 1)), line_no});
        i = close + 1;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
        ++j;
      out.push_back({std::string(line.substr(i, j - i)), line_no});
      i = j;
    }
    if (end == text.size())
      break;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto &c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_keyword(const std::string &t) {
  if (t.empty())
    return false;
  if (t.front() == '_')
    return true;
  const auto l = lower(t);
  return l == "loop_" || l.starts_with("data_") || l.starts_with("save_") || l == "global_";
}

double parse_number(const Token &tok) {
  std::string_view s = tok.text;
  // strip a standard uncertainty suffix like 3.1416(2)
  if (auto paren = s.find('('); paren != std::string_view::npos)
    s = s.substr(0, paren);
  double value = 0.0;
  const char *first = s.data();
  const char *last = s.data() + s.size();
  if (!s.empty() && *first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
    throw Error(ErrorCode::MalformedNumber,
                fmt::format("line {}: cannot parse '{}' as a number", tok.line, tok.text));
  return value;
}

struct Loop {
  std::vector<std::string> tags;
  std::vector<Token> values;
};

bool is_identity_op(std::string op) {
  op.erase(std::remove_if(op.begin(), op.end(),
                          [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '\'' || c == '"'; }),
           op.end());
  op = lower(op);
  return op == "x,y,z" || op == "+x,+y,+z";
}

bool is_p1_name(std::string name) {
  name.erase(std::remove_if(name.begin(), name.end(),
                            [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '_'; }),
             name.end());
  return lower(name) == "p1";
}

} // namespace

CrystalStructure parse_cif(std::string_view text, std::string id) {
  const auto tokens = tokenize(text);
  std::map<std::string, Token> items;
  std::vector<Loop> loops;
  std::string block;

  std::size_t i = 0;
  while (i < tokens.size()) {
    const auto &tok = tokens[i];
    const auto l = lower(tok.text);
    if (l.starts_with("data_")) {
      if (!block.empty())
        break; // only the first data block is read
      block = tok.text.substr(5);
      ++i;
    } else if (l == "loop_") {
      Loop loop;
      ++i;
      while (i < tokens.size() && !tokens[i].text.empty() && tokens[i].text.front() == '_')
        loop.tags.push_back(lower(tokens[i++].text));
      while (i < tokens.size() && !is_keyword(tokens[i].text))
        loop.values.push_back(tokens[i++]);
      loops.push_back(std::move(loop));
    } else if (!tok.text.empty() && tok.text.front() == '_') {
      if (i + 1 >= tokens.size() || is_keyword(tokens[i + 1].text))
        throw Error(ErrorCode::MissingTag, fmt::format("line {}: tag {} has no value", tok.line, tok.text));
      items[l] = tokens[i + 1];
      i += 2;
    } else {
      ++i;
    }
  }

  auto require = [&](const char *tag) -> double {
    auto it = items.find(tag);
    if (it == items.end())
      throw Error(ErrorCode::MissingTag, tag);
    return parse_number(it->second);
  };

  CellParameters p;
  p.a = require("_cell_length_a");
  p.b = require("_cell_length_b");
  p.c = require("_cell_length_c");
  p.alpha = require("_cell_angle_alpha");
  p.beta = require("_cell_angle_beta");
  p.gamma = require("_cell_angle_gamma");

  for (const char *tag : {"_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt"}) {
    if (auto it = items.find(tag); it != items.end() && it->second.text != "?" &&
                                   it->second.text != "." && !is_p1_name(it->second.text))
      throw Error(ErrorCode::NonP1Symmetry, fmt::format("space group '{}'", it->second.text));
  }
  for (const char *tag : {"_symmetry_int_tables_number", "_space_group_it_number"}) {
    if (auto it = items.find(tag); it != items.end() && it->second.text != "?" &&
                                   it->second.text != "." && it->second.text != "1")
      throw Error(ErrorCode::NonP1Symmetry, fmt::format("space group number {}", it->second.text));
  }
  for (const char *tag : {"_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz"}) {
    if (auto it = items.find(tag); it != items.end() && !is_identity_op(it->second.text))
      throw Error(ErrorCode::NonP1Symmetry, fmt::format("symmetry operation '{}'", it->second.text));
  }

  const Loop *atoms = nullptr;
  for (const auto &loop : loops) {
    for (const auto &tag : loop.tags) {
      if (tag == "_symmetry_equiv_pos_as_xyz" || tag == "_space_group_symop_operation_xyz") {
        const auto col = static_cast<std::size_t>(&tag - loop.tags.data());
        for (std::size_t r = col; r < loop.values.size(); r += loop.tags.size())
          if (!is_identity_op(loop.values[r].text))
            throw Error(ErrorCode::NonP1Symmetry,
                        fmt::format("line {}: symmetry operation '{}'", loop.values[r].line,
                                    loop.values[r].text));
      }
      if (tag.starts_with("_atom_site_fract_"))
        atoms = &loop;
    }
  }
  if (!atoms)
    throw Error(ErrorCode::MissingTag, "_atom_site_fract_x");

  auto column = [&](std::string_view tag) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < atoms->tags.size(); ++c)
      if (atoms->tags[c] == tag)
        return c;
    return std::nullopt;
  };
  std::array<std::size_t, 3> fcol{};
  for (int k = 0; k < 3; ++k) {
    const std::string tag = std::string("_atom_site_fract_") + "xyz"[k];
    auto c = column(tag);
    if (!c)
      throw Error(ErrorCode::MissingTag, tag);
    fcol[static_cast<std::size_t>(k)] = *c;
  }
  auto symbol_col = column("_atom_site_type_symbol");
  if (!symbol_col)
    symbol_col = column("_atom_site_label");
  if (!symbol_col)
    throw Error(ErrorCode::MissingTag, "_atom_site_type_symbol");

  const std::size_t width = atoms->tags.size();
  if (atoms->values.size() % width != 0)
    throw Error(ErrorCode::MalformedNumber,
                fmt::format("line {}: atom_site loop has a partial row",
                            atoms->values.empty() ? 0 : atoms->values.back().line));

  CrystalStructure s;
  s.id = id.empty() ? block : std::move(id);
  s.lattice = lattice_from_parameters(p);
  for (std::size_t r = 0; r + width <= atoms->values.size(); r += width) {
    const auto &sym_tok = atoms->values[r + *symbol_col];
    const auto symbol = leading_alpha(sym_tok.text);
    const auto z = atomic_number(symbol);
    if (!z)
      throw Error(ErrorCode::UnknownElement,
                  fmt::format("line {}: '{}'", sym_tok.line, sym_tok.text));
    Site site;
    site.z = *z;
    for (std::size_t k = 0; k < 3; ++k)
      site.frac[k] = wrap_fraction(parse_number(atoms->values[r + fcol[k]]));
    s.sites.push_back(site);
  }
  validate(s);
  return s;
}

CrystalStructure read_cif(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, fmt::format("cannot open {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cif(buf.str(), path.stem().string());
}

std::string write_cif(const CrystalStructure &s) {
  const auto p = cell_parameters(s.lattice);
  std::string out = fmt::format("data_{}\n", s.id.empty() ? "structure" : s.id);
  out += "_symmetry_space_group_name_H-M   'P 1'\n";
  out += "_symmetry_Int_Tables_number      1\n";
  out += fmt::format("_cell_length_a    {:.17g}\n", p.a);
  out += fmt::format("_cell_length_b    {:.17g}\n", p.b);
  out += fmt::format("_cell_length_c    {:.17g}\n", p.c);
  out += fmt::format("_cell_angle_alpha {:.17g}\n", p.alpha);
  out += fmt::format("_cell_angle_beta  {:.17g}\n", p.beta);
  out += fmt::format("_cell_angle_gamma {:.17g}\n", p.gamma);
  out += "loop_\n_symmetry_equiv_pos_as_xyz\n  'x, y, z'\n";
  out += "loop_\n_atom_site_label\n_atom_site_type_symbol\n"
         "_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n";
  for (std::size_t i = 0; i < s.sites.size(); ++i) {
    const auto &site = s.sites[i];
    const auto sym = element_symbol(site.z);
    out += fmt::format("  {}{} {} {:.17g} {:.17g} {:.17g}\n", sym, i + 1, sym, site.frac[0],
                       site.frac[1], site.frac[2]);
  }
  return out;
}

void write_cif_file(const std::filesystem::path &path, const CrystalStructure &s) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
  out << write_cif(s);
}

} // namespace spmat
