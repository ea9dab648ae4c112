#pragma once

// Text certificates for proof trees. One line per node in preorder:
//
//   TAG <tab> conclusion <tab> rule index <tab> theta <tab> premise count
//
// theta is written `X=t; Y=u` (or `-` when empty); the rule index is `-`
// for steps that do not use a program rule. Lines starting with `%` are
// comments.

#include <sstream>
#include <string>
#include <vector>

#include "qcflp/prover.hpp"

namespace qcflp {

class CertificateError : public std::runtime_error {
 public:
  CertificateError(int line, const std::string& msg)
      : std::runtime_error("certificate line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline void write_node(const ProofNode& n, std::string& out) {
  out += n.tag();
  out += '\t';
  out += to_string(n.conclusion);
  out += '\t';
  out += n.rule_index >= 0 ? std::to_string(n.rule_index) : "-";
  out += '\t';
  if (n.theta.empty()) {
    out += "-";
  } else {
    bool first = true;
    for (const auto& [v, t] : n.theta) {
      if (!first) out += "; ";
      first = false;
      out += v + "=" + to_string(t);
    }
  }
  out += '\t';
  out += std::to_string(n.children.size());
  out += '\n';
}

inline void write_tree(const ProofNode& n, std::string& out) {
  write_node(n, out);
  for (const auto& c : n.children) write_tree(c, out);
}

// Splits on `sep` outside string and character literals.
inline std::vector<std::string> split_outside_quotes(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      cur += c;
      if (c == '\\' && i + 1 < s.size()) {
        cur += s[++i];
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') quote = c;
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
      continue;
    }
    cur += c;
  }
  parts.push_back(cur);
  return parts;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct CertLine {
  int line;
  std::vector<std::string> fields;
};

class CertReader {
 public:
  CertReader(std::vector<CertLine> lines, const Signature& sig, const ParseOptions& opts)
      : lines_(std::move(lines)), sig_(sig), opts_(opts) {}

  ProofNode read() {
    if (lines_.empty()) throw CertificateError(0, "empty certificate");
    ProofNode root = node();
    if (pos_ != lines_.size()) throw CertificateError(lines_[pos_].line, "trailing lines after the proof tree");
    return root;
  }

 private:
  ProofNode node() {
    if (pos_ >= lines_.size()) {
      throw CertificateError(lines_.empty() ? 0 : lines_.back().line, "premise missing");
    }
    const CertLine& l = lines_[pos_++];
    if (l.fields.size() != 5) throw CertificateError(l.line, "expected 5 tab-separated fields");
    ProofNode n;
    std::string tag = trim(l.fields[0]);
    bool qualified = tag.size() > 2 && tag[0] == 'Q';
    auto step = step_from_name(qualified ? tag.substr(1) : tag);
    if (!step) throw CertificateError(l.line, "unknown step `" + tag + "`");
    n.step = *step;
    ParseOptions po = opts_;
    if (!qualified) po.kind = SourceKind::Plain;
    try {
      n.conclusion = parse_statement(l.fields[1], sig_, po);
    } catch (const std::exception& e) {
      throw CertificateError(l.line, std::string("bad conclusion: ") + e.what());
    }
    if (n.conclusion.qual.has_value() != qualified) {
      throw CertificateError(l.line, "tag and conclusion disagree on qualification");
    }
    std::string idx = trim(l.fields[2]);
    if (idx != "-") {
      try {
        std::size_t used = 0;
        n.rule_index = std::stoi(idx, &used);
        if (used != idx.size() || n.rule_index < 0) throw std::invalid_argument(idx);
      } catch (const std::exception&) {
        throw CertificateError(l.line, "bad rule index `" + idx + "`");
      }
    }
    std::string th = trim(l.fields[3]);
    if (th != "-") {
      for (const auto& b : split_outside_quotes(th, ';')) {
        auto eq = b.find('=');
        if (eq == std::string::npos) throw CertificateError(l.line, "bad binding `" + trim(b) + "`");
        std::string var = trim(b.substr(0, eq));
        try {
          n.theta.bind(var, parse_expr(b.substr(eq + 1), sig_, po));
        } catch (const std::exception& e) {
          throw CertificateError(l.line, std::string("bad binding value: ") + e.what());
        }
      }
    }
    int count = 0;
    try {
      std::size_t used = 0;
      std::string c = trim(l.fields[4]);
      count = std::stoi(c, &used);
      if (used != c.size() || count < 0) throw std::invalid_argument(c);
    } catch (const std::exception&) {
      throw CertificateError(l.line, "bad premise count");
    }
    for (int i = 0; i < count; ++i) n.children.push_back(node());
    return n;
  }

  std::vector<CertLine> lines_;
  const Signature& sig_;
  ParseOptions opts_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string write_certificate(const ProofNode& tree) {
  std::string out;
  detail::write_tree(tree, out);
  return out;
}

/// Throws CertificateError on malformed input.
inline ProofNode read_certificate(const std::string& text, const Signature& sig, const ParseOptions& opts = {}) {
  std::vector<detail::CertLine> lines;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line[0] == '%') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    lines.push_back({no, std::move(fields)});
  }
  return detail::CertReader(std::move(lines), sig, opts).read();
}

/// Parses and checks; malformed certificates are invalid.
inline CheckResult check_certificate(const Program& prog, const QualDomain& dom, const std::string& text) {
  ProofNode tree;
  try {
    tree = read_certificate(text, prog.sig, {SourceKind::Qualified, dom});
  } catch (const std::exception& e) {
    return {CheckResult::Kind::Invalid, e.what(), ""};
  }
  return check_proof(prog, dom, tree);
}

}  // namespace qcflp
