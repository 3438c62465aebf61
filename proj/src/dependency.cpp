#include "seqinfer/dependency.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "seqinfer/errors.hpp"

namespace seqinfer {

std::size_t DependencyTree::root() const {
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i] == 0) return i + 1;
  throw TreeError("dependency tree has no root");
}

std::vector<std::size_t> DependencyTree::children(std::size_t index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i] == index) out.push_back(i + 1);
  return out;
}

void DependencyTree::validate() const {
  const std::size_t n = tokens.size();
  if (n == 0) throw TreeError("dependency tree is empty");
  if (heads.size() != n || deprels.size() != n || pos.size() != n)
    throw TreeError("dependency tree fields have different lengths");
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (heads[i] > n) throw TreeError("token " + std::to_string(i + 1) + " has out-of-range head " + std::to_string(heads[i]));
    if (heads[i] == i + 1) throw TreeError("token " + std::to_string(i + 1) + " is its own head");
    if (heads[i] == 0) ++roots;
  }
  if (roots != 1) throw TreeError("dependency tree has " + std::to_string(roots) + " roots, expected 1");
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t cur = i;
    for (std::size_t steps = 0; cur != 0; ++steps) {
      if (steps > n) throw TreeError("dependency tree has a cycle through token " + std::to_string(i));
      cur = heads[cur - 1];
    }
  }
}

std::vector<DependencyTree> read_conll(std::istream& in) {
  std::vector<DependencyTree> trees;
  DependencyTree cur;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    try {
      cur.validate();
    } catch (const TreeError& e) {
      throw FormatError(std::string("invalid tree ending: ") + e.what(), lineno);
    }
    trees.push_back(std::move(cur));
    cur = DependencyTree{};
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 5) throw FormatError("expected 5 tab-separated fields", lineno);
    std::size_t index = 0, head = 0;
    try {
      std::size_t pos = 0;
      index = std::stoul(fields[0], &pos);
      if (pos != fields[0].size()) throw std::invalid_argument("index");
      head = std::stoul(fields[3], &pos);
      if (pos != fields[3].size()) throw std::invalid_argument("head");
    } catch (const std::logic_error&) {
      throw FormatError("non-numeric index or head", lineno);
    }
    if (index != cur.tokens.size() + 1) throw FormatError("token index out of sequence", lineno);
    cur.tokens.push_back(fields[1]);
    cur.pos.push_back(fields[2]);
    cur.heads.push_back(head);
    cur.deprels.push_back(fields[4]);
  }
  flush();
  return trees;
}

std::vector<DependencyTree> read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dependency file " + path);
  return read_conll(in);
}

void write_conll(std::ostream& out, const std::vector<DependencyTree>& trees) {
  for (const auto& t : trees) {
    for (std::size_t i = 0; i < t.size(); ++i)
      out << (i + 1) << '\t' << t.tokens[i] << '\t' << t.pos[i] << '\t' << t.heads[i] << '\t' << t.deprels[i] << '\n';
    out << '\n';
  }
}

const std::set<std::string>& default_core_roles() {
  static const std::set<std::string> roles{"nsubj", "obj", "iobj", "ccomp", "xcomp"};
  return roles;
}

MsSegmentation segment_sentence(const DependencyTree& tree, const std::set<std::string>& core_roles) {
  tree.validate();
  MsSegmentation seg;
  for (std::size_t i = 1; i <= tree.size(); ++i) {
    if (tree.head(i) == 0 || core_roles.count(tree.deprel(i)))
      seg.major.push_back(i);
    else
      seg.surrounding.push_back(i);
  }
  return seg;
}

std::vector<std::size_t> entity_block(const DependencyTree& tree, const Span& entity) {
  const std::size_t n = tree.size();
  std::vector<bool> in_block(n + 1, false);
  for (std::size_t t = entity.first; t <= entity.last; ++t) {
    in_block[t] = true;
    const std::size_t parent = tree.head(t);
    if (parent != 0) in_block[parent] = true;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t hj = tree.head(j);
      if (hj == t) in_block[j] = true;                      // child
      if (parent != 0 && hj == parent) in_block[j] = true;  // sibling
    }
  }
  std::vector<std::size_t> block;
  for (std::size_t i = 1; i <= n; ++i)
    if (in_block[i]) block.push_back(i);
  return block;
}

BlockSet extract_blocks(const DependencyTree& tree, const Span& e1, const Span& e2) {
  tree.validate();
  const std::size_t n = tree.size();
  for (const auto* s : {&e1, &e2})
    if (s->first < 1 || s->first > s->last || s->last > n)
      throw ContractError("entity span [" + std::to_string(s->first) + "," + std::to_string(s->last) +
                          "] outside sentence of length " + std::to_string(n));
  if (e1.first <= e2.last && e2.first <= e1.last) throw ContractError("entity spans overlap");
  return BlockSet{entity_block(tree, e1), entity_block(tree, e2), e1, e2};
}

}  // namespace seqinfer
